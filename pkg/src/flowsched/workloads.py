"""
**flowsched.workloads**: instance construction
----------------------------------------------

- seeded random instances (:func:`gen_random`) and distortion injection,
- exhaustive micro-instances for the oracle comparison (:func:`enumerate_micro`),
- the two-sided to one-sided prediction normalisation,
- the semiclairvoyant transform (:func:`semiclairvoyant_transform`),
- the adaptive lower-bound adversary with its bombardment (:func:`run_adversary`).

Randomness comes from :mod:`numpy`'s ``PCG64`` bit generator, seeded through a
:class:`~numpy.random.SeedSequence`. Only integer draws are used and every rational
is built from them, so the same seed gives the same instance on every platform.
The job structure (releases, anchors, weights) and the distortion use two spawned
child sequences of the seed.

"""

from fractions import Fraction
from itertools import combinations_with_replacement, product
from typing import Iterator, Literal, Sequence, Union
import logging
import math

import numpy as np

from flowsched.core import floor_log, make_instance
from flowsched.engine import Simulator, simulate
from flowsched.errors import (
    InternalInconsistency,
    InvalidMu,
    InvalidRho,
    InvalidSpec,
    VictimWeighted,
)
from flowsched.models import (
    AdversaryConfig,
    AdversaryOutcome,
    Instance,
    Job,
    RandomSpec,
    format_rat,
)
from flowsched.policy.srpt import ScriptedPolicy
from flowsched.policyinterface_1_0 import ModelInterface

logger = logging.getLogger(__name__)

Mode = Literal["uniform", "extremal", "exact"]
Seed = Union[int, np.random.SeedSequence, np.random.Generator]


def make_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def _factors(
    count: int, mu: Fraction, mode: Mode, seed: Seed, k: int, max_denominator: int
) -> list[Fraction]:
    """Distortion factors ``p / p̃`` in ``[1, μ)``, or exactly 1."""
    mu = Fraction(mu)
    if mu < 1:
        raise InvalidSpec(f"distortion mu must be at least 1, got {format_rat(mu)}")
    if mode == "exact" or mu == 1:
        return [Fraction(1)] * count
    if mode == "extremal":
        return [max(Fraction(1), mu * k / (k + 1))] * count
    if mode == "uniform":
        rng = make_rng(seed)
        draws = rng.integers(0, max_denominator, size=count)
        return [1 + (mu - 1) * Fraction(int(u), max_denominator) for u in draws]
    raise InvalidSpec(f"unknown distortion mode {mode!r}")


def inject_distortion(
    pred: Sequence[Fraction],
    mu: Fraction,
    mode: Mode = "uniform",
    seed: Seed = 0,
    k: int = 7,
    max_denominator: int = 64,
) -> list[Fraction]:
    """
    Returns true processing times ``p ∈ [p̃, μ·p̃)`` for the predictions ``pred``.

    - ``uniform``: ``p = p̃·(1 + (μ − 1)·u/D)`` with ``u`` uniform in ``{0, …, D − 1}``,
    - ``extremal``: ``p = p̃·μ·k/(k + 1)``, clamped below at ``p̃``,
    - ``exact``: ``p = p̃``.
    """
    factors = _factors(len(pred), mu, mode, seed, k, max_denominator)
    return [Fraction(p) * f for p, f in zip(pred, factors)]


def predict_from_true(
    true: Sequence[Fraction],
    mu: Fraction,
    mode: Mode = "uniform",
    seed: Seed = 0,
    k: int = 7,
    max_denominator: int = 64,
) -> list[Fraction]:
    """The inverse of :func:`inject_distortion`: predictions for given true times."""
    factors = _factors(len(true), mu, mode, seed, k, max_denominator)
    return [Fraction(p) / f for p, f in zip(true, factors)]


def _grid(rng: np.random.Generator, lo: Fraction, hi: Fraction, den: int, n: int):
    lo_k = math.ceil(Fraction(lo) * den)
    hi_k = math.floor(Fraction(hi) * den)
    if lo_k > hi_k:
        raise InvalidSpec(
            f"range [{format_rat(lo)}, {format_rat(hi)}] holds no multiple of 1/{den}"
        )
    return [Fraction(int(v), den) for v in rng.integers(lo_k, hi_k, size=n, endpoint=True)]


def gen_random(spec: RandomSpec) -> Instance:
    """Draws a random instance; the result is deterministic in ``spec.seed``."""
    if spec.mu < 1:
        raise InvalidSpec(f"distortion mu must be at least 1, got {format_rat(spec.mu)}")
    lo, hi = spec.proc_range
    if lo <= 0 or lo > hi:
        raise InvalidSpec(f"invalid processing time range [{format_rat(lo)}, {format_rat(hi)}]")
    if spec.release_window < 0:
        raise InvalidSpec("release window must not be negative")
    if len(spec.weights) == 0 or any(w <= 0 for w in spec.weights):
        raise InvalidSpec("weights must be a nonempty set of positive values")

    structure, distortion = np.random.SeedSequence(spec.seed).spawn(2)
    rng = make_rng(structure)
    releases = _grid(rng, Fraction(0), spec.release_window, spec.release_denominator, spec.n)
    anchors = _grid(rng, lo, hi, spec.proc_denominator, spec.n)
    weights = [spec.weights[int(i)] for i in rng.integers(0, len(spec.weights), size=spec.n)]

    args = (spec.mu, spec.mode, distortion, spec.extremal_k, spec.max_denominator)
    if spec.anchor == "pred":
        pred, true = anchors, inject_distortion(anchors, *args)
    else:
        pred, true = predict_from_true(anchors, *args), anchors
    jobs = [
        Job(id=i, release=r, pred_proc=pp, true_proc=tp, weight=w)
        for i, (r, pp, tp, w) in enumerate(zip(releases, pred, true, weights))
    ]
    return make_instance(jobs, spec.mu)


def normalize_two_sided(
    pred: Sequence[Fraction], mu_prime: Fraction
) -> tuple[list[Fraction], Fraction]:
    """
    Turns predictions with two-sided error ``p ∈ [p̃/μ', μ'·p̃)`` into one-sided ones
    by dividing by ``μ'``; the one-sided distortion becomes ``μ'**2``.
    """
    mu_prime = Fraction(mu_prime)
    if mu_prime < 1:
        raise InvalidMu(f"two-sided distortion must be at least 1, got {format_rat(mu_prime)}")
    return [Fraction(p) / mu_prime for p in pred], mu_prime**2


def semiclairvoyant_transform(true_jobs: Sequence[Job], rho: Fraction) -> Instance:
    """
    Replaces every prediction by the class representative ``ρ**⌊log_ρ p⌋`` and
    declares ``μ = ρ``.
    """
    rho = Fraction(rho)
    if rho <= 1:
        raise InvalidRho(f"class base rho must be larger than 1, got {format_rat(rho)}")
    jobs = [
        job.model_copy(update=dict(pred_proc=rho ** floor_log(job.true_proc, rho)))
        for job in true_jobs
    ]
    return make_instance(jobs, rho)


def enumerate_micro(
    max_n: int = 3,
    max_release: int = 2,
    max_proc: int = 3,
    weights: Sequence[int] = (1, 2, 4),
    mus: Sequence[Fraction] = (Fraction(1), Fraction(2)),
    mode: Mode = "extremal",
    k: int = 7,
) -> Iterator[Instance]:
    """
    Yields every instance with up to ``max_n`` jobs, integer releases in
    ``[0, max_release]``, integer true times in ``[1, max_proc]`` and weights from
    ``weights``, for every ``μ`` in ``mus``. Jobs are unordered, so each multiset
    of jobs appears once.
    """
    kinds = list(product(range(max_release + 1), range(1, max_proc + 1), weights))
    for mu in mus:
        for n in range(1, max_n + 1):
            for combo in combinations_with_replacement(kinds, n):
                true = [Fraction(p) for _, p, _ in combo]
                pred = predict_from_true(true, mu, mode, 0, k)
                jobs = [
                    Job(id=i, release=r, true_proc=tp, pred_proc=pp, weight=w)
                    for i, ((r, _, w), tp, pp) in enumerate(zip(combo, true, pred))
                ]
                yield make_instance(jobs, mu)


def run_adversary(cfg: AdversaryConfig, victim: ModelInterface) -> AdversaryOutcome:
    """
    Runs the adaptive lower-bound construction against a fresh ``victim``.

    Phases ``i = M − 1, …, 0`` each release two jobs with ``p̃ = λ**i``,
    ``λ = (μ + 1)/(μ − 1)``, whose true times stay open while the phase runs. At
    the end of the phase the job the victim processed more (the lower id on a tie)
    gets ``p = μ·λ**i``, the other ``p = λ**i``. The bombardment then releases
    back-to-back jobs of size ``x_bomb``: the smallest remaining volume of any job
    pending for the victim or for the reference schedule at the end of the phases.

    The reference schedule completes the shorter job of each phase within the
    phase, then serves every bombardment job at its release, then the rest by
    shortest remaining time. Its flow is an upper bound on the optimum.

    The realized instance declares ``μ·(1 + declared_slack)`` since the longer
    phase jobs sit exactly at ``μ·p̃``; the victim runs with ``cfg.mu``.
    """
    log = logging.getLogger(f"{__name__}.run_adversary")
    mu = Fraction(cfg.mu)
    if mu <= 1:
        raise InvalidMu(f"the adversary needs mu > 1, got {format_rat(mu)}")
    if victim.weighted:
        raise VictimWeighted(f"victim {victim.name!r} is a weighted policy")
    if mu > 2:
        log.warning("the construction assumes mu <= 2, got %s", format_rat(mu))
    lam = (mu + 1) / (mu - 1)

    declared = mu * (1 + cfg.declared_slack)
    sim = Simulator(victim, mu=declared)
    t = Fraction(0)
    next_id = 0
    splits = []
    ranks = {}
    for i in range(cfg.phases - 1, -1, -1):
        length = lam**i
        a, b = [
            Job(id=next_id + k, release=t, true_proc=length, pred_proc=length)
            for k in range(2)
        ]
        next_id += 2
        sim.add(a, committed=False)
        sim.add(b, committed=False)
        sim.run(until=t + length)
        t += length
        if a.id in sim.completion or b.id in sim.completion:
            raise InternalInconsistency(f"a job of phase {i} completed before the phase ended")
        ea, eb = sim.elapsed[a.id], sim.elapsed[b.id]
        q1, q2 = (a, b) if ea >= eb else (b, a)
        e1, e2 = max(ea, eb), min(ea, eb)
        sim.commit(q1.id, mu * length)
        sim.commit(q2.id, length)
        splits.append((i, q1.id, q2.id, e1, e2))
        ranks[q1.id] = 2
        ranks[q2.id] = 1
        log.info(
            "phase %d ends at %s: q1=%d processed %s, q2=%d processed %s",
            i,
            format_rat(t),
            q1.id,
            format_rat(e1),
            q2.id,
            format_rat(e2),
        )

    candidates = [sim.remaining[jid] for jid in sim.pending]
    candidates.extend(mu * lam ** s[0] for s in splits)
    x_bomb = min(candidates)
    for k in range(cfg.bombardment_count):
        job = Job(id=next_id, release=t + k * x_bomb, true_proc=x_bomb, pred_proc=x_bomb)
        sim.add(job)
        ranks[job.id] = 0
        next_id += 1
    sim.run()
    result = sim.result()

    inst = make_instance(sim.jobs.values(), declared)
    reference = ScriptedPolicy(
        mu=inst.mu,
        true_procs={job.id: job.true_proc for job in inst.jobs},
        ranks=ranks,
    )
    opt_upper_bound = simulate(inst, reference).flow_weighted
    log.info(
        "victim %s: flow %s against reference %s",
        victim.name,
        format_rat(result.flow_unweighted),
        format_rat(opt_upper_bound),
    )
    return AdversaryOutcome(
        instance=inst,
        victim_flow=result.flow_unweighted,
        opt_upper_bound=opt_upper_bound,
        lam=lam,
        phases=cfg.phases,
        splits=splits,
        x_bomb=x_bomb,
    )
