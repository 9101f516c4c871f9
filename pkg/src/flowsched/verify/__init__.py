"""
**flowsched.verify**: the acceptance suite
------------------------------------------

:func:`cmd_verify` runs the following criteria on seeded batches and reports a
pass/fail table:

====  =================  ==============================================================
 #    name               checked property
====  =================  ==============================================================
 1    duality            sum form and integral form of the flow time agree exactly
 2-4  unweighted         two-bins flow and ``δ(t)`` within ``2⌈μ²⌉`` of SRPT, covered
                         volume, no violations and priority bijections
 5    weighted           superbins within ``2⌈μ²⌉(⌈log₂W⌉+1)·2`` of the exact optimum,
                         local weighted bound, density-weight partial uniqueness
 6    adversary          lower-bound adversary pushes SRPT on predictions above 17/10
 7    semiclairvoyant    two-bins within 4 of SRPT on base-2 classes
 8    mutation           two-bins without rotation is caught by the checkers
====  =================  ==============================================================

"""

from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, Callable, Iterable, Optional
import logging
import math
import time

from flowsched import io
from flowsched.engine import flow_time_both_forms, simulate
from flowsched.models import (
    AdversaryConfig,
    Instance,
    OracleLimits,
    RandomSpec,
    Reply,
    format_rat,
)
from flowsched.analysis import check_pending_bound
from flowsched.policies import REGISTRY, make_policy
from flowsched.policy.srpt import PredictedSRPT
from flowsched.runner import (
    evaluate,
    get_settings,
    replies,
    resolve_outdir,
    superbins_factor,
    worker_count,
)
from flowsched.workloads import (
    enumerate_micro,
    gen_random,
    run_adversary,
    semiclairvoyant_transform,
)

logger = logging.getLogger(__name__)

MUS = (Fraction(1), Fraction(3, 2), Fraction(2), Fraction(4))
CRITERIA = ["duality", "unweighted", "weighted", "adversary", "semiclairvoyant", "mutation"]
NUMBERS = dict(zip(CRITERIA, ["1", "2-4", "5", "6", "7", "8"]))
VERIFY_HEADER = ["criterion", "name", "status", "instances", "detail"]

Outcome = tuple[bool, Optional[str]]


def _first_failure(reports) -> Optional[str]:
    for rep in reports:
        if not rep.passed:
            ff = rep.first_failure
            return f"{rep.checker} at event {ff.event_index}: {ff.message}"
    return None


def _random(seed: int, max_n: int, mu: Fraction, **kwargs) -> Instance:
    n = 1 + seed % max_n
    spec = dict(
        n=n,
        seed=seed,
        mu=mu,
        release_window=n,
        release_denominator=2,
        mode="extremal" if seed % 2 == 0 else "uniform",
    )
    spec.update(kwargs)
    return gen_random(RandomSpec(**spec))


def _duality_case(args: tuple) -> Outcome:
    seed, max_n, policy_settings = args
    names = list(REGISTRY)
    policy = names[seed % len(names)]
    mu = MUS[(seed // len(names)) % len(MUS)]
    weights = [Fraction(1)] if policy in {"two-bins", "srpt", "srpt-pred"} else [1, 2, 3, 8]
    inst = _random(seed, max_n, mu, weights=weights, release_denominator=3, proc_denominator=2)
    result = simulate(inst, make_policy(policy, inst, None, policy_settings))
    sum_form, integral = flow_time_both_forms(result, inst)
    if sum_form != integral:
        return False, (
            f"seed {seed}, {policy}: sum form {format_rat(sum_form)} "
            f"!= integral {format_rat(integral)}"
        )
    return True, None


def _unweighted_case(args: tuple) -> Outcome:
    mu, seed, max_n, limits, policy_settings = args
    inst = _random(seed, max_n, mu)
    ev = evaluate(inst, "two-bins", None, "all", limits, policy_settings)
    bound = 2 * math.ceil(mu**2)
    if ev.ratio > bound:
        return False, f"mu={format_rat(mu)} seed {seed}: ratio {format_rat(ev.ratio)} > {bound}"
    failure = _first_failure(ev.reports)
    if failure is not None:
        return False, f"mu={format_rat(mu)} seed {seed}: {failure}"
    return True, None


def _weighted_case(args: tuple) -> Outcome:
    inst, limits, policy_settings = args
    label = f"mu={format_rat(inst.mu)} n={inst.n} {io.dumps_instance(inst).splitlines()[1:]}"
    ev = evaluate(inst, "superbins", None, "all", limits, policy_settings)
    if ev.reference.kind != "exact" and not inst.unweighted:
        return False, f"{label}: no exact optimum ({ev.reference.kind})"
    bound = 2 * superbins_factor(inst, inst.mu)
    if ev.ratio > bound:
        return False, f"{label}: superbins ratio {format_rat(ev.ratio)} > {format_rat(bound)}"
    failure = _first_failure(ev.reports)
    if failure is not None:
        return False, f"{label}: superbins {failure}"
    ev = evaluate(inst, "density-weight", None, "all", limits, policy_settings)
    failure = _first_failure(ev.reports)
    if failure is not None:
        return False, f"{label}: density-weight {failure}"
    return True, None


def _semiclairvoyant_case(args: tuple) -> Outcome:
    seed, max_n, limits, policy_settings = args
    base = _random(
        seed,
        max_n,
        Fraction(1),
        anchor="true",
        mode="exact",
        proc_range=(1, 16),
        proc_denominator=4,
    )
    inst = semiclairvoyant_transform(base.jobs, Fraction(2))
    checks = ["no_violations", "bin_structure"]
    ev = evaluate(inst, "two-bins", None, checks, limits, policy_settings)
    if ev.ratio > 4:
        return False, f"seed {seed}: ratio {format_rat(ev.ratio)} > 4"
    reports = ev.reports + [check_pending_bound(ev.result, ev.reference.series, Fraction(4))]
    failure = _first_failure(reports)
    if failure is not None:
        return False, f"seed {seed}: {failure}"
    return True, None


def _mutation_case(args: tuple) -> Outcome:
    seed, max_n, limits = args
    inst = _random(seed, max_n, Fraction(2))
    ev = evaluate(
        inst,
        "two-bins",
        None,
        ["no_violations", "bin_structure", "covered_volume"],
        limits,
        {"two-bins": {"rotate": False}},
    )
    failure = _first_failure(ev.reports)
    return failure is not None, failure


def _map(func: Callable, items: list, nproc: int) -> list:
    if nproc <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunk = max(1, len(items) // (4 * nproc))
    with ProcessPoolExecutor(max_workers=nproc) as executor:
        return list(executor.map(func, items, chunksize=chunk))


def _batch(outcomes: Iterable[Outcome]) -> Outcome:
    for ok, detail in outcomes:
        if not ok:
            return False, detail
    return True, None


@replies
def cmd_verify(
    *,
    only: Optional[str] = None,
    jobs: Optional[int] = None,
    mutate: bool = False,
    out: Optional[str] = None,
    appdir: Optional[str] = None,
    **_: dict,
) -> Reply:
    """
    Run the acceptance suite, or the comma separated subset given in ``only``.

    With ``mutate``, the rotation step of the two-bins policy is switched off in
    every criterion, which has to make the suite fail.

    Examples
    --------

    >>> flowsched verify --only unweighted
    Success: 1 of 1 criteria passed
      [2-4] unweighted       pass  2000 instances  (41.2 s)

    """
    log = logging.getLogger(f"{__name__}.cmd_verify")
    settings = get_settings(appdir)
    outdir = resolve_outdir(out, settings)
    vs = settings.verify
    limits: OracleLimits = settings.oracle
    nproc = worker_count(jobs)
    policy_settings: dict[str, dict[str, Any]] = {
        k: dict(v) for k, v in settings.policies.items()
    }
    if mutate:
        policy_settings.setdefault("two-bins", {})["rotate"] = False
        policy_settings.setdefault("superbins", {})["rotate"] = False

    selected = CRITERIA if only is None else only.split(",")
    for name in selected:
        if name not in CRITERIA:
            return Reply(
                success=False,
                msg=f"unknown criterion {name!r}, choose from {CRITERIA}",
                code=2,
            )

    rows = []
    timings = {}
    for name in CRITERIA:
        if name not in selected:
            continue
        log.info("running criterion %s (%s)", NUMBERS[name], name)
        t0 = time.perf_counter()
        if name == "duality":
            items = [(s, vs.max_n, policy_settings) for s in range(vs.duality_instances)]
            ok, detail = _batch(_map(_duality_case, items, nproc))
        elif name == "unweighted":
            items = [
                (mu, s, vs.max_n, limits, policy_settings)
                for mu in MUS
                for s in range(vs.unweighted_instances)
            ]
            ok, detail = _batch(_map(_unweighted_case, items, nproc))
        elif name == "weighted":
            micro = list(enumerate_micro(max_n=vs.micro_max_n))
            seeded = [
                _random(
                    s,
                    limits.max_jobs,
                    MUS[s % 3],
                    anchor="true",
                    weights=[1, 2, 3, 4, 8],
                    proc_range=(1, limits.max_volume // limits.max_jobs),
                    release_denominator=1,
                    release_window=4,
                )
                for s in range(vs.weighted_instances)
            ]
            items = [(inst, limits, policy_settings) for inst in micro + seeded]
            ok, detail = _batch(_map(_weighted_case, items, nproc))
        elif name == "adversary":
            mu = Fraction(3, 2)
            cfg = AdversaryConfig(mu=mu, phases=8, bombardment_count=vs.adversary_bombardment)
            outcome = run_adversary(cfg, PredictedSRPT(mu=mu))
            replay = simulate(outcome.instance, PredictedSRPT(mu=mu)).flow_unweighted
            items = [cfg]
            ok, detail = True, f"ratio {io.to_decimal(outcome.ratio, 6)}"
            if outcome.ratio < Fraction(17, 10):
                ok, detail = False, f"ratio {format_rat(outcome.ratio)} < 17/10"
            elif replay != outcome.victim_flow:
                ok, detail = False, (
                    f"replayed flow {format_rat(replay)} differs from "
                    f"adaptive flow {format_rat(outcome.victim_flow)}"
                )
        elif name == "semiclairvoyant":
            items = [
                (s, vs.max_n, limits, policy_settings)
                for s in range(vs.semiclairvoyant_instances)
            ]
            ok, detail = _batch(_map(_semiclairvoyant_case, items, nproc))
        else:
            items = [(s, vs.max_n, limits) for s in range(vs.mutation_instances)]
            caught = [d for hit, d in _map(_mutation_case, items, nproc) if hit]
            ok = len(caught) > 0
            detail = caught[0] if ok else "no checker noticed the disabled rotation"
        timings[name] = time.perf_counter() - t0
        status = "pass" if ok else "fail"
        if not ok:
            log.error("criterion %s (%s) failed: %s", NUMBERS[name], name, detail)
        rows.append(
            dict(
                criterion=NUMBERS[name],
                name=name,
                status=status,
                instances=str(len(items)),
                detail=detail or "",
            )
        )

    io.write_rows(rows, VERIFY_HEADER, outdir / "verify.csv")
    passed = sum(row["status"] == "pass" for row in rows)
    table = "\n".join(
        f"  [{row['criterion']}] {row['name']:<16} {row['status']}  "
        f"{row['instances']} instances  ({timings[row['name']]:.1f} s)"
        for row in rows
    )
    msg = f"{passed} of {len(rows)} criteria passed\n{table}"
    if passed < len(rows):
        return Reply(success=False, msg=msg, data=rows, code=3)
    return Reply(success=True, msg=msg, data=rows)
