"""
**flowsched.analysis**: invariant checkers and competitive ratios
-----------------------------------------------------------------

Snapshot checkers (:func:`check_no_violations`, :func:`check_bin_structure`,
:func:`check_partial_uniqueness`, :func:`check_density_choice`) inspect one policy
snapshot; wrap them in a :class:`SnapshotMonitor` to run them after every event of a
simulation.

Series checkers compare a finished run with an optimal :class:`~flowsched.oracles.OptSeries`
at the union of both event time sets, where both sides are piecewise constant.

"""

from bisect import bisect_right
from collections import defaultdict
from fractions import Fraction
from typing import Any, Callable, Iterator, Optional
import math
import logging

from flowsched.engine import SimResult, Simulator
from flowsched.errors import SeriesMismatch, WrongPolicyKind, ZeroOpt
from flowsched.models import CheckReport, format_rat
from flowsched.oracles import OptSeries
from flowsched.policy.density_weight import DensitySnapshot

logger = logging.getLogger(__name__)

SnapshotCheck = Callable[..., CheckReport]


def _bin_pairs(snapshot: Any, checker: str):
    if not hasattr(snapshot, "bin_pairs"):
        raise WrongPolicyKind(f"{checker} needs a two-bins or superbins snapshot")
    return snapshot.bin_pairs()


def _label(cls: Optional[int]) -> str:
    return "" if cls is None else f"superbin {cls}: "


def check_no_violations(snapshot: Any, event_index: int = 0) -> CheckReport:
    """
    Scans every full bin for a pair with ``prio(q₁) > prio(q₂)``,
    ``μ·p̃(q₂) ≤ p̃(q₁)`` and ``p̃(q₂) < p̃(q₁)``. A job violates some lower-priority
    job iff it violates the one with the smallest prediction, so one pass in
    priority order suffices.
    """
    report = CheckReport(checker="no_violations")
    for cls, pair in _bin_pairs(snapshot, report.checker):
        low = None
        for high in sorted(pair.F, key=lambda e: e.prio):
            if (
                low is not None
                and low.pred_proc < high.pred_proc
                and pair.mu * low.pred_proc <= high.pred_proc
            ):
                report.fail(
                    event_index,
                    f"{_label(cls)}job {high.job_id} (prio {high.prio}, "
                    f"p̃={format_rat(high.pred_proc)}) violates job {low.job_id} "
                    f"(prio {low.prio}, p̃={format_rat(low.pred_proc)})",
                )
                return report
            if low is None or high.pred_proc < low.pred_proc:
                low = high
    return report


def check_bin_structure(snapshot: Any, event_index: int = 0) -> CheckReport:
    """Priorities are a bijection onto ``1..δ`` in both bins, and ``δ_F ≤ δ_P``."""
    report = CheckReport(checker="bin_structure")
    seen = set()
    for cls, pair in _bin_pairs(snapshot, report.checker):
        for name, entries in (("F", pair.F), ("P", pair.P)):
            prios = [e.prio for e in entries]
            if prios != list(range(1, len(entries) + 1)):
                report.fail(event_index, f"{_label(cls)}bin {name} priorities {prios}")
            for e in entries:
                if e.job_id in seen:
                    report.fail(event_index, f"job {e.job_id} is held twice")
                seen.add(e.job_id)
        if len(pair.F) > len(pair.P):
            report.fail(
                event_index,
                f"{_label(cls)}full bin holds {len(pair.F)} jobs, partial bin {len(pair.P)}",
            )
    return report


def _density(snapshot: Any, checker: str) -> DensitySnapshot:
    if not isinstance(snapshot, DensitySnapshot):
        raise WrongPolicyKind(f"{checker} needs a density-weight snapshot")
    return snapshot


def check_partial_uniqueness(snapshot: Any, event_index: int = 0) -> CheckReport:
    report = CheckReport(checker="partial_uniqueness")
    cells = defaultdict(list)
    for c in _density(snapshot, report.checker).jobs:
        if c.partial:
            cells[(c.wclass, c.eclass)].append(c.job_id)
    for cell, jobs in sorted(cells.items()):
        if len(jobs) > 1:
            report.fail(event_index, f"cell {cell} holds partial jobs {jobs}")
    return report


def check_density_choice(snapshot: Any, event_index: int = 0) -> CheckReport:
    """
    The last selection ``(i, j, i')`` used the largest weight class ``i``, the
    smallest density class ``j`` reaching ``λ**i`` and the largest weight class
    ``i'`` within ``j``.
    """
    report = CheckReport(checker="density_choice")
    snap = _density(snapshot, report.checker)
    if snap.choice is None or len(snap.jobs) == 0:
        return report
    i, j, i2 = snap.choice
    weights = defaultdict(Fraction)
    for c in snap.jobs:
        weights[c.eclass] += c.rounded_weight
    threshold = snap.lam**i
    if i != max(c.wclass for c in snap.jobs):
        report.fail(event_index, f"weight class {i} is not the largest pending")
    elif weights[j] < threshold:
        report.fail(event_index, f"density class {j} misses the threshold")
    elif any(w >= threshold for e, w in weights.items() if e < j):
        report.fail(event_index, f"a density class below {j} reaches the threshold")
    elif i2 != max(c.wclass for c in snap.jobs if c.eclass == j):
        report.fail(event_index, f"weight class {i2} is not the largest in density class {j}")
    return report


class SnapshotMonitor:
    """
    Engine checker hook running a snapshot checker after every event. The
    accumulated :class:`CheckReport` keeps the first failure and the extremes.
    """

    def __init__(self, check: SnapshotCheck, name: Optional[str] = None):
        self.check = check
        self.report = CheckReport(checker=name or check.__name__.removeprefix("check_"))

    def __call__(self, event_index: int, now: Fraction, snapshot: Any, sim: Simulator):
        rep = self.check(snapshot, event_index)
        for key, value in rep.extremes.items():
            self.report.record_max(key, value)
        if not rep.passed:
            msg = f"t={format_rat(now)}: {rep.first_failure.message}"
            if self.report.passed:
                logger.error("%s failed at event %d, %s", self.report.checker, event_index, msg)
            self.report.fail(event_index, msg)


def _match(result: SimResult, series: OptSeries):
    if (
        result.fingerprint is not None
        and series.fingerprint is not None
        and result.fingerprint != series.fingerprint
    ):
        raise SeriesMismatch(
            f"run of instance {result.fingerprint} compared with series of "
            f"instance {series.fingerprint}"
        )


def _union_times(*time_lists: list[Fraction]) -> list[Fraction]:
    return sorted(set().union(*time_lists))


def _snapshots_at_union(
    result: SimResult, series: OptSeries, checker: str
) -> Iterator[tuple[int, Fraction, Any]]:
    """Yields ``(event_index, t, snapshot in force at t)`` at the union of event times."""
    _match(result, series)
    if len(result.snapshots) == 0 and len(result.trace) > 0:
        raise WrongPolicyKind(f"{checker} needs a run recorded with snapshots")
    last = {}
    for index, t, snap in result.snapshots:
        last[t] = (index, snap)
    own = sorted(last)
    for t in _union_times(own, series.times):
        k = bisect_right(own, t) - 1
        if k < 0:
            continue
        index, snap = last[own[k]]
        yield index, t, snap


def _check_coverage(
    result: SimResult, series: OptSeries, mu: Fraction, weighted: bool
) -> CheckReport:
    name = "covered_volume_weighted" if weighted else "covered_volume_unweighted"
    report = CheckReport(checker=name, instance_id=result.fingerprint)
    theta = math.ceil(Fraction(mu) ** 2)
    for index, t, snap in _snapshots_at_union(result, series, name):
        count, weight, _ = series.at(t)
        opt = weight if weighted else Fraction(count)
        worst = Fraction(0)
        for _, pair in _bin_pairs(snap, name):
            for entries in (pair.F, pair.P):
                if weighted:
                    base = sum((e.weight for e in entries), Fraction(0))
                else:
                    base = Fraction(len(entries))
                worst = max(worst, base)
        if worst == 0:
            continue
        if opt == 0:
            report.fail(index, f"t={format_rat(t)}: jobs pending but none in the optimum")
            continue
        ratio = worst / (theta * opt)
        report.record_max("max_ratio", ratio)
        if ratio > 1:
            report.fail(
                index,
                f"t={format_rat(t)}: base {format_rat(worst)} exceeds "
                f"{theta} * {format_rat(opt)}",
            )
    return report


def check_covered_volume_unweighted(
    result: SimResult, series: OptSeries, mu: Fraction
) -> CheckReport:
    """
    Every pending job is covered by the bar ``⌈μ²⌉·δ*(t)``: its count of jobs at or
    below its priority within its bin is at most ``⌈μ²⌉·δ*(t)``. The largest such
    count of a bin is its size.
    """
    return _check_coverage(result, series, mu, weighted=False)


def check_covered_volume_weighted(
    result: SimResult, series: OptSeries, mu: Fraction
) -> CheckReport:
    """
    The weighted form: cumulative rounded weight at or below a job's priority is at
    most ``⌈μ²⌉·W*(t)``. ``series`` has to be the optimum of the rounded-weight
    instance the superbins policy works on.
    """
    return _check_coverage(result, series, mu, weighted=True)


def _local_ratios(
    result: SimResult, series: OptSeries, weighted: bool
) -> Iterator[tuple[int, Fraction, Fraction, Fraction]]:
    _match(result, series)
    own = result.series()
    for index, t in enumerate(_union_times(own.times, series.times)):
        count, weight, _ = own.at(t)
        ocount, oweight, _ = series.at(t)
        if weighted:
            yield index, t, weight, oweight
        else:
            yield index, t, Fraction(count), Fraction(ocount)


def check_pending_bound(
    result: SimResult, series: OptSeries, factor: Fraction, weighted: bool = False
) -> CheckReport:
    """``δ(t) ≤ factor·δ*(t)`` (or ``W(t) ≤ factor·W*(t)``) at every event time."""
    report = CheckReport(
        checker="pending_weight_bound" if weighted else "pending_count_bound",
        instance_id=result.fingerprint,
    )
    for index, t, value, opt in _local_ratios(result, series, weighted):
        if value == 0:
            continue
        if opt == 0:
            report.fail(index, f"t={format_rat(t)}: pending {format_rat(value)} against 0")
            continue
        report.record_max("max_ratio", value / opt)
        if value > factor * opt:
            report.fail(
                index,
                f"t={format_rat(t)}: {format_rat(value)} > "
                f"{format_rat(factor)} * {format_rat(opt)}",
            )
    return report


def local_ratio(
    result: SimResult, series: OptSeries, weighted: bool = False
) -> Optional[Fraction]:
    """The measured ``max_t W(t)/W*(t)`` (or ``δ(t)/δ*(t)``) over times with ``W*(t) > 0``."""
    ratios = [v / o for _, _, v, o in _local_ratios(result, series, weighted) if o > 0]
    return max(ratios, default=None)


def competitive_report(result_alg: SimResult, opt_value: Fraction) -> Fraction:
    """The exact ratio ``F^ALG / F^OPT``; ``0/0`` counts as 1."""
    alg = result_alg.flow_weighted
    if opt_value == 0:
        if alg == 0:
            return Fraction(1)
        raise ZeroOpt(f"optimum is 0 while the policy has flow {format_rat(alg)}")
    return alg / Fraction(opt_value)
