"""
**flowsched.oracles**: reference schedules
------------------------------------------

- :func:`srpt`: clairvoyant SRPT, optimal for unweighted flow time,
- :func:`srpt_on_predictions`: SRPT keyed on predictions, the naive baseline,
- :func:`optimal_weighted_small`: exhaustive optimum of the weighted flow time for
  tiny instances with integer data,
- :func:`lower_bound_flow`: ``Σ w_q p_q``, a bound valid for every schedule,
- :func:`reference`: the best reference available for an instance.

The optimal schedules are returned as :class:`OptSeries`, the step functions
``δ*(t)``, ``W*(t)`` and ``V*(t)`` together with the optimal value.

"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, NamedTuple, Optional
import functools
import logging
import sys

from flowsched.core import fingerprint
from flowsched.engine import SimResult, StepSeries, simulate
from flowsched.errors import NonIntegerData, OracleMismatch, TooLarge, WeightedInstance
from flowsched.models import Instance, OracleLimits, format_rat
from flowsched.policy import srpt as srpt_policy

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class OptSeries(StepSeries):
    value: Fraction = Fraction(0)
    fingerprint: Optional[str] = None


class Reference(NamedTuple):
    kind: Literal["srpt", "exact", "lower-bound"]
    value: Fraction
    series: Optional[OptSeries]


def _series_from_result(result: SimResult) -> OptSeries:
    steps = result.series()
    return OptSeries(
        times=steps.times,
        count=steps.count,
        weight=steps.weight,
        volume=steps.volume,
        value=result.flow_weighted,
        fingerprint=result.fingerprint,
    )


def srpt(inst: Instance) -> tuple[SimResult, OptSeries]:
    """Runs clairvoyant SRPT on an unweighted instance."""
    if not inst.unweighted:
        raise WeightedInstance("the SRPT oracle is only optimal for unit weights")
    policy = srpt_policy.PolicyInterface(
        mu=inst.mu, true_procs={job.id: job.true_proc for job in inst.jobs}
    )
    result = simulate(inst, policy)
    return result, _series_from_result(result)


def srpt_on_predictions(inst: Instance) -> SimResult:
    if not inst.unweighted:
        raise WeightedInstance("SRPT on predictions is an unweighted policy")
    return simulate(inst, srpt_policy.PredictedSRPT(mu=inst.mu))


def lower_bound_flow(inst: Instance) -> Fraction:
    return sum((job.weight * job.true_proc for job in inst.jobs), Fraction(0))


def _solve_grid(inst: Instance, scale: int) -> OptSeries:
    """Exhaustive search over slots of length ``1/scale``; returns the optimal series."""
    n = inst.n
    rel = tuple(int(job.release * scale) for job in inst.jobs)
    size = tuple(int(job.true_proc * scale) for job in inst.jobs)
    wgt = tuple(job.weight for job in inst.jobs)

    @functools.cache
    def best(t: int, rem: tuple[int, ...]) -> tuple[Fraction, Optional[int], int]:
        # returns (cost, job to process or None when idle, next slot time)
        left = [k for k in range(n) if rem[k] > 0]
        if len(left) == 0:
            return Fraction(0), None, t
        pending = [k for k in left if rel[k] <= t]
        if len(pending) == 0:
            t_next = min(rel[k] for k in left)
            return best(t_next, rem)[0], None, t_next
        slot = sum((wgt[k] for k in pending), Fraction(0))
        choice = None
        cost = None
        for k in pending:
            nxt = rem[:k] + (rem[k] - 1,) + rem[k + 1 :]
            c = slot + best(t + 1, nxt)[0]
            if cost is None or c < cost:
                cost, choice = c, k
        return cost, choice, t + 1

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * (sum(size) + max(rel, default=0)) + 1000))
    try:
        value = best(0, size)[0]
        series = OptSeries(value=value / scale, fingerprint=fingerprint(inst))
        t, rem = 0, size
        while True:
            pending = [k for k in range(n) if rem[k] > 0 and rel[k] <= t]
            series.append(
                Fraction(t, scale),
                len(pending),
                sum((wgt[k] for k in pending), Fraction(0)),
                Fraction(sum(rem[k] for k in pending), scale),
            )
            _, choice, t_next = best(t, rem)
            if choice is None and t_next == t:
                break
            if choice is not None:
                rem = rem[:choice] + (rem[choice] - 1,) + rem[choice + 1 :]
            t = t_next
    finally:
        sys.setrecursionlimit(limit)
        best.cache_clear()
    return series


def optimal_weighted_small(
    inst: Instance, limits: OracleLimits = OracleLimits()
) -> tuple[Fraction, OptSeries]:
    """
    Exact minimum weighted flow time over all preemptive schedules.

    Requires integer release and true processing times, at most
    ``limits.max_jobs`` jobs and a total volume of at most ``limits.max_volume``.
    Preemptions at integer times suffice for integer data; for instances with a
    total volume up to ``limits.half_grid_volume`` this is cross-checked against a
    half-unit grid.
    """
    log = logging.getLogger(f"{__name__}.optimal_weighted_small")
    volume = sum((job.true_proc for job in inst.jobs), Fraction(0))
    if inst.n > limits.max_jobs or volume > limits.max_volume:
        raise TooLarge(
            f"instance with {inst.n} jobs and volume {format_rat(volume)} exceeds "
            f"the oracle limits ({limits.max_jobs} jobs, volume {limits.max_volume})"
        )
    for job in inst.jobs:
        if job.release.denominator != 1 or job.true_proc.denominator != 1:
            raise NonIntegerData(f"job {job.id} has a non-integer release or processing time")
    series = _solve_grid(inst, 1)
    if volume <= limits.half_grid_volume:
        fine = _solve_grid(inst, 2)
        if fine.value != series.value:
            raise OracleMismatch(
                f"half-unit grid optimum {format_rat(fine.value)} differs from "
                f"unit grid optimum {format_rat(series.value)}"
            )
        log.debug("half-unit grid agrees on %s", format_rat(series.value))
    return series.value, series


def reference(inst: Instance, limits: OracleLimits = OracleLimits()) -> Reference:
    """
    SRPT for unit weights, the exhaustive optimum for tiny weighted instances with
    integer data, and :func:`lower_bound_flow` otherwise.
    """
    if inst.unweighted:
        _, series = srpt(inst)
        return Reference("srpt", series.value, series)
    try:
        value, series = optimal_weighted_small(inst, limits)
    except (TooLarge, NonIntegerData) as e:
        logger.debug("no exact weighted optimum: %s", e)
        return Reference("lower-bound", lower_bound_flow(inst), None)
    return Reference("exact", value, series)
