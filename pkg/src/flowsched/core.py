"""
**flowsched.core**: exact arithmetic and the job/instance data model
--------------------------------------------------------------------

Includes the validating constructor of :class:`~flowsched.models.Instance`:

- :func:`make_instance` to build an instance and check the one-sided distortion
  ``p̃ ≤ p < μ·p̃``,
- :func:`instance_stats` to compute the ratios ``P``, ``W`` and ``D``,
- :func:`round_weights` to round weights up to powers of a base,

and the class helpers shared by the policies:

- :func:`floor_log` returning the unique ``k`` with ``base**k ≤ value < base**(k+1)``,
- :func:`ceil_to_power` returning the least power of ``base`` not below ``value``.

Both helpers only compare exact rationals; no floating point is involved.

"""

from fractions import Fraction
from typing import Iterable, Union
import hashlib
import logging

from flowsched.models import Job, Instance, InstanceStats, format_rat
from flowsched.errors import (
    DuplicateId,
    NonPositiveField,
    DistortionViolated,
    EmptyInstance,
    InvalidBase,
)

logger = logging.getLogger(__name__)

Number = Union[int, Fraction]


def floor_log(value: Number, base: Number) -> int:
    """
    Returns the unique integer ``k`` such that ``base**k ≤ value < base**(k+1)``.

    The exponent is bracketed by a galloping search followed by bisection, using
    exact rational powers for every comparison.

    Examples
    --------
    >>> floor_log(8, 2)
    3
    >>> floor_log(Fraction(1, 4), 2)
    -2

    """
    value = Fraction(value)
    base = Fraction(base)
    if base <= 1:
        raise InvalidBase(f"base must be larger than 1, got {format_rat(base)}")
    if value <= 0:
        raise NonPositiveField(f"value must be positive, got {format_rat(value)}")
    if value >= 1:
        lo, hi = 0, 1
        while base**hi <= value:
            lo, hi = hi, hi * 2
    else:
        lo, hi = -1, 0
        while base**lo > value:
            lo, hi = lo * 2, lo
    # base**lo <= value < base**hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if base**mid <= value:
            lo = mid
        else:
            hi = mid
    return lo


def ceil_to_power(value: Number, base: Number) -> tuple[int, Fraction]:
    """Returns ``(k, base**k)`` for the least power of ``base`` that is ``≥ value``."""
    k = floor_log(value, base)
    rounded = Fraction(base) ** k
    if rounded == value:
        return k, rounded
    return k + 1, rounded * Fraction(base)


def within_distortion(true_proc: Fraction, pred_proc: Fraction, mu: Fraction) -> bool:
    """
    One-sided distortion test ``p̃ ≤ p < μ·p̃``. The upper side is strict, except that
    perfect predictions ``p = p̃`` are always accepted (this covers ``μ = 1``).
    """
    if true_proc == pred_proc:
        return True
    return pred_proc <= true_proc < mu * pred_proc


def make_instance(jobs: Iterable[Job], mu: Number) -> Instance:
    """
    Validates ``jobs`` and returns an :class:`Instance` with jobs sorted by
    ``(release, id)``.

    Raises :class:`DuplicateId`, :class:`NonPositiveField` or
    :class:`DistortionViolated` (carrying the offending job id).
    """
    mu = Fraction(mu)
    if mu < 1:
        raise NonPositiveField(f"distortion mu must be at least 1, got {format_rat(mu)}")
    jobs = list(jobs)
    seen = set()
    for job in jobs:
        if job.id in seen:
            raise DuplicateId(f"job id {job.id} is used more than once")
        seen.add(job.id)
        if job.true_proc <= 0 or job.pred_proc <= 0 or job.weight <= 0:
            raise NonPositiveField(
                f"job {job.id} must have positive processing times and weight"
            )
        if job.release < 0:
            raise NonPositiveField(f"job {job.id} has a negative release time")
        if not within_distortion(job.true_proc, job.pred_proc, mu):
            raise DistortionViolated(
                job.id,
                f"job {job.id}: {format_rat(job.pred_proc)} <= "
                f"{format_rat(job.true_proc)} < {format_rat(mu)} * "
                f"{format_rat(job.pred_proc)} does not hold",
            )
    jobs.sort(key=lambda job: (job.release, job.id))
    return Instance(jobs=tuple(jobs), mu=mu)


def _ratio(values: list[Fraction]) -> Fraction:
    return max(values) / min(values)


def instance_stats(inst: Instance) -> InstanceStats:
    """Computes the exact ratios ``P``, ``W`` and ``D`` over the true job data."""
    if inst.n == 0:
        raise EmptyInstance("statistics of an empty instance are undefined")
    return InstanceStats(
        ratio_P=_ratio([job.true_proc for job in inst.jobs]),
        ratio_W=_ratio([job.weight for job in inst.jobs]),
        ratio_D=_ratio([job.weight / job.true_proc for job in inst.jobs]),
        n=inst.n,
    )


def round_weights(inst: Instance, base: Number = 2) -> Instance:
    """Returns a copy of ``inst`` with every weight rounded up to a power of ``base``."""
    jobs = [
        job.model_copy(update=dict(weight=ceil_to_power(job.weight, base)[1]))
        for job in inst.jobs
    ]
    return Instance(jobs=tuple(jobs), mu=inst.mu)


def fingerprint(inst: Instance) -> str:
    """SHA-256 over the canonical text of the instance, shortened to 16 hex digits."""
    h = hashlib.sha256(format_rat(inst.mu, always_den=True).encode())
    for job in inst.jobs:
        fields = [job.release, job.pred_proc, job.true_proc, job.weight]
        line = " ".join([str(job.id)] + [format_rat(f) for f in fields])
        h.update(b"\n" + line.encode())
    return h.hexdigest()[:16]
