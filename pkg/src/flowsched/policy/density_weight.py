"""
**flowsched.policy.density_weight**: the max-weight / min-density policy
------------------------------------------------------------------------

Weights are rounded up to powers of ``λ`` (by default ``λ = 16μ + 6``); the
exponent is the weight class. The estimated inverse density class of a job is
``⌊log₂(p̃ / rounded weight)⌋``. At every decision point, with ``i`` the largest
pending weight class,

1. ``j`` is the smallest density class whose total rounded weight is at least
   ``λ**i``,
2. ``i'`` is the largest weight class pending within density class ``j``,
3. the partial job of cell ``(i', j)`` is processed if there is one, otherwise
   the earliest released job of that cell (lowest id on ties).

The same rule serves the density-ratio variant: only the ``ratio_base`` of the
density classes can be changed.

"""

from collections import defaultdict
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Union
import logging

from flowsched.core import ceil_to_power, floor_log
from flowsched.errors import DuplicateRelease, InternalInconsistency, InvalidBase
from flowsched.models import JobView, format_rat
from flowsched.policyinterface_1_0 import ModelInterface, in_pending

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ClassifiedJob:
    job_id: int
    wclass: int
    eclass: int
    rounded_weight: Fraction
    release: Fraction
    partial: bool = False


@dataclass(frozen=True, slots=True)
class DensitySnapshot:
    jobs: tuple[ClassifiedJob, ...]
    lam: Fraction
    choice: Optional[tuple[int, int, int]] = None
    """The ``(i, j, i')`` triple of the last selection."""


def classify(
    job: JobView, lam: Union[int, Fraction], ratio_base: Union[int, Fraction] = 2
) -> ClassifiedJob:
    """
    Rounds the weight of ``job`` up to a power of ``lam`` and computes the weight
    and density classes.

    Examples
    --------
    >>> classify(JobView(id=0, release=0, pred_proc=3, weight=2), 38).eclass
    -4

    """
    lam = Fraction(lam)
    if lam <= 1:
        raise InvalidBase(f"lambda must be larger than 1, got {format_rat(lam)}")
    wclass, rounded = ceil_to_power(job.weight, lam)
    return ClassifiedJob(
        job_id=job.id,
        wclass=wclass,
        eclass=floor_log(job.pred_proc / rounded, ratio_base),
        rounded_weight=rounded,
        release=job.release,
    )


class PolicyInterface(ModelInterface):
    name = "density-weight"

    def __init__(
        self,
        mu: Fraction = Fraction(1),
        lam: Optional[Union[int, str, Fraction]] = None,
        ratio_base: Union[int, str, Fraction] = 2,
        **settings,
    ):
        super().__init__(mu, **settings)
        self.lam = 16 * self.mu + 6 if lam is None else Fraction(lam)
        self.ratio_base = Fraction(ratio_base)
        if self.lam <= 1:
            raise InvalidBase(f"lambda must be larger than 1, got {format_rat(self.lam)}")
        if self.ratio_base <= 1:
            raise InvalidBase(
                f"density ratio base must be larger than 1, got {format_rat(self.ratio_base)}"
            )
        self.table: dict[int, ClassifiedJob] = {}
        self.partial: set[int] = set()
        self.choice: Optional[tuple[int, int, int]] = None

    def on_release(self, job: JobView, now: Fraction):
        if job.id in self.pending:
            raise DuplicateRelease(f"job {job.id} is already pending")
        self.admit(job)
        self.table[job.id] = classify(job, self.lam, self.ratio_base)

    @in_pending
    def on_complete(self, job_id: int, now: Fraction):
        del self.table[job_id]
        del self.pending[job_id]
        self.partial.discard(job_id)

    @in_pending
    def on_progress(self, job_id: int, now: Fraction, amount: Fraction):
        if amount > 0:
            self.partial.add(job_id)

    def select(self, now: Fraction) -> Optional[int]:
        if len(self.table) == 0:
            self.choice = None
            return None
        i = max(c.wclass for c in self.table.values())
        weights = defaultdict(Fraction)
        for c in self.table.values():
            weights[c.eclass] += c.rounded_weight
        threshold = self.lam**i
        heavy = [e for e, w in weights.items() if w >= threshold]
        if len(heavy) == 0:
            raise InternalInconsistency(
                f"no density class reaches the weight threshold {format_rat(threshold)}"
            )
        j = min(heavy)
        i2 = max(c.wclass for c in self.table.values() if c.eclass == j)
        cell = [c for c in self.table.values() if c.wclass == i2 and c.eclass == j]
        partial = [c for c in cell if c.job_id in self.partial]
        if len(partial) > 0:
            cell = partial
        self.choice = (i, j, i2)
        return min(cell, key=lambda c: (c.release, c.job_id)).job_id

    def snapshot(self, now: Fraction) -> DensitySnapshot:
        return DensitySnapshot(
            jobs=tuple(
                replace(self.table[jid], partial=jid in self.partial)
                for jid in sorted(self.table)
            ),
            lam=self.lam,
            choice=self.choice,
        )
