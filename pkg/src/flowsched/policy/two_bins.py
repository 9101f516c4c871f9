"""
**flowsched.policy.two_bins**: the unweighted two-bin policy
------------------------------------------------------------

Pending jobs live in one of two bins: the full bin ``F`` (never processed) and
the partial bin ``P``. Each bin holds a priority order; the job at position ``k``
of a bin has priority ``k + 1``.

- On release, a job enters ``F`` with the top priority. All jobs ``q'`` of ``F``
  with ``μ·p̃(q') ≤ p̃(q)`` form a violation with the new job ``q``; the
  priorities of the violators and of ``q`` are rotated so that ``q`` takes the
  slot of the lowest violator and every violator moves up by one violation slot.
- Whenever ``δ_F > δ_P``, the top job of ``F`` moves to the top of ``P``.
- The top job of ``P`` is processed (LIFO in transfer order). A job completing at the
  instant of a release may have been covered by that release's transfer; it
  still leaves ``P`` from where it sits.

A violation needs ``p̃(q') < p̃(q)`` on top of ``μ·p̃(q') ≤ p̃(q)``, so jobs with
equal predictions never violate each other, also at ``μ = 1``.

The :class:`BinPair` is shared with :mod:`flowsched.policy.superbins`.

"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple, Optional
import logging

from flowsched.errors import (
    CompletedNonTop,
    DuplicateRelease,
    InternalInconsistency,
)
from flowsched.models import JobView
from flowsched.policyinterface_1_0 import ModelInterface, in_pending

logger = logging.getLogger(__name__)


class BinEntry(NamedTuple):
    job_id: int
    prio: int
    pred_proc: Fraction
    weight: Fraction


@dataclass(frozen=True, slots=True)
class BinSnapshot:
    """Both bins in ascending priority order."""

    F: tuple[BinEntry, ...]
    P: tuple[BinEntry, ...]
    mu: Fraction

    def bin_pairs(self) -> Iterator[tuple[Optional[int], "BinSnapshot"]]:
        yield None, self


class BinPair:
    """
    A full and a partial bin with the release, transfer and completion steps.

    Parameters
    ----------
    mu
        The declared distortion used in the violation test.
    rotate
        Apply the rotation on release. Switching it off breaks the no-violation
        invariant and is only used to check that the checkers notice.
    """

    def __init__(self, mu: Fraction, rotate: bool = True):
        self.mu = Fraction(mu)
        self.rotate = rotate
        self.F: list[JobView] = []
        self.P: list[JobView] = []
        self.served: Optional[int] = None

    def __len__(self) -> int:
        return len(self.F) + len(self.P)

    def violators(self, job: JobView) -> list[int]:
        """Positions in ``F`` of jobs forming a violation with a new top job ``job``."""
        return [
            k
            for k, other in enumerate(self.F)
            if other.id != job.id
            and other.pred_proc < job.pred_proc
            and self.mu * other.pred_proc <= job.pred_proc
        ]

    def insert(self, job: JobView) -> list[tuple[str, int]]:
        notes = []
        self.F.append(job)
        if self.rotate:
            slots = self.violators(job)
            if len(slots) > 0:
                occupants = [job] + [self.F[k] for k in slots]
                slots.append(len(self.F) - 1)
                for k, occupant in zip(slots, occupants):
                    self.F[k] = occupant
                logger.debug(
                    "job %d rotated below %d violators to priority %d",
                    job.id,
                    len(slots) - 1,
                    slots[0] + 1,
                )
                notes.append(("Rotate", job.id))
        notes.extend(self.transfer_if_heavy())
        return notes

    def transfer_if_heavy(self) -> list[tuple[str, int]]:
        notes = []
        while len(self.F) > len(self.P):
            job = self.F.pop()
            self.P.append(job)
            notes.append(("Transfer", job.id))
        return notes

    def remove(self, job_id: int) -> list[tuple[str, int]]:
        """
        Removes a completed job: the top of ``P``, or the job served last when
        transfers at the completion instant have covered it.
        """
        if len(self.P) > 0 and self.P[-1].id == job_id:
            self.P.pop()
        elif job_id == self.served and any(job.id == job_id for job in self.P):
            self.P = [job for job in self.P if job.id != job_id]
            logger.debug("job %d completed below the top of P", job_id)
        else:
            raise CompletedNonTop(f"job {job_id} completed but is not the top of P")
        if self.served == job_id:
            self.served = None
        return self.transfer_if_heavy()

    def top(self) -> Optional[int]:
        if len(self.P) == 0:
            if len(self.F) > 0:
                raise InternalInconsistency(
                    f"partial bin is empty while {len(self.F)} jobs are in the full bin"
                )
            return None
        self.served = self.P[-1].id
        return self.served

    def weight_P(self) -> Fraction:
        return sum((job.weight for job in self.P), Fraction(0))

    def snapshot(self) -> BinSnapshot:
        def entries(jobs: list[JobView]) -> tuple[BinEntry, ...]:
            return tuple(
                BinEntry(job.id, k + 1, job.pred_proc, job.weight)
                for k, job in enumerate(jobs)
            )

        return BinSnapshot(F=entries(self.F), P=entries(self.P), mu=self.mu)


class PolicyInterface(ModelInterface):
    name = "two-bins"
    weighted = False

    def __init__(self, mu: Fraction = Fraction(1), rotate: bool = True, **settings):
        super().__init__(mu, **settings)
        self.bins = BinPair(self.mu, rotate=rotate)

    def on_release(self, job: JobView, now: Fraction):
        if job.id in self.pending:
            raise DuplicateRelease(f"job {job.id} is already pending")
        self.admit(job)
        self.notes.extend(self.bins.insert(job))

    @in_pending
    def on_complete(self, job_id: int, now: Fraction):
        self.notes.extend(self.bins.remove(job_id))
        del self.pending[job_id]

    def select(self, now: Fraction) -> Optional[int]:
        return self.bins.top()

    def snapshot(self, now: Fraction) -> BinSnapshot:
        return self.bins.snapshot()
