"""
**flowsched.policy.superbins**: the weighted superbin policy
------------------------------------------------------------

Weights are rounded up to powers of two. Jobs of rounded weight ``2**i`` are
scheduled by their own :class:`~flowsched.policy.two_bins.BinPair`, the superbin
``A^i``. The superbin with the heaviest partial bin is processed; on a tie the
higher class index wins.

"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional
import logging

from flowsched.core import ceil_to_power
from flowsched.errors import DuplicateRelease
from flowsched.models import JobView
from flowsched.policyinterface_1_0 import ModelInterface, in_pending
from flowsched.policy.two_bins import BinPair, BinSnapshot

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SuperbinSnapshot:
    bins: tuple[tuple[int, BinSnapshot], ...]
    mu: Fraction

    def bin_pairs(self) -> Iterator[tuple[Optional[int], BinSnapshot]]:
        yield from self.bins


class PolicyInterface(ModelInterface):
    name = "superbins"

    def __init__(self, mu: Fraction = Fraction(1), rotate: bool = True, **settings):
        super().__init__(mu, **settings)
        self.rotate = rotate
        self.superbins: dict[int, BinPair] = {}
        self.owner: dict[int, int] = {}

    def on_release(self, job: JobView, now: Fraction):
        if job.id in self.pending:
            raise DuplicateRelease(f"job {job.id} is already pending")
        self.admit(job)
        i, rounded = ceil_to_power(job.weight, 2)
        if i not in self.superbins:
            logger.debug("opening superbin %d at %s", i, now)
            self.superbins[i] = BinPair(self.mu, rotate=self.rotate)
        self.owner[job.id] = i
        self.notes.extend(
            self.superbins[i].insert(job.model_copy(update=dict(weight=rounded)))
        )

    @in_pending
    def on_complete(self, job_id: int, now: Fraction):
        i = self.owner.pop(job_id)
        self.notes.extend(self.superbins[i].remove(job_id))
        if len(self.superbins[i]) == 0:
            del self.superbins[i]
        del self.pending[job_id]

    def select(self, now: Fraction) -> Optional[int]:
        if len(self.superbins) == 0:
            return None
        best = max(
            self.superbins,
            key=lambda i: (self.superbins[i].weight_P(), i),
        )
        return self.superbins[best].top()

    def snapshot(self, now: Fraction) -> SuperbinSnapshot:
        return SuperbinSnapshot(
            bins=tuple((i, self.superbins[i].snapshot()) for i in sorted(self.superbins)),
            mu=self.mu,
        )
