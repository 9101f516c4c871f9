"""
**flowsched.policy.srpt**: shortest-remaining-time policies
-----------------------------------------------------------

- :class:`PolicyInterface`: clairvoyant SRPT. It is handed the true processing
  times when constructed, and is the optimal schedule for unweighted flow time.
- :class:`PredictedSRPT`: SRPT keyed on ``max(p̃ − elapsed, 0)``; a legal
  non-clairvoyant policy and the victim of the lower-bound adversary.
- :class:`ScriptedPolicy`: a clairvoyant rank-then-SRPT rule used to replay the
  reference schedule of the adversary construction.

All ties are broken by earliest release, then lowest id.

"""

from fractions import Fraction
from typing import Optional
import logging

from flowsched.errors import DuplicateRelease, UnknownJob
from flowsched.models import JobView
from flowsched.policyinterface_1_0 import ModelInterface, in_pending

logger = logging.getLogger(__name__)


class PolicyInterface(ModelInterface):
    name = "srpt"
    weighted = False
    clairvoyant = True

    def __init__(
        self,
        mu: Fraction = Fraction(1),
        true_procs: Optional[dict[int, Fraction]] = None,
        **settings,
    ):
        super().__init__(mu, **settings)
        self.true_procs = {} if true_procs is None else dict(true_procs)
        self.left: dict[int, Fraction] = {}

    def initial_key(self, job: JobView) -> Fraction:
        if job.id not in self.true_procs:
            raise UnknownJob(f"{self.name}: true processing time of job {job.id} not given")
        return Fraction(self.true_procs[job.id])

    def priority(self, job_id: int) -> tuple:
        job = self.pending[job_id]
        return (self.left[job_id], job.release, job_id)

    def on_release(self, job: JobView, now: Fraction):
        if job.id in self.pending:
            raise DuplicateRelease(f"job {job.id} is already pending")
        self.admit(job)
        self.left[job.id] = self.initial_key(job)

    @in_pending
    def on_complete(self, job_id: int, now: Fraction):
        del self.left[job_id]
        del self.pending[job_id]

    @in_pending
    def on_progress(self, job_id: int, now: Fraction, amount: Fraction):
        self.left[job_id] = max(self.left[job_id] - amount, Fraction(0))

    def select(self, now: Fraction) -> Optional[int]:
        if len(self.pending) == 0:
            return None
        return min(self.pending, key=self.priority)

    def snapshot(self, now: Fraction) -> tuple[tuple[int, Fraction], ...]:
        return tuple((jid, self.left[jid]) for jid in sorted(self.left))


class PredictedSRPT(PolicyInterface):
    """SRPT on predictions; a job whose prediction has elapsed keeps key 0 until done."""

    name = "srpt-pred"
    clairvoyant = False

    def initial_key(self, job: JobView) -> Fraction:
        return job.pred_proc


class ScriptedPolicy(PolicyInterface):
    """
    Processes the pending job of lowest rank, then shortest true remaining time.
    Jobs without a rank are ranked last.
    """

    name = "scripted"
    weighted = True

    def __init__(
        self,
        mu: Fraction = Fraction(1),
        true_procs: Optional[dict[int, Fraction]] = None,
        ranks: Optional[dict[int, int]] = None,
        **settings,
    ):
        super().__init__(mu, true_procs=true_procs, **settings)
        self.ranks = {} if ranks is None else dict(ranks)
        self.fallback = max(self.ranks.values(), default=0) + 1

    def priority(self, job_id: int) -> tuple:
        return (self.ranks.get(job_id, self.fallback),) + super().priority(job_id)
