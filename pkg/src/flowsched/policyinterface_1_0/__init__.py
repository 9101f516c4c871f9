from abc import ABCMeta, abstractmethod
from fractions import Fraction
from functools import wraps
from typing import Any, Optional
import logging

from flowsched.models import JobView
from flowsched.errors import UnknownJob, WeightedInstance

logger = logging.getLogger(__name__)


def in_pending(func):
    """Rejects hook calls that refer to a job the policy does not hold."""

    @wraps(func)
    def wrapper(self, job_id: int, now: Fraction, *args, **kwargs):
        if job_id not in self.pending:
            raise UnknownJob(f"{self.name}: job {job_id} is not pending")
        return func(self, job_id, now, *args, **kwargs)

    return wrapper


class ModelInterface(metaclass=ABCMeta):
    """
    An abstract base class specifying the policy interface.

    Individual policy modules in :mod:`flowsched.policy` expose a class inheriting
    from this one. Only the methods of this class are used by the
    :class:`~flowsched.engine.Simulator` to interact with a policy.

    A policy only ever sees :class:`~flowsched.models.JobView` objects, i.e. the
    predicted processing time, release and weight of a job, never its true
    processing time. Completions are reported by the simulator.
    """

    version: str = "1.0"

    name: str = "policy"
    """The name under which the policy is registered in :mod:`flowsched.policies`."""

    weighted: bool = True
    """Whether the policy accepts jobs with weights other than 1."""

    mu: Fraction
    """The declared distortion bound the policy was set up with."""

    pending: dict[int, JobView]
    """The jobs released to the policy and not completed yet."""

    notes: list[tuple[str, int]]
    """``(kind, job_id)`` pairs of ``Transfer`` / ``Rotate`` steps since the last drain."""

    def __init__(self, mu: Fraction = Fraction(1), **settings: Any):
        self.mu = Fraction(mu)
        self.pending = {}
        self.notes = []
        if len(settings) > 0:
            logger.debug("%s: ignoring settings %s", self.name, sorted(settings))

    def admit(self, job: JobView):
        """Common release bookkeeping; called by :meth:`on_release` implementations."""
        if not self.weighted and job.weight != 1:
            raise WeightedInstance(
                f"{self.name} is an unweighted policy, job {job.id} has weight {job.weight}"
            )
        self.pending[job.id] = job

    @abstractmethod
    def on_release(self, job: JobView, now: Fraction):
        """Called by the simulator once for every job, at its release time."""
        pass

    @abstractmethod
    def on_complete(self, job_id: int, now: Fraction):
        """Called by the simulator when ``job_id`` has received its true processing time."""
        pass

    @abstractmethod
    def select(self, now: Fraction) -> Optional[int]:
        """Returns the pending job to process from ``now`` on, or ``None`` iff none is pending."""
        pass

    def on_progress(self, job_id: int, now: Fraction, amount: Fraction):
        """Processing notification: ``job_id`` was processed for ``amount`` until ``now``."""
        pass

    def rebalance(self, now: Fraction):
        """Called after all releases and completions at ``now`` have been delivered."""
        pass

    @abstractmethod
    def snapshot(self, now: Fraction) -> Any:
        """Returns an immutable view of the policy state for checkers."""
        pass

    def drain_notes(self) -> list[tuple[str, int]]:
        notes, self.notes = self.notes, []
        return notes
