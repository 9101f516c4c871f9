"""
**flowsched.engine**: event-driven simulation of a single preemptive machine
----------------------------------------------------------------------------

The :class:`Simulator` owns the true remaining volumes of all jobs and drives a
policy implementing :class:`~flowsched.policyinterface_1_0.ModelInterface`. Time
advances from event to event; at each event time the simulator

1. delivers all releases (in id order),
2. delivers all completions (in id order),
3. lets the policy rebalance (e.g. transfers between bins),
4. asks the policy which job to process,

and then invokes every checker hook. The machine is never idle while a job is
pending. Between events the selected job is processed at rate 1 until the next
release or its completion, whichever comes first.

Adaptive adversaries use the incremental API (:meth:`Simulator.add` with
``committed=False``, :meth:`Simulator.run` with ``until`` and
:meth:`Simulator.commit`); :func:`simulate` is the one-shot wrapper.

"""

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Literal, Optional
import heapq
import logging

from flowsched.core import fingerprint, within_distortion
from flowsched.errors import (
    DuplicateRelease,
    IncompleteRun,
    InternalInconsistency,
    PolicyIdleWhilePending,
    PolicySelectedUnknownJob,
    UnknownJob,
)
from flowsched.models import Instance, Job, format_rat
from flowsched.policyinterface_1_0 import ModelInterface

logger = logging.getLogger(__name__)

Kind = Literal["Release", "Complete", "Preempt", "Resume", "Transfer", "Rotate", "Commit"]
Checker = Callable[[int, Fraction, Any, "Simulator"], None]


@dataclass(frozen=True, slots=True)
class TraceRecord:
    time: Fraction
    kind: Kind
    job_id: int
    pending_count: int
    pending_weight: Fraction
    pending_volume: Fraction


@dataclass(slots=True)
class StepSeries:
    """
    Right-continuous step functions of the pending count, weight and volume, with
    one breakpoint per distinct event time.
    """

    times: list[Fraction] = field(default_factory=list)
    count: list[int] = field(default_factory=list)
    weight: list[Fraction] = field(default_factory=list)
    volume: list[Fraction] = field(default_factory=list)

    @classmethod
    def from_trace(cls, trace: Iterable[TraceRecord]) -> "StepSeries":
        series = cls()
        for rec in trace:
            if len(series.times) > 0 and series.times[-1] == rec.time:
                series.count[-1] = rec.pending_count
                series.weight[-1] = rec.pending_weight
                series.volume[-1] = rec.pending_volume
            else:
                series.append(rec.time, rec.pending_count, rec.pending_weight, rec.pending_volume)
        return series

    def append(self, time: Fraction, count: int, weight: Fraction, volume: Fraction):
        self.times.append(time)
        self.count.append(count)
        self.weight.append(weight)
        self.volume.append(volume)

    def at(self, t: Fraction) -> tuple[int, Fraction, Fraction]:
        """Returns ``(δ(t), W(t), V(t))``; all zero before the first breakpoint."""
        i = bisect_right(self.times, t) - 1
        if i < 0:
            return 0, Fraction(0), Fraction(0)
        return self.count[i], self.weight[i], self.volume[i]

    def integral_weight(self) -> Fraction:
        """The exact integral of ``W(t)`` over the horizon."""
        total = Fraction(0)
        for i in range(len(self.times) - 1):
            total += self.weight[i] * (self.times[i + 1] - self.times[i])
        return total


@dataclass(slots=True)
class SimResult:
    trace: list[TraceRecord]
    completion: dict[int, Fraction]
    flow_weighted: Fraction
    flow_unweighted: Fraction
    policy: str = ""
    fingerprint: Optional[str] = None
    snapshots: list[tuple[int, Fraction, Any]] = field(default_factory=list)

    def series(self) -> StepSeries:
        return StepSeries.from_trace(self.trace)


class Simulator:
    """
    Continuous-time simulator of one preemptive machine.

    Parameters
    ----------
    policy
        A fresh policy instance.
    checkers
        Hooks called as ``checker(event_index, now, snapshot, simulator)`` after every
        event.
    record_snapshots
        Store ``(event_index, now, snapshot)`` after every event in the result.
    mu
        Declared distortion; jobs outside ``[p̃, μ·p̃)`` are logged as a warning.
    """

    def __init__(
        self,
        policy: ModelInterface,
        checkers: Iterable[Checker] = (),
        record_snapshots: bool = False,
        mu: Optional[Fraction] = None,
    ):
        if len(policy.pending) > 0:
            raise InternalInconsistency(f"policy {policy.name!r} is not fresh")
        self.policy = policy
        self.checkers = list(checkers)
        self.record_snapshots = record_snapshots
        self.mu = Fraction(mu) if mu is not None else None
        self.now = Fraction(0)
        self.jobs: dict[int, Job] = {}
        self.upcoming: list[tuple[Fraction, int]] = []
        self.pending: set[int] = set()
        self.remaining: dict[int, Optional[Fraction]] = {}
        self.elapsed: dict[int, Fraction] = {}
        self.completion: dict[int, Fraction] = {}
        self.trace: list[TraceRecord] = []
        self.snapshots: list[tuple[int, Fraction, Any]] = []
        self.running: Optional[int] = None
        self.events = 0
        self._due = False
        self._weight = Fraction(0)
        self._volume = Fraction(0)

    def add(self, job: Job, committed: bool = True):
        """
        Schedules the release of ``job``. With ``committed=False`` the true processing
        time is not known yet: the job cannot complete until :meth:`commit` is called,
        and ``job.true_proc`` is ignored.
        """
        if job.id in self.jobs:
            raise DuplicateRelease(f"job {job.id} was already added")
        if job.release < self.now:
            raise InternalInconsistency(
                f"job {job.id} released at {format_rat(job.release)} "
                f"before the current time {format_rat(self.now)}"
            )
        self.jobs[job.id] = job
        self.remaining[job.id] = job.true_proc if committed else None
        self.elapsed[job.id] = Fraction(0)
        heapq.heappush(self.upcoming, (job.release, job.id))
        if job.release == self.now:
            self._due = True
        if committed:
            self._check_distortion(job)

    def commit(self, job_id: int, true_proc: Fraction):
        """Fixes the true processing time of a job added with ``committed=False``."""
        if job_id not in self.jobs:
            raise UnknownJob(f"job {job_id} is not known to the simulator")
        if self.remaining[job_id] is not None:
            raise InternalInconsistency(f"job {job_id} is already committed")
        job = self.jobs[job_id]
        left = true_proc - self.elapsed[job_id]
        if left < 0:
            raise InternalInconsistency(
                f"job {job_id} was processed for {format_rat(self.elapsed[job_id])}, "
                f"more than the committed {format_rat(true_proc)}"
            )
        self.jobs[job_id] = job.model_copy(update=dict(true_proc=true_proc))
        self.remaining[job_id] = left
        if job_id in self.pending:
            self._volume += true_proc - job.pred_proc
            self._record("Commit", job_id)
        if left == 0:
            logger.debug("job %d completes on commitment at %s", job_id, self.now)
            self._due = True
        self._check_distortion(self.jobs[job_id])

    def run(self, until: Optional[Fraction] = None):
        """
        Processes events until all jobs are complete, or until time ``until``. Events
        at exactly ``until`` are left for the next call, so that releases and
        commitments at that time can still be added.
        """
        while True:
            if until is not None and self.now >= until:
                break
            if self._due:
                self._process_event()
            if len(self.pending) == 0 and len(self.upcoming) == 0:
                if until is not None:
                    self.now = Fraction(until)
                break
            self._advance(until)

    def result(self, fp: Optional[str] = None) -> SimResult:
        if len(self.pending) > 0 or len(self.upcoming) > 0:
            raise IncompleteRun(
                f"{len(self.pending)} pending and {len(self.upcoming)} unreleased jobs left"
            )
        flow_weighted = Fraction(0)
        flow_unweighted = Fraction(0)
        for jid, c in self.completion.items():
            job = self.jobs[jid]
            flow_weighted += job.weight * (c - job.release)
            flow_unweighted += c - job.release
        return SimResult(
            trace=self.trace,
            completion=self.completion,
            flow_weighted=flow_weighted,
            flow_unweighted=flow_unweighted,
            policy=self.policy.name,
            fingerprint=fp,
            snapshots=self.snapshots,
        )

    def _check_distortion(self, job: Job):
        if self.mu is None:
            return
        if not within_distortion(job.true_proc, job.pred_proc, self.mu):
            logger.warning(
                "job %d has true time %s outside [%s, %s * %s)",
                job.id,
                format_rat(job.true_proc),
                format_rat(job.pred_proc),
                format_rat(self.mu),
                format_rat(job.pred_proc),
            )

    def _record(self, kind: Kind, job_id: int):
        self.trace.append(
            TraceRecord(
                time=self.now,
                kind=kind,
                job_id=job_id,
                pending_count=len(self.pending),
                pending_weight=self._weight,
                pending_volume=self._volume,
            )
        )

    def _drain(self):
        for kind, jid in self.policy.drain_notes():
            self._record(kind, jid)

    def _process_event(self):
        now = self.now
        while len(self.upcoming) > 0 and self.upcoming[0][0] == now:
            _, jid = heapq.heappop(self.upcoming)
            job = self.jobs[jid]
            self.pending.add(jid)
            self._weight += job.weight
            if self.remaining[jid] is None:
                self._volume += job.pred_proc
            else:
                self._volume += job.true_proc
            self._record("Release", jid)
            self.policy.on_release(job.view(), now)
            self._drain()

        for jid in sorted(j for j in self.pending if self.remaining[j] == 0):
            self.pending.remove(jid)
            self.completion[jid] = now
            self._weight -= self.jobs[jid].weight
            if self.running == jid:
                self.running = None
            self._record("Complete", jid)
            self.policy.on_complete(jid, now)
            self._drain()

        self.policy.rebalance(now)
        self._drain()

        sel = self.policy.select(now)
        if sel is None and len(self.pending) > 0:
            raise PolicyIdleWhilePending(
                f"{self.policy.name} selected no job at {format_rat(now)} "
                f"with {len(self.pending)} jobs pending"
            )
        if sel is not None and sel not in self.pending:
            raise PolicySelectedUnknownJob(
                f"{self.policy.name} selected job {sel}, which is not pending"
            )
        if sel != self.running:
            if self.running is not None:
                self._record("Preempt", self.running)
            if sel is not None and self.elapsed[sel] > 0:
                self._record("Resume", sel)
        self.running = sel

        if len(self.checkers) > 0 or self.record_snapshots:
            snapshot = self.policy.snapshot(now)
            if self.record_snapshots:
                self.snapshots.append((self.events, now, snapshot))
            for checker in self.checkers:
                checker(self.events, now, snapshot, self)
        self.events += 1
        self._due = False

    def _advance(self, until: Optional[Fraction]):
        targets = []
        if len(self.upcoming) > 0:
            targets.append(self.upcoming[0][0])
        if self.running is not None and self.remaining[self.running] is not None:
            targets.append(self.now + self.remaining[self.running])
        if until is not None:
            targets.append(Fraction(until))
        t = min(targets)
        dt = t - self.now
        self.now = t
        if self.running is not None and dt > 0:
            jid = self.running
            self.elapsed[jid] += dt
            if self.remaining[jid] is not None:
                self.remaining[jid] -= dt
            self._volume -= dt
            self.policy.on_progress(jid, t, dt)
        due_release = len(self.upcoming) > 0 and self.upcoming[0][0] == t
        due_completion = self.running is not None and self.remaining[self.running] == 0
        self._due = due_release or due_completion


def simulate(
    inst: Instance,
    policy: ModelInterface,
    checkers: Iterable[Checker] = (),
    record_snapshots: bool = False,
) -> SimResult:
    """Runs ``policy`` on ``inst`` to completion and returns the full trace and flow times."""
    logger.debug("simulating %s on %d jobs", policy.name, inst.n)
    sim = Simulator(policy, checkers, record_snapshots, mu=inst.mu)
    for job in inst.jobs:
        sim.add(job)
    sim.run()
    result = sim.result(fingerprint(inst))
    logger.debug(
        "%s finished with weighted flow %s", policy.name, format_rat(result.flow_weighted)
    )
    return result


def flow_time_both_forms(result: SimResult, inst: Instance) -> tuple[Fraction, Fraction]:
    """
    Returns the weighted flow time as ``Σ w_q (c_q − r_q)`` and as the exact integral
    of the pending weight over the trace.
    """
    missing = [job.id for job in inst.jobs if job.id not in result.completion]
    if len(missing) > 0:
        raise IncompleteRun(f"jobs {missing} have no completion in the result")
    sum_form = sum(
        (job.weight * (result.completion[job.id] - job.release) for job in inst.jobs),
        Fraction(0),
    )
    return sum_form, result.series().integral_weight()
