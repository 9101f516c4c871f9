"""
**flowsched.models**: Pydantic models for flowsched
---------------------------------------------------

All continuous quantities (times, processing times, weights, volumes) are exact
rationals, represented by :class:`fractions.Fraction` and annotated as :obj:`Rat`.
A :obj:`Rat` field accepts a :class:`Fraction`, an :class:`int`, or a string in the
``<int>`` / ``<int>/<int>`` notation, and serialises back into that notation.

"""

from fractions import Fraction
from typing import Any, Annotated, Literal, Optional, Union
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    field_validator,
)
import re
import logging

logger = logging.getLogger(__name__)

_RAT = re.compile(r"^\s*(-?\d+)(?:/(\d+))?\s*$")


def parse_rat(text: str) -> Fraction:
    """Parses ``<int>`` or ``<int>/<int>`` into a :class:`Fraction`."""
    m = _RAT.match(text)
    if m is None:
        raise ValueError(f"{text!r} is not a rational of the form <int> or <int>/<int>")
    num, den = m.groups()
    if den is not None and int(den) == 0:
        raise ValueError(f"{text!r} has a zero denominator")
    return Fraction(int(num), int(den) if den is not None else 1)


def format_rat(value: Fraction, always_den: bool = False) -> str:
    """Formats a :class:`Fraction` as ``num/den``, or as ``num`` for integers."""
    value = Fraction(value)
    if value.denominator == 1 and not always_den:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _coerce_rat(v: Any) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return parse_rat(v)
    raise ValueError(f"cannot interpret {v!r} as an exact rational")


Rat = Annotated[
    Fraction,
    BeforeValidator(_coerce_rat),
    PlainSerializer(lambda v: format_rat(v), return_type=str),
]


class Job(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: int
    release: Rat
    true_proc: Rat
    pred_proc: Rat
    weight: Rat = Fraction(1)

    def view(self) -> "JobView":
        """The part of the job an online policy is allowed to see."""
        return JobView(
            id=self.id,
            release=self.release,
            pred_proc=self.pred_proc,
            weight=self.weight,
        )


class JobView(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: int
    release: Rat
    pred_proc: Rat
    weight: Rat


class Instance(BaseModel):
    """A validated set of jobs, sorted by ``(release, id)``; see :func:`make_instance`."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    jobs: tuple[Job, ...] = ()
    mu: Rat = Fraction(1)

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def unweighted(self) -> bool:
        return all(job.weight == 1 for job in self.jobs)


class InstanceStats(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ratio_P: Rat
    ratio_W: Rat
    ratio_D: Rat
    n: int


class RandomSpec(BaseModel):
    """
    Parameters of :func:`flowsched.workloads.gen_random`.

    Anchor processing times (predictions for ``anchor="pred"``, true times for
    ``anchor="true"``) are drawn from a grid of spacing ``1/proc_denominator`` within
    ``proc_range``; release times from a grid of spacing ``1/release_denominator``
    within ``[0, release_window]``; weights uniformly from ``weights``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(default=10, ge=0)
    release_window: Rat = Fraction(10)
    release_denominator: int = Field(default=1, ge=1)
    proc_range: tuple[Rat, Rat] = (Fraction(1), Fraction(8))
    proc_denominator: int = Field(default=1, ge=1)
    weights: list[Rat] = Field(default_factory=lambda: [Fraction(1)])
    seed: int = 0
    mu: Rat = Fraction(1)
    mode: Literal["uniform", "extremal", "exact"] = "uniform"
    anchor: Literal["pred", "true"] = "pred"
    extremal_k: int = Field(default=7, ge=1)
    max_denominator: int = Field(default=64, ge=1)


class AdversaryConfig(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mu: Rat
    phases: int = Field(default=8, ge=1)
    bombardment_count: int = Field(default=200, ge=0)
    declared_slack: Rat = Fraction(1, 1000)


class AdversaryOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    instance: Instance
    victim_flow: Rat
    opt_upper_bound: Rat
    lam: Rat
    phases: int
    splits: list[tuple[int, int, int, Rat, Rat]] = Field(default_factory=list)
    x_bomb: Rat

    @property
    def ratio(self) -> Fraction:
        return self.victim_flow / self.opt_upper_bound


class OracleLimits(BaseModel):
    max_jobs: int = 5
    max_volume: int = 24
    half_grid_volume: int = 6


class FirstFailure(BaseModel):
    event_index: int
    message: str


class CheckReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    checker: str
    status: Literal["pass", "fail"] = "pass"
    first_failure: Optional[FirstFailure] = None
    extremes: dict[str, Rat] = Field(default_factory=dict)
    instance_id: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def fail(self, event_index: int, message: str):
        if self.status == "pass":
            logger.debug("%s failed at event %d: %s", self.checker, event_index, message)
            self.status = "fail"
            self.first_failure = FirstFailure(event_index=event_index, message=message)

    def record_max(self, name: str, value: Fraction):
        if name not in self.extremes or value > self.extremes[name]:
            self.extremes[name] = value


PolicyName = Literal["density-weight", "two-bins", "superbins", "srpt", "srpt-pred"]


class SweepGrid(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mus: list[Rat] = Field(default_factory=list)
    policies: list[PolicyName] = Field(default_factory=list)
    seeds: Union[int, list[int]] = 0
    generator: RandomSpec = Field(default_factory=RandomSpec)

    @field_validator("seeds", mode="after")
    def expand_seeds(cls, v):
        if isinstance(v, int):
            return list(range(v))
        return v


class VerifySettings(BaseModel):
    duality_instances: int = 1000
    unweighted_instances: int = 500
    weighted_instances: int = 200
    semiclairvoyant_instances: int = 300
    mutation_instances: int = 200
    adversary_bombardment: int = 200
    max_n: int = 60
    micro_max_n: int = 3


class Settings(BaseModel):
    outdir: Optional[str] = None
    oracle: OracleLimits = Field(default_factory=OracleLimits)
    policies: dict[str, dict[str, Any]] = Field(default_factory=dict)
    verify: VerifySettings = Field(default_factory=VerifySettings)


class Reply(BaseModel):
    success: bool
    msg: Optional[str] = None
    data: Optional[Any] = None
    code: int = 0
