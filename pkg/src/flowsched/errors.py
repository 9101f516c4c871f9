"""
**flowsched.errors**: exceptions raised by flowsched
----------------------------------------------------

All exceptions derive from :class:`FlowschedError` and belong to one of three
families, which the command line front end maps onto exit codes:

- :class:`ConfigError` -- invalid input data, settings or policy/instance
  combinations (exit code 2),
- :class:`CheckFailure` -- an invariant checker reported a failure (exit code 3),
- :class:`EngineError` -- a breach of the contract between the simulator and a
  policy (exit code 4).

"""


class FlowschedError(Exception):
    """Base class of all flowsched exceptions."""

    exit_code: int = 1


class ConfigError(FlowschedError, ValueError):
    exit_code = 2


class CheckFailure(FlowschedError):
    exit_code = 3


class EngineError(FlowschedError, RuntimeError):
    exit_code = 4


# core_model


class DuplicateId(ConfigError):
    pass


class NonPositiveField(ConfigError):
    pass


class DistortionViolated(ConfigError):
    def __init__(self, job_id: int, msg: str = None):
        self.job_id = job_id
        super().__init__(msg or f"job {job_id} violates the declared distortion")


class EmptyInstance(ConfigError):
    pass


class InvalidBase(ConfigError):
    pass


class InstanceFormatError(ConfigError):
    pass


# sim_engine and policies


class PolicySelectedUnknownJob(EngineError):
    pass


class PolicyIdleWhilePending(EngineError):
    pass


class IncompleteRun(EngineError):
    pass


class UnknownJob(EngineError):
    pass


class DuplicateRelease(EngineError):
    pass


class CompletedNonTop(EngineError):
    pass


class InternalInconsistency(EngineError):
    pass


# oracles and workloads


class WeightedInstance(ConfigError):
    pass


class TooLarge(ConfigError):
    pass


class NonIntegerData(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class VictimWeighted(ConfigError):
    pass


class InvalidMu(ConfigError):
    pass


class InvalidRho(ConfigError):
    pass


class OracleMismatch(EngineError):
    pass


# analysis


class WrongPolicyKind(ConfigError):
    pass


class SeriesMismatch(ConfigError):
    pass


class ZeroOpt(ConfigError):
    pass
