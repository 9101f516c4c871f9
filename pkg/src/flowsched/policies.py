"""
**flowsched.policies**: Shim resolving policy names to policy classes
---------------------------------------------------------------------

"""

from fractions import Fraction
from typing import Any, Optional, Type
import importlib
import logging

from flowsched.errors import ConfigError, WeightedInstance
from flowsched.models import Instance
from flowsched.policyinterface_1_0 import ModelInterface

logger = logging.getLogger(__name__)

REGISTRY = {
    "density-weight": "flowsched.policy.density_weight:PolicyInterface",
    "two-bins": "flowsched.policy.two_bins:PolicyInterface",
    "superbins": "flowsched.policy.superbins:PolicyInterface",
    "srpt": "flowsched.policy.srpt:PolicyInterface",
    "srpt-pred": "flowsched.policy.srpt:PredictedSRPT",
}


def policy_to_interface(name: str) -> Type[ModelInterface]:
    """Returns the policy class registered under ``name``."""
    if name not in REGISTRY:
        raise ConfigError(f"unknown policy {name!r}, choose from {sorted(REGISTRY)}")
    modname, clsname = REGISTRY[name].split(":")
    mod = importlib.import_module(modname)
    return getattr(mod, clsname)


def make_policy(
    name: str,
    inst: Instance,
    mu: Optional[Fraction] = None,
    settings: Optional[dict[str, dict[str, Any]]] = None,
) -> ModelInterface:
    """
    Builds a fresh policy for ``inst``. The distortion defaults to ``inst.mu``;
    ``settings`` holds per-policy keyword overrides, e.g. from ``settings.toml``.
    Clairvoyant policies receive the true processing times.
    """
    cls = policy_to_interface(name)
    if not cls.weighted and not inst.unweighted:
        raise WeightedInstance(f"policy {name!r} requires all weights to equal 1")
    kwargs = dict((settings or {}).get(name, {}))
    if getattr(cls, "clairvoyant", False):
        kwargs["true_procs"] = {job.id: job.true_proc for job in inst.jobs}
    mu = inst.mu if mu is None else Fraction(mu)
    logger.debug("building %s with mu=%s and settings %s", name, mu, sorted(kwargs))
    return cls(mu=mu, **kwargs)
