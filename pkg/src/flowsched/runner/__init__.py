"""
**flowsched.runner**: experiment commands
-----------------------------------------

Module of functions behind the ``flowsched`` command line. Includes:

- :func:`init` to create a default ``settings.toml`` file
- :func:`cmd_run` to simulate one policy on one instance, with checkers
- :func:`cmd_sweep` to run a seeded grid of ``μ`` × policies × seeds
- :func:`cmd_adversary` to run the lower-bound adversary against a policy
- :func:`cmd_gen` to write a generated instance file

Every command takes keyword arguments only and returns a
:class:`~flowsched.models.Reply`; its ``code`` is the process exit status
(0 success, 2 invalid input, 3 failed checker, 4 engine error).

"""

import os
import textwrap
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction
from functools import wraps
from importlib import metadata
from itertools import product
from pathlib import Path
from typing import Any, NamedTuple, Optional, Union
import logging
import math

import psutil
import yaml
from pydantic import ValidationError

from flowsched import io
from flowsched.analysis import (
    SnapshotMonitor,
    check_bin_structure,
    check_covered_volume_unweighted,
    check_covered_volume_weighted,
    check_density_choice,
    check_no_violations,
    check_partial_uniqueness,
    check_pending_bound,
    competitive_report,
    local_ratio,
)
from flowsched.core import ceil_to_power, fingerprint, instance_stats, round_weights
from flowsched.engine import SimResult, flow_time_both_forms, simulate
from flowsched.errors import (
    ConfigError,
    FlowschedError,
    NonIntegerData,
    TooLarge,
    WrongPolicyKind,
)
from flowsched.models import (
    AdversaryConfig,
    CheckReport,
    Instance,
    OracleLimits,
    RandomSpec,
    Reply,
    Settings,
    SweepGrid,
    format_rat,
)
from flowsched.oracles import Reference, optimal_weighted_small, reference, srpt
from flowsched.policies import REGISTRY, make_policy, policy_to_interface
from flowsched.workloads import gen_random, run_adversary, semiclairvoyant_transform

logger = logging.getLogger(__name__)
VERSION = metadata.version("flowsched")

SNAPSHOT_CHECKS = {
    "no_violations": (check_no_violations, {"two-bins", "superbins"}),
    "bin_structure": (check_bin_structure, {"two-bins", "superbins"}),
    "partial_uniqueness": (check_partial_uniqueness, {"density-weight"}),
    "density_choice": (check_density_choice, {"density-weight"}),
}
SERIES_CHECKS = {
    "covered_volume": {"two-bins", "superbins"},
    "pending_bound": {"two-bins", "superbins"},
    "duality": set(REGISTRY),
}
CHECKS = list(SNAPSHOT_CHECKS) + list(SERIES_CHECKS)

METRICS_HEADER = [
    "instance_id",
    "policy",
    "mu",
    "n",
    *[f"{k}{s}" for k in ("ratio_P", "ratio_W", "ratio_D") for s in ("", "_decimal")],
    "flow",
    "flow_decimal",
    "flow_unweighted",
    "flow_unweighted_decimal",
    "reference_kind",
    "reference",
    "reference_decimal",
    "ratio",
    "ratio_decimal",
    "max_local_ratio",
    "max_local_ratio_decimal",
]
SWEEP_HEADER = ["seed"] + METRICS_HEADER


def replies(func):
    """Turns :class:`FlowschedError` exceptions of a command into a failed :class:`Reply`."""

    @wraps(func)
    def wrapper(**kwargs):
        try:
            return func(**kwargs)
        except FlowschedError as e:
            logger.error("%s: %s", type(e).__name__, e)
            return Reply(
                success=False, msg=f"{type(e).__name__}: {e}", code=e.exit_code
            )

    return wrapper


def get_settings(appdir: Optional[Union[str, Path]]) -> Settings:
    return io.load_settings(None if appdir is None else Path(appdir))


def resolve_outdir(out: Optional[Union[str, Path]], settings: Settings) -> Path:
    """``--out`` > ``$FLOWSCHED_OUT`` > ``outdir`` in settings > current directory."""
    for candidate in (out, os.environ.get("FLOWSCHED_OUT"), settings.outdir):
        if candidate not in {None, ""}:
            return Path(candidate)
    return Path.cwd()


def resolve_checks(policy: str, check: Union[str, list[str], None]) -> list[str]:
    """
    Expands ``all`` / ``none`` / a comma separated list into the checker names to run.
    ``all`` selects the checkers that apply to ``policy``.
    """
    if check is None or check == "none" or check == []:
        return []
    if check == "all":
        applies = [c for c, (_, kinds) in SNAPSHOT_CHECKS.items() if policy in kinds]
        return applies + [c for c, kinds in SERIES_CHECKS.items() if policy in kinds]
    names = check.split(",") if isinstance(check, str) else list(check)
    for name in names:
        if name not in CHECKS:
            raise ConfigError(f"unknown checker {name!r}, choose from {CHECKS}")
        kinds = SNAPSHOT_CHECKS[name][1] if name in SNAPSHOT_CHECKS else SERIES_CHECKS[name]
        if policy not in kinds:
            raise WrongPolicyKind(f"checker {name!r} does not apply to policy {policy!r}")
    return names


def superbins_factor(inst: Instance, mu: Fraction) -> Fraction:
    """``2⌈μ²⌉(⌈log₂ W⌉ + 1)`` for the weight ratio ``W`` of ``inst``."""
    theta = math.ceil(Fraction(mu) ** 2)
    logW = ceil_to_power(instance_stats(inst).ratio_W, 2)[0]
    return Fraction(2 * theta * (logW + 1))


class Evaluation(NamedTuple):
    result: SimResult
    reports: list[CheckReport]
    reference: Reference
    ratio: Fraction
    local: Optional[Fraction]


def evaluate(
    inst: Instance,
    policy: str,
    mu: Optional[Fraction] = None,
    check: Union[str, list[str], None] = "all",
    limits: OracleLimits = OracleLimits(),
    policy_settings: Optional[dict[str, dict[str, Any]]] = None,
) -> Evaluation:
    """
    Simulates ``policy`` on ``inst`` with the selected checkers and compares it with
    the best available reference schedule.
    """
    log = logging.getLogger(f"{__name__}.evaluate")
    fp = fingerprint(inst)
    pol = make_policy(policy, inst, mu, policy_settings)
    mu = pol.mu
    theta = math.ceil(mu**2)
    selected = resolve_checks(policy, check)
    monitors = [
        SnapshotMonitor(SNAPSHOT_CHECKS[c][0], c) for c in selected if c in SNAPSHOT_CHECKS
    ]
    snapshots = policy == "two-bins" and "covered_volume" in selected
    result = simulate(inst, pol, checkers=monitors, record_snapshots=snapshots)
    reports = [m.report for m in monitors]
    ref = reference(inst, limits)

    if "duality" in selected:
        report = CheckReport(checker="duality")
        sum_form, integral = flow_time_both_forms(result, inst)
        if sum_form != integral:
            report.fail(
                len(result.trace),
                f"sum form {format_rat(sum_form)} differs from integral {format_rat(integral)}",
            )
        reports.append(report)

    if policy == "two-bins" and ref.series is not None:
        if "covered_volume" in selected:
            reports.append(check_covered_volume_unweighted(result, ref.series, mu))
        if "pending_bound" in selected:
            reports.append(check_pending_bound(result, ref.series, Fraction(2 * theta)))

    wanted = {"covered_volume", "pending_bound"} & set(selected)
    if policy == "superbins" and len(wanted) > 0 and inst.n > 0:
        rounded = round_weights(inst, 2)
        try:
            if rounded == inst and ref.series is not None:
                series = ref.series
            elif rounded.unweighted:
                series = srpt(rounded)[1]
            else:
                series = optimal_weighted_small(rounded, limits)[1]
        except (TooLarge, NonIntegerData) as e:
            log.info("weighted local checks skipped: %s", e)
        else:
            rpol = make_policy(policy, rounded, mu, policy_settings)
            rres = simulate(rounded, rpol, record_snapshots=True)
            if "covered_volume" in wanted:
                reports.append(check_covered_volume_weighted(rres, series, mu))
            if "pending_bound" in wanted:
                factor = superbins_factor(rounded, mu)
                reports.append(check_pending_bound(rres, series, factor, weighted=True))

    for report in reports:
        report.instance_id = fp
    ratio = competitive_report(result, ref.value)
    local = None
    if ref.series is not None:
        local = local_ratio(result, ref.series, weighted=not inst.unweighted)
    return Evaluation(result, reports, ref, ratio, local)


def metrics_row(inst: Instance, policy: str, mu: Fraction, ev: Evaluation) -> dict[str, str]:
    row = dict(instance_id=fingerprint(inst), policy=policy, mu=format_rat(mu), n=str(inst.n))
    if inst.n > 0:
        stats = instance_stats(inst)
        row.update(io.rat_columns("ratio_P", stats.ratio_P))
        row.update(io.rat_columns("ratio_W", stats.ratio_W))
        row.update(io.rat_columns("ratio_D", stats.ratio_D))
    else:
        for name in ("ratio_P", "ratio_W", "ratio_D"):
            row.update(io.rat_columns(name, None))
    row.update(io.rat_columns("flow", ev.result.flow_weighted))
    row.update(io.rat_columns("flow_unweighted", ev.result.flow_unweighted))
    row["reference_kind"] = ev.reference.kind
    row.update(io.rat_columns("reference", ev.reference.value))
    row.update(io.rat_columns("ratio", ev.ratio))
    row.update(io.rat_columns("max_local_ratio", ev.local))
    return row


def init(
    *,
    appdir: str,
    **_: dict,
) -> Reply:
    """
    Create a default settings.toml file.

    Will overwrite any existing settings.toml file.

    Examples
    --------

    >>> flowsched init
    Success: wrote default settings into /home/user/.config/flowsched/1.0/settings.toml

    """
    appdir = Path(appdir)
    defaults = textwrap.dedent(
        f"""\
        # Default settings for flowsched-{VERSION}
        # Generated on {str(datetime.now(timezone.utc))}
        outdir = '{Path.cwd().resolve().as_posix()}'

        [oracle]
        max_jobs = 5
        max_volume = 24
        half_grid_volume = 6

        [policies.density-weight]
        ratio_base = 2

        [verify]
        duality_instances = 1000
        unweighted_instances = 500
        weighted_instances = 200
        semiclairvoyant_instances = 300
        mutation_instances = 200
        adversary_bombardment = 200
        max_n = 60
        micro_max_n = 3
        """
    )
    if not appdir.exists():
        logger.debug("creating directory '%s'", appdir.resolve())
        os.makedirs(appdir)
    with (appdir / "settings.toml").open("w", encoding="utf-8") as of:
        of.write(defaults)
    return Reply(
        success=True,
        msg=f"wrote default settings into {appdir / 'settings.toml'}",
    )


def _random_spec(
    n: int,
    seed: int,
    mu: Optional[Fraction],
    weights: Optional[list[Fraction]],
    mode: str,
    anchor: str,
) -> RandomSpec:
    try:
        return RandomSpec(
            n=n,
            seed=seed,
            mu=Fraction(1) if mu is None else mu,
            weights=[Fraction(1)] if weights is None else weights,
            mode=mode,
            anchor=anchor,
            release_window=max(n, 1),
        )
    except ValidationError as e:
        raise ConfigError(str(e)) from e


@replies
def cmd_run(
    *,
    policy: str,
    instance: Optional[str] = None,
    mu: Optional[Fraction] = None,
    seed: int = 0,
    n: int = 10,
    weights: Optional[list[Fraction]] = None,
    mode: str = "uniform",
    anchor: str = "pred",
    check: str = "all",
    out: Optional[str] = None,
    appdir: Optional[str] = None,
    **_: dict,
) -> Reply:
    """
    Simulate one policy on an instance file, or on a generated instance.

    Writes ``<name>.<policy>.trace.csv``, ``<name>.<policy>.metrics.csv`` and
    ``<name>.<policy>.reports.csv`` into the output directory.

    Examples
    --------

    >>> flowsched run --policy two-bins --instance a.sppt --check all
    Success: two-bins on a.sppt: flow 43, srpt 41, all 6 checks passed

    """
    settings = get_settings(appdir)
    outdir = resolve_outdir(out, settings)
    if instance is not None:
        inst = io.load_instance(Path(instance))
        name = Path(instance).stem
    else:
        inst = gen_random(_random_spec(n, seed, mu, weights, mode, anchor))
        name = f"random-{seed}"
    ev = evaluate(inst, policy, mu, check, settings.oracle, settings.policies)
    pmu = inst.mu if mu is None else mu

    stem = f"{name}.{policy}"
    io.write_trace(ev.result, outdir / f"{stem}.trace.csv")
    row = metrics_row(inst, policy, pmu, ev)
    io.write_rows([row], METRICS_HEADER, outdir / f"{stem}.metrics.csv")
    io.write_reports(ev.reports, outdir / f"{stem}.reports.csv")

    failed = [r.checker for r in ev.reports if not r.passed]
    summary = (
        f"{policy} on {name}: flow {format_rat(ev.result.flow_weighted)}, "
        f"{ev.reference.kind} {format_rat(ev.reference.value)}"
    )
    data = dict(
        flow=format_rat(ev.result.flow_weighted),
        reference=format_rat(ev.reference.value),
        reference_kind=ev.reference.kind,
        ratio=format_rat(ev.ratio),
        reports=[r.model_dump() for r in ev.reports],
        outdir=str(outdir),
    )
    if len(failed) > 0:
        return Reply(
            success=False,
            msg=f"{summary}, failed checks: {', '.join(failed)}",
            data=data,
            code=3,
        )
    return Reply(
        success=True,
        msg=f"{summary}, all {len(ev.reports)} checks passed",
        data=data,
    )


def load_grid(path: Optional[Union[str, Path]]) -> SweepGrid:
    """Loads a sweep grid from YAML; defaults to the packaged ``default_grid.yml``."""
    if path is None:
        path = Path(__file__).parent / ".." / "data" / "default_grid.yml"
    path = Path(path)
    logger.debug("loading sweep grid from '%s'", path)
    try:
        with path.open("r") as infile:
            data = yaml.safe_load(infile) or {}
        return SweepGrid(**data)
    except FileNotFoundError as e:
        raise ConfigError(f"sweep grid {str(path)!r} not found") from e
    except (yaml.YAMLError, ValidationError, TypeError) as e:
        raise ConfigError(f"invalid sweep grid {str(path)!r}: {e}") from e


def _sweep_cell(args: tuple) -> dict[str, str]:
    spec, policy, limits, policy_settings = args
    inst = gen_random(spec)
    ev = evaluate(inst, policy, None, "none", limits, policy_settings)
    row = metrics_row(inst, policy, spec.mu, ev)
    row["seed"] = str(spec.seed)
    return row


def worker_count(jobs: Optional[int]) -> int:
    if jobs is not None and jobs > 0:
        return jobs
    return psutil.cpu_count(logical=False) or 1


@replies
def cmd_sweep(
    *,
    grid: Optional[str] = None,
    jobs: Optional[int] = None,
    out: Optional[str] = None,
    appdir: Optional[str] = None,
    svg: bool = False,
    **_: dict,
) -> Reply:
    """
    Run every cell of a sweep grid and write one ``sweep.csv`` row per cell.

    Cells run in parallel on up to ``jobs`` processes; the rows keep the grid order.

    Examples
    --------

    >>> flowsched sweep --grid grid.yml --jobs 4
    Success: wrote 20 rows into ./sweep.csv

    """
    settings = get_settings(appdir)
    outdir = resolve_outdir(out, settings)
    sg = load_grid(grid)
    for policy in sg.policies:
        if not policy_to_interface(policy).weighted and any(w != 1 for w in sg.generator.weights):
            raise ConfigError(f"policy {policy!r} cannot run on a weighted generator")
    cells = [
        (
            sg.generator.model_copy(update=dict(mu=mu, seed=seed)),
            policy,
            settings.oracle,
            settings.policies,
        )
        for mu, policy, seed in product(sg.mus, sg.policies, sg.seeds)
    ]
    nproc = min(worker_count(jobs), max(len(cells), 1))
    logger.info("running %d sweep cells on %d processes", len(cells), nproc)
    if nproc == 1:
        rows = [_sweep_cell(cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=nproc) as executor:
            rows = list(executor.map(_sweep_cell, cells))
    path = outdir / "sweep.csv"
    io.write_rows(rows, SWEEP_HEADER, path)
    files = [str(path)]
    if svg:
        files.extend(str(p) for p in io.write_sweep_charts(rows, outdir))
    return Reply(success=True, msg=f"wrote {len(rows)} rows into {path}", data=dict(files=files))


@replies
def cmd_adversary(
    *,
    mu: Fraction,
    phases: int = 8,
    bombardment: int = 200,
    victim: str = "srpt-pred",
    out: Optional[str] = None,
    appdir: Optional[str] = None,
    **_: dict,
) -> Reply:
    """
    Run the lower-bound adversary and write the realized instance, its ``.meta``
    file and a metrics CSV with the lower bound on the victim's ratio.

    Examples
    --------

    >>> flowsched adversary --mu 3/2 --phases 8 --bombardment 200
    Success: srpt-pred ratio is at least ... (victim flow ..., reference ...)

    """
    settings = get_settings(appdir)
    outdir = resolve_outdir(out, settings)
    cls = policy_to_interface(victim)
    if getattr(cls, "clairvoyant", False):
        raise ConfigError(f"victim {victim!r} is not an online policy")
    try:
        cfg = AdversaryConfig(mu=mu, phases=phases, bombardment_count=bombardment)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    pol = cls(mu=cfg.mu, **settings.policies.get(victim, {}))
    outcome = run_adversary(cfg, pol)

    stem = f"adversary-{victim}-M{phases}"
    io.store_instance(outcome.instance, outdir / f"{stem}.sppt")
    io.write_meta(outcome, outdir / f"{stem}.meta")
    row = dict(victim=victim, mu=format_rat(cfg.mu), phases=str(phases))
    row.update(io.rat_columns("victim_flow", outcome.victim_flow))
    row.update(io.rat_columns("opt_upper_bound", outcome.opt_upper_bound))
    row.update(io.rat_columns("ratio_lower_bound", outcome.ratio))
    io.write_rows([row], list(row), outdir / f"{stem}.metrics.csv")
    return Reply(
        success=True,
        msg=(
            f"{victim} ratio is at least {io.to_decimal(outcome.ratio, 4)} "
            f"(victim flow {format_rat(outcome.victim_flow)}, "
            f"reference {format_rat(outcome.opt_upper_bound)})"
        ),
        data=dict(
            ratio=format_rat(outcome.ratio),
            victim_flow=format_rat(outcome.victim_flow),
            opt_upper_bound=format_rat(outcome.opt_upper_bound),
            x_bomb=format_rat(outcome.x_bomb),
            lam=format_rat(outcome.lam),
            instance=str(outdir / f"{stem}.sppt"),
        ),
    )


@replies
def cmd_gen(
    *,
    n: int = 10,
    seed: int = 0,
    mu: Optional[Fraction] = None,
    weights: Optional[list[Fraction]] = None,
    mode: str = "uniform",
    anchor: str = "pred",
    rho: Optional[Fraction] = None,
    name: Optional[str] = None,
    out: Optional[str] = None,
    appdir: Optional[str] = None,
    **_: dict,
) -> Reply:
    """
    Generate a random instance and store it as ``<name>.sppt``. With ``rho``, the
    predictions are replaced by the semiclairvoyant classes of base ``rho``.

    Examples
    --------

    >>> flowsched gen --n 5 --seed 3 --mu 2
    Success: wrote instance with 5 jobs into ./random-3.sppt

    """
    settings = get_settings(appdir)
    outdir = resolve_outdir(out, settings)
    inst = gen_random(_random_spec(n, seed, mu, weights, mode, anchor))
    if rho is not None:
        inst = semiclairvoyant_transform(inst.jobs, rho)
    path = outdir / f"{name or f'random-{seed}'}.sppt"
    io.store_instance(inst, path)
    return Reply(
        success=True,
        msg=f"wrote instance with {inst.n} jobs into {path}",
        data=dict(path=str(path), fingerprint=fingerprint(inst)),
    )
