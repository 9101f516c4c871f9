"""
**flowsched.io**: functions for storing and loading data
--------------------------------------------------------

File formats:

- instance files (``.sppt``): a header ``sppt-instance v1 mu=<num>/<den>`` followed
  by one ``<id> <release> <pred_proc> <true_proc> <weight>`` line per job,
- trace CSV: ``time,kind,job_id,pending_count,pending_weight,pending_volume``,
- checker report CSV: ``checker,instance_id,status,max_ratio_num,max_ratio_den,first_failure_event``,
- metric / sweep CSV with ``num/den`` columns and a decimal display column,
- adversary ``.meta`` files (``key = value`` lines),
- SVG charts of a sweep,
- ``settings.toml`` loaded into :class:`~flowsched.models.Settings`.

"""

import csv
import math
import logging
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, TYPE_CHECKING

import toml

from flowsched.core import make_instance
from flowsched.errors import InstanceFormatError, ConfigError
from flowsched.models import (
    AdversaryOutcome,
    CheckReport,
    Instance,
    Job,
    Settings,
    format_rat,
    parse_rat,
)

if TYPE_CHECKING:
    from flowsched.engine import SimResult

logger = logging.getLogger(__name__)

HEADER = "sppt-instance v1"
TRACE_HEADER = [
    "time",
    "kind",
    "job_id",
    "pending_count",
    "pending_weight",
    "pending_volume",
]
REPORT_HEADER = [
    "checker",
    "instance_id",
    "status",
    "max_ratio_num",
    "max_ratio_den",
    "first_failure_event",
]


def to_decimal(value: Fraction, digits: int = 20) -> str:
    """Display-only decimal rendering of a rational with ``digits`` significant digits."""
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(value.numerator) / Decimal(value.denominator))


def dumps_instance(inst: Instance) -> str:
    lines = [f"{HEADER} mu={format_rat(inst.mu, always_den=True)}"]
    for job in inst.jobs:
        fields = [job.release, job.pred_proc, job.true_proc, job.weight]
        lines.append(" ".join([str(job.id)] + [format_rat(f) for f in fields]))
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> Instance:
    """Parses the text of an instance file; the result is validated by :func:`make_instance`."""
    lines = [line for line in text.splitlines() if line.strip() != ""]
    if len(lines) == 0:
        raise InstanceFormatError("instance file is empty")
    head = lines[0].split()
    if len(head) != 3 or " ".join(head[:2]) != HEADER or not head[2].startswith("mu="):
        raise InstanceFormatError(f"invalid instance header {lines[0]!r}")
    try:
        mu = parse_rat(head[2][3:])
    except ValueError as e:
        raise InstanceFormatError(str(e)) from e
    jobs = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 5:
            raise InstanceFormatError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            release, pred, true, weight = [parse_rat(p) for p in parts[1:]]
            jid = int(parts[0])
        except ValueError as e:
            raise InstanceFormatError(f"line {lineno}: {e}") from e
        jobs.append(
            Job(id=jid, release=release, pred_proc=pred, true_proc=true, weight=weight)
        )
    return make_instance(jobs, mu)


def store_instance(inst: Instance, path: Path):
    """Writes ``inst`` into ``path`` in the instance file format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    logger.debug("storing instance with %d jobs to '%s'", inst.n, path)
    with path.open("w", encoding="utf-8", newline="\n") as out:
        out.write(dumps_instance(inst))


def load_instance(path: Path) -> Instance:
    """Loads an instance file; raises :class:`InstanceFormatError` on malformed input."""
    path = Path(path)
    logger.debug("loading instance from '%s'", path)
    try:
        with path.open("r", encoding="utf-8") as inp:
            return loads_instance(inp.read())
    except FileNotFoundError as e:
        raise InstanceFormatError(f"instance file {str(path)!r} not found") from e
    except UnicodeDecodeError as e:
        raise InstanceFormatError(f"instance file {str(path)!r} is not UTF-8 text") from e


def write_trace(result: "SimResult", path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    logger.debug("writing %d trace records to '%s'", len(result.trace), path)
    with path.open("w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in result.trace:
            writer.writerow(
                [
                    format_rat(rec.time, always_den=True),
                    rec.kind,
                    rec.job_id,
                    rec.pending_count,
                    format_rat(rec.pending_weight, always_den=True),
                    format_rat(rec.pending_volume, always_den=True),
                ]
            )


def read_trace(path: Path) -> list[dict]:
    """Reads a trace CSV back into dictionaries with exact rational values."""
    with Path(path).open("r", encoding="utf-8", newline="") as inp:
        rows = []
        for row in csv.DictReader(inp):
            rows.append(
                dict(
                    time=parse_rat(row["time"]),
                    kind=row["kind"],
                    job_id=int(row["job_id"]),
                    pending_count=int(row["pending_count"]),
                    pending_weight=parse_rat(row["pending_weight"]),
                    pending_volume=parse_rat(row["pending_volume"]),
                )
            )
    return rows


def write_reports(reports: Iterable[CheckReport], path: Path):
    """Writes checker reports; the ratio columns hold the largest recorded extreme."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for rep in reports:
            if len(rep.extremes) > 0:
                ratio = max(rep.extremes.values())
                num, den = ratio.numerator, ratio.denominator
            else:
                num, den = "", ""
            failure = "" if rep.first_failure is None else rep.first_failure.event_index
            writer.writerow(
                [rep.checker, rep.instance_id or "", rep.status, num, den, failure]
            )


def rat_columns(name: str, value: Optional[Fraction]) -> dict[str, str]:
    """Expands a rational into a ``num/den`` column and a decimal display column."""
    if value is None:
        return {name: "", f"{name}_decimal": ""}
    return {
        name: format_rat(value, always_den=True),
        f"{name}_decimal": to_decimal(value),
    }


def write_rows(rows: list[dict], header: list[str], path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    logger.debug("writing %d rows to '%s'", len(rows), path)
    with path.open("w", encoding="utf-8", newline="") as out:
        writer = csv.DictWriter(out, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_meta(outcome: AdversaryOutcome, path: Path):
    """Writes the adversary ``.meta`` file: constants, per-phase splits and ``x_bomb``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"lambda = {format_rat(outcome.lam)}",
        f"phases = {outcome.phases}",
        f"x_bomb = {format_rat(outcome.x_bomb)}",
        f"declared_mu = {format_rat(outcome.instance.mu)}",
        f"victim_flow = {format_rat(outcome.victim_flow)}",
        f"opt_upper_bound = {format_rat(outcome.opt_upper_bound)}",
    ]
    for phase, q1, q2, e1, e2 in outcome.splits:
        lines.append(
            f"phase {phase} = q1:{q1} processed {format_rat(e1)}, "
            f"q2:{q2} processed {format_rat(e2)}"
        )
    with path.open("w", encoding="utf-8", newline="\n") as out:
        out.write("\n".join(lines) + "\n")


def load_settings(appdir: Optional[Path]) -> Settings:
    """
    Loads ``settings.toml`` from ``appdir``. A missing directory or file results in
    default :class:`Settings`.
    """
    if appdir is None:
        return Settings()
    path = Path(appdir) / "settings.toml"
    if not path.exists():
        logger.debug("settings file '%s' does not exist, using defaults", path)
        return Settings()
    logger.debug("loading settings from '%s'", path)
    try:
        return Settings(**toml.load(path))
    except (toml.TomlDecodeError, ValueError) as e:
        raise ConfigError(f"invalid settings file {str(path)!r}: {e}") from e


def write_sweep_charts(rows: list[dict], outdir: Path) -> list[Path]:
    """
    Writes static SVG scatter charts of the sweep ratio against ``μ``, ``log₂ P`` and
    ``log₂ W``, one marker series per policy. Needs the ``plot`` extra.
    """
    try:
        import matplotlib

        matplotlib.use("svg")
        from matplotlib import pyplot as plt
    except ImportError as e:
        raise ConfigError("SVG charts need matplotlib, install the 'plot' extra") from e
    matplotlib.rcParams["svg.hashsalt"] = "flowsched"

    def log2(text: str) -> float:
        return math.log2(float(parse_rat(text)))

    charts = [
        ("mu", "ratio_mu", "μ", lambda t: float(parse_rat(t))),
        ("ratio_P", "ratio_logP", "log₂ P", log2),
        ("ratio_W", "ratio_logW", "log₂ W", log2),
    ]
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for column, stem, label, scale in charts:
        fig, ax = plt.subplots(figsize=(6, 4))
        for policy in sorted({row["policy"] for row in rows}):
            points = [
                (scale(row[column]), float(parse_rat(row["ratio"])))
                for row in rows
                if row["policy"] == policy and row[column] != ""
            ]
            ax.plot(
                [x for x, _ in points],
                [y for _, y in points],
                marker="o",
                linestyle="",
                label=policy,
            )
        ax.set_xlabel(label)
        ax.set_ylabel("flow time ratio")
        if len(rows) > 0:
            ax.legend()
        path = outdir / f"sweep.{stem}.svg"
        logger.debug("writing chart '%s'", path)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
