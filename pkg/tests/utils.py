import subprocess
import logging
from fractions import Fraction

from flowsched.core import make_instance
from flowsched.models import Instance, Job, JobView

logger = logging.getLogger(__name__)


def instance(rows: list[tuple], mu=1) -> Instance:
    """Builds an instance from ``(release, pred_proc, true_proc[, weight])`` rows, ids in order."""
    jobs = []
    for jid, row in enumerate(rows):
        r, pp, tp, *w = row
        jobs.append(
            Job(id=jid, release=r, pred_proc=pp, true_proc=tp, weight=w[0] if w else 1)
        )
    return make_instance(jobs, mu)


def view(jid: int, pred, weight=1, release=0) -> JobView:
    return JobView(id=jid, release=Fraction(release), pred_proc=pred, weight=weight)


def flowsched(*args: str) -> subprocess.CompletedProcess:
    ret = subprocess.run(["flowsched", *args], capture_output=True, text=True)
    print(f"{ret.stdout=}")
    print(f"{ret.stderr=}")
    return ret


def rats(rng, n: int, hi: int = 1000) -> list[Fraction]:
    """``n`` positive rationals with numerators and denominators below ``hi``."""
    nums = rng.integers(1, hi, n)
    dens = rng.integers(1, hi, n)
    return [Fraction(int(a), int(b)) for a, b in zip(nums, dens)]
