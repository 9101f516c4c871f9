import os
import pytest
from fractions import Fraction

from flowsched import io
from flowsched.core import (
    ceil_to_power,
    fingerprint,
    floor_log,
    instance_stats,
    make_instance,
    round_weights,
    within_distortion,
)
from flowsched.errors import (
    DistortionViolated,
    DuplicateId,
    EmptyInstance,
    InstanceFormatError,
    InvalidBase,
    NonPositiveField,
)
from flowsched.models import Job, format_rat, parse_rat
from flowsched.workloads import make_rng

from .utils import instance, rats


@pytest.mark.parametrize(
    "value, base, expected",
    [
        (8, 2, 3),
        (7, 2, 2),
        (1, 2, 0),
        (Fraction(1, 4), 2, -2),
        (Fraction(1, 3), 2, -2),
        (Fraction(1, 38), 38, -1),
        (38**5, 38, 5),
        (38**5 - 1, 38, 4),
        (Fraction(9, 4), Fraction(3, 2), 2),
    ],
)
def test_floor_log(value, base, expected):
    k = floor_log(value, base)
    print(f"{k=}")
    assert k == expected
    assert Fraction(base) ** k <= value < Fraction(base) ** (k + 1)


@pytest.mark.parametrize(
    "value, base",
    [(0, 2), (-1, 2), (8, 1), (8, Fraction(1, 2))],
)
def test_floor_log_invalid(value, base):
    with pytest.raises((InvalidBase, NonPositiveField)):
        floor_log(value, base)


@pytest.mark.parametrize(
    "value, expected",
    [
        (3, (2, Fraction(4))),
        (4, (2, Fraction(4))),
        (1, (0, Fraction(1))),
        (Fraction(1, 3), (-1, Fraction(1, 2))),
    ],
)
def test_ceil_to_power(value, expected):
    assert ceil_to_power(value, 2) == expected


@pytest.mark.parametrize(
    "true, pred, mu, expected",
    [
        (5, 4, 2, True),
        (8, 4, 2, False),
        (3, 4, 2, False),
        (4, 4, 1, True),
        (Fraction(41, 10), 4, 1, False),
    ],
)
def test_within_distortion(true, pred, mu, expected):
    assert within_distortion(Fraction(true), Fraction(pred), Fraction(mu)) is expected


def test_make_instance_sorts():
    jobs = [
        Job(id=2, release=1, pred_proc=1, true_proc=1),
        Job(id=1, release=1, pred_proc=1, true_proc=1),
        Job(id=0, release=3, pred_proc=1, true_proc=1),
    ]
    inst = make_instance(jobs, 1)
    assert [j.id for j in inst.jobs] == [1, 2, 0]
    assert inst.unweighted


def test_make_instance_empty():
    inst = make_instance([], 2)
    assert inst.n == 0
    assert inst.mu == 2


def test_make_instance_errors():
    with pytest.raises(DuplicateId):
        make_instance([Job(id=0, release=0, pred_proc=1, true_proc=1)] * 2, 1)
    with pytest.raises(NonPositiveField):
        make_instance([Job(id=0, release=0, pred_proc=1, true_proc=1, weight=0)], 1)
    with pytest.raises(NonPositiveField):
        make_instance([Job(id=0, release=-1, pred_proc=1, true_proc=1)], 1)
    with pytest.raises(DistortionViolated) as e:
        make_instance([Job(id=7, release=0, pred_proc=4, true_proc=8)], 2)
    assert e.value.job_id == 7


def test_instance_stats():
    inst = instance([(0, 1, 1, 1), (0, 4, 4, 8), (2, 2, 2, 2)])
    stats = instance_stats(inst)
    print(f"{stats=}")
    assert stats.ratio_P == 4
    assert stats.ratio_W == 8
    assert stats.ratio_D == 2
    with pytest.raises(EmptyInstance):
        instance_stats(make_instance([], 1))


def test_round_weights():
    inst = instance([(0, 1, 1, 3), (0, 1, 1, Fraction(1, 3)), (0, 1, 1, 4)])
    rounded = round_weights(inst)
    assert [j.weight for j in rounded.jobs] == [4, Fraction(1, 2), 4]
    assert round_weights(rounded) == rounded


def test_fingerprint():
    a = instance([(0, 1, 1), (1, 2, 3)], mu=2)
    b = instance([(0, 1, 1), (1, 2, 3)], mu=2)
    c = instance([(0, 1, 1), (1, 2, 3)], mu=3)
    assert fingerprint(a) == fingerprint(b)
    assert fingerprint(a) != fingerprint(c)
    assert len(fingerprint(a)) == 16


@pytest.mark.parametrize(
    "text, expected",
    [("3", Fraction(3)), ("3/6", Fraction(1, 2)), ("-2/4", Fraction(-1, 2)), (" 7 ", Fraction(7))],
)
def test_parse_rat(text, expected):
    assert parse_rat(text) == expected


@pytest.mark.parametrize("text", ["1.5", "1/0", "a", "", "1/2/3"])
def test_parse_rat_invalid(text):
    with pytest.raises(ValueError):
        parse_rat(text)


def test_format_rat():
    assert format_rat(Fraction(3)) == "3"
    assert format_rat(Fraction(3), always_den=True) == "3/1"
    assert format_rat(Fraction(6, 4)) == "3/2"


def test_instance_file(datadir):
    os.chdir(datadir)
    inst = io.load_instance("small.sppt")
    print(f"{inst=}")
    assert inst.n == 4
    assert inst.mu == 2
    assert inst.jobs[3].true_proc == Fraction(3, 2)
    io.store_instance(inst, "copy.sppt")
    with open("copy.sppt") as inf:
        text = inf.read()
    assert text.splitlines()[0] == "sppt-instance v1 mu=2/1"
    assert text.splitlines()[4] == "3 3 1 3/2 1"
    assert io.load_instance("copy.sppt") == inst


@pytest.mark.parametrize(
    "text",
    [
        "",
        "sppt-instance mu=2\n0 0 1 1 1\n",
        "sppt-instance v1 mu=2/1\n0 0 1 1\n",
        "sppt-instance v1 mu=2/1\n0 0 1.5 1 1\n",
        "sppt-instance v1 mu=x\n",
    ],
)
def test_instance_file_invalid(text):
    with pytest.raises(InstanceFormatError):
        io.loads_instance(text)


def test_instance_file_missing(datadir):
    os.chdir(datadir)
    with pytest.raises(InstanceFormatError):
        io.load_instance("nothere.sppt")


def test_settings_defaults(datadir):
    settings = io.load_settings(datadir)
    assert settings.oracle.max_jobs == 5
    assert settings.verify.micro_max_n == 3


@pytest.mark.parametrize("seed", range(5))
def test_rat_arithmetic(seed):
    rng = make_rng(seed)
    for a, b, c in zip(rats(rng, 50), rats(rng, 50), rats(rng, 50)):
        assert (a / b) * (b / a) == 1
        assert a + b == b + a
        assert (a * b) * c == a * (b * c)
        assert (a + b) - b == a


@pytest.mark.parametrize("base", [2, Fraction(3, 2), 38])
def test_floor_log_random_powers(base):
    rng = make_rng(7)
    base = Fraction(base)
    for k in rng.integers(-20, 21, 40):
        k = int(k)
        eps = Fraction(int(rng.integers(1, 1000)), 1000) * (base - 1)
        assert floor_log(base**k, base) == k
        assert floor_log(base**k * (1 + eps), base) == k


@pytest.mark.parametrize("base", [2, 3, Fraction(5, 4)])
def test_ceil_to_power_ratio(base):
    rng = make_rng(11)
    for value in rats(rng, 100):
        k, rounded = ceil_to_power(value, base)
        assert rounded == Fraction(base) ** k
        assert 1 <= rounded / value < base


def single(mu, **fields):
    job = dict(id=0, release=0, weight=1) | fields
    return make_instance([Job(**job)], mu)


@pytest.mark.parametrize("seed", range(3))
def test_make_instance_boundaries(seed):
    rng = make_rng(seed)
    for _ in range(30):
        pred = Fraction(int(rng.integers(1, 100)), int(rng.integers(1, 10)))
        mu = 1 + Fraction(int(rng.integers(1, 20)), int(rng.integers(1, 10)))
        eps = pred / 1000
        single(mu, pred_proc=pred, true_proc=pred)
        single(mu, pred_proc=pred, true_proc=mu * pred - eps)
        single(mu, pred_proc=pred, true_proc=pred, weight=eps)
        single(1, pred_proc=pred, true_proc=pred)
        with pytest.raises(DistortionViolated):
            single(mu, pred_proc=pred, true_proc=pred - eps)
        with pytest.raises(DistortionViolated):
            single(mu, pred_proc=pred, true_proc=mu * pred)
        with pytest.raises(DistortionViolated):
            single(1, pred_proc=pred, true_proc=pred + eps)
        with pytest.raises(NonPositiveField):
            single(mu, pred_proc=pred, true_proc=pred, release=-eps)
        with pytest.raises(NonPositiveField):
            single(mu, pred_proc=pred, true_proc=pred, weight=0)
        with pytest.raises(NonPositiveField):
            single(mu, pred_proc=0, true_proc=0)
        with pytest.raises(NonPositiveField):
            single(1 - eps / pred, pred_proc=pred, true_proc=pred)


def test_instance_file_not_utf8(datadir):
    os.chdir(datadir)
    with open("binary.sppt", "wb") as out:
        out.write(b"sppt-instance v1 mu=1/1\n0 0 1 1 \xff\n")
    with pytest.raises(InstanceFormatError):
        io.load_instance("binary.sppt")
