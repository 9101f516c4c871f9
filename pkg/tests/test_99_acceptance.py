import csv
import os
import pytest

from flowsched import verify

from .utils import flowsched


def rows(path="verify.csv"):
    with open(path, newline="") as inf:
        return list(csv.DictReader(inf))


@pytest.mark.parametrize(
    "criterion",
    ["duality", "unweighted", "weighted", "adversary", "semiclairvoyant", "mutation"],
)
def test_criterion(datadir, criterion):
    os.chdir(datadir)
    ret = verify.cmd_verify(only=criterion, jobs=1, out=".", appdir=".")
    print(f"{ret=}")
    assert ret.success
    assert ret.code == 0
    (row,) = rows()
    assert row["name"] == criterion
    assert row["status"] == "pass"


def test_adversary_ratio(datadir):
    os.chdir(datadir)
    ret = verify.cmd_verify(only="adversary", jobs=1, out=".", appdir=".")
    assert ret.success
    assert ret.data[0]["detail"].startswith("ratio ")
    assert float(ret.data[0]["detail"].split()[1]) >= 1.7


def test_mutation_fails_suite(datadir):
    os.chdir(datadir)
    ret = verify.cmd_verify(only="unweighted", mutate=True, jobs=1, out=".", appdir=".")
    print(f"{ret=}")
    assert not ret.success
    assert ret.code == 3
    assert rows()[0]["status"] == "fail"


def test_unknown_criterion(datadir):
    os.chdir(datadir)
    ret = verify.cmd_verify(only="duality,speed", out=".", appdir=".")
    assert ret.code == 2


def test_verify_parallel(datadir):
    os.chdir(datadir)
    ret = verify.cmd_verify(only="duality,semiclairvoyant", jobs=2, out=".", appdir=".")
    assert ret.success
    assert [r["criterion"] for r in rows()] == ["1", "7"]


def test_cli_verify(datadir):
    os.chdir(datadir)
    ret = flowsched("verify", "--only", "duality", "-j", "1", "-o", ".", "-A", ".")
    assert ret.returncode == 0
    assert "1 of 1 criteria passed" in ret.stdout
    ret = flowsched(
        "verify", "--only", "unweighted", "--mutate", "-j", "1", "-o", ".", "-A", "."
    )
    assert ret.returncode == 3
