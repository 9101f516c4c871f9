import pytest
from fractions import Fraction

from flowsched.analysis import SnapshotMonitor, check_bin_structure, check_no_violations
from flowsched.engine import simulate
from flowsched.errors import (
    CompletedNonTop,
    ConfigError,
    InvalidBase,
    UnknownJob,
    WeightedInstance,
)
from flowsched.policies import REGISTRY, make_policy, policy_to_interface
from flowsched.policy import density_weight, srpt, superbins, two_bins
from flowsched.policy.density_weight import classify
from flowsched.policy.two_bins import BinPair

from .utils import instance, view


def ids(jobs):
    return [j.id for j in jobs]


def test_rotation():
    a, b, q = view(0, 10), view(1, 1), view(2, 15)
    pair = BinPair(Fraction(2))
    pair.F = [b, a]
    pair.P = [view(10, 1), view(11, 1), view(12, 1)]
    notes = pair.insert(q)
    print(f"{notes=}")
    assert notes == [("Rotate", 2)]
    # priorities are positions + 1: q=1, a=2, b=3
    assert ids(pair.F) == [2, 0, 1]


def test_rotation_disabled():
    a, b, q = view(0, 10), view(1, 1), view(2, 15)
    pair = BinPair(Fraction(2), rotate=False)
    pair.F = [b, a]
    pair.P = [view(10, 1), view(11, 1), view(12, 1)]
    assert pair.insert(q) == []
    assert ids(pair.F) == [1, 0, 2]


def test_no_violation_on_release():
    pair = BinPair(Fraction(2))
    pair.F = [view(0, 5)]
    pair.P = [view(10, 1), view(11, 1)]
    assert pair.violators(view(1, 6)) == []
    assert pair.insert(view(1, 6)) == []
    assert ids(pair.F) == [0, 1]


def test_equal_predictions():
    pair = BinPair(Fraction(2))
    pair.F = [view(0, 3)]
    pair.P = [view(10, 1), view(11, 1)]
    assert pair.violators(view(1, 3)) == []
    pair = BinPair(Fraction(1))
    pair.F = [view(0, 3)]
    assert pair.violators(view(1, 3)) == []
    assert pair.violators(view(1, 4)) == [0]


def test_transfer():
    pair = BinPair(Fraction(2))
    pair.F = [view(0, 1), view(1, 1), view(2, 1)]
    pair.P = [view(3, 1)]
    assert pair.transfer_if_heavy() == [("Transfer", 2)]
    assert ids(pair.F) == [0, 1]
    assert ids(pair.P) == [3, 2]


def test_two_bins_release_into_empty():
    pol = two_bins.PolicyInterface(mu=2)
    pol.on_release(view(0, 4), Fraction(0))
    assert pol.drain_notes() == [("Transfer", 0)]
    assert ids(pol.bins.P) == [0]
    assert pol.select(Fraction(0)) == 0


def test_two_bins_lifo():
    pol = two_bins.PolicyInterface(mu=2)
    for k in range(4):
        pol.on_release(view(k, 1), Fraction(0))
    # releases 0 and 2 overflow F and are moved to P in that order
    assert ids(pol.bins.P) == [0, 2]
    assert pol.select(Fraction(0)) == 2


def test_two_bins_complete():
    pol = two_bins.PolicyInterface(mu=2)
    pol.on_release(view(0, 4), Fraction(0))
    pol.on_release(view(1, 4), Fraction(1))
    pol.drain_notes()
    with pytest.raises(CompletedNonTop):
        pol.on_complete(1, Fraction(2))
    with pytest.raises(UnknownJob):
        pol.on_complete(5, Fraction(2))
    pol.on_complete(0, Fraction(4))
    assert pol.drain_notes() == [("Transfer", 1)]
    assert pol.select(Fraction(4)) == 1


def test_two_bins_rejects_weights():
    pol = two_bins.PolicyInterface(mu=2)
    with pytest.raises(WeightedInstance):
        pol.on_release(view(0, 4, weight=2), Fraction(0))
    inst = instance([(0, 1, 1, 2)])
    with pytest.raises(WeightedInstance):
        make_policy("two-bins", inst)


@pytest.mark.parametrize("weight, cls", [(3, 2), (4, 2), (1, 0), (Fraction(1, 3), -1)])
def test_superbin_class(weight, cls):
    pol = superbins.PolicyInterface(mu=2)
    pol.on_release(view(0, 1, weight=weight), Fraction(0))
    assert list(pol.superbins) == [cls]


def test_superbins_select():
    pol = superbins.PolicyInterface(mu=2)
    pol.on_release(view(0, 1, weight=4), Fraction(0))
    for k in range(1, 6):
        pol.on_release(view(k, 1), Fraction(0))
    assert len(pol.superbins[0].P) == 3
    assert pol.select(Fraction(0)) == 0


def test_superbins_tie_prefers_heavier_class():
    pol = superbins.PolicyInterface(mu=2)
    pol.on_release(view(0, 1, weight=4), Fraction(0))
    for k in range(1, 8):
        pol.on_release(view(k, 1), Fraction(0))
    assert len(pol.superbins[0].P) == 4
    assert pol.select(Fraction(0)) == 0


def test_superbins_drop_empty():
    pol = superbins.PolicyInterface(mu=2)
    pol.on_release(view(0, 1), Fraction(0))
    assert pol.select(Fraction(0)) == 0
    pol.on_complete(0, Fraction(1))
    assert pol.superbins == {}
    assert pol.select(Fraction(1)) is None


def test_superbins_snapshot_rounds_weights():
    pol = superbins.PolicyInterface(mu=2)
    pol.on_release(view(0, 1, weight=3), Fraction(0))
    snap = pol.snapshot(Fraction(0))
    ((cls, pair),) = snap.bin_pairs()
    assert cls == 2
    assert pair.P[0].weight == 4


@pytest.mark.parametrize(
    "weight, pred, wclass, eclass",
    [(1, 8, 0, 3), (2, 3, 1, -4), (38, 38, 1, 0)],
)
def test_classify(weight, pred, wclass, eclass):
    c = classify(view(0, pred, weight=weight), 38)
    print(f"{c=}")
    assert (c.wclass, c.eclass) == (wclass, eclass)


def test_density_select():
    pol = density_weight.PolicyInterface(mu=2)
    assert pol.lam == 38
    pol.on_release(view(0, 152, weight=2), Fraction(0))
    pol.on_release(view(1, 1), Fraction(0))
    assert pol.table[0].eclass == 2
    assert pol.table[1].eclass == 0
    assert pol.select(Fraction(0)) == 0
    assert pol.choice == (1, 2, 1)


def test_density_prefers_partial():
    pol = density_weight.PolicyInterface(mu=2)
    pol.on_release(view(0, 8), Fraction(0))
    pol.on_release(view(1, 8, release=1), Fraction(1))
    assert pol.select(Fraction(1)) == 0
    pol.on_progress(1, Fraction(2), Fraction(1))
    assert pol.select(Fraction(2)) == 1
    snap = pol.snapshot(Fraction(2))
    assert [c.partial for c in snap.jobs] == [False, True]


def test_density_invalid_base():
    with pytest.raises(InvalidBase):
        density_weight.PolicyInterface(mu=2, lam=1)
    with pytest.raises(InvalidBase):
        density_weight.PolicyInterface(mu=2, ratio_base=1)


def test_srpt_on_predictions_clamps():
    inst = instance([(0, 2, 3), (Fraction(5, 2), Fraction(1, 4), Fraction(1, 4))], mu=2)
    result = simulate(inst, make_policy("srpt-pred", inst))
    print(f"{result.trace=}")
    assert result.completion == {0: 3, 1: Fraction(13, 4)}
    assert "Preempt" not in [r.kind for r in result.trace]
    assert result.flow_unweighted == Fraction(15, 4)


def test_srpt_needs_true_times():
    pol = srpt.PolicyInterface(mu=1)
    with pytest.raises(UnknownJob):
        pol.on_release(view(0, 1), Fraction(0))


def test_scripted_ranks():
    inst = instance([(0, 1, 1), (0, 2, 2), (0, 3, 3)])
    pol = srpt.ScriptedPolicy(
        mu=1,
        true_procs={j.id: j.true_proc for j in inst.jobs},
        ranks={2: 0, 0: 1},
    )
    result = simulate(inst, pol)
    assert result.completion == {2: 3, 0: 4, 1: 6}


def test_registry():
    for name in REGISTRY:
        cls = policy_to_interface(name)
        assert cls.name == name
    with pytest.raises(ConfigError):
        policy_to_interface("fifo")


def test_make_policy_settings():
    inst = instance([(0, 1, 1)], mu=2)
    pol = make_policy("density-weight", inst, settings={"density-weight": {"lam": 5}})
    assert pol.lam == 5
    pol = make_policy("two-bins", inst, mu=Fraction(3))
    assert pol.mu == 3


@pytest.mark.parametrize("name", ["two-bins", "superbins"])
def test_completion_below_same_instant_transfer(name):
    inst = instance([(0, 1, 1), (0, 1, 1), (1, 1, 1)], mu=1)
    result = simulate(inst, make_policy(name, inst))
    print(f"{result.completion=}")
    assert result.completion == {0: 1, 2: 2, 1: 3}
    assert result.flow_unweighted == 5
    kinds = [(r.kind, r.job_id) for r in result.trace if r.time == 1]
    assert kinds[:3] == [("Release", 2), ("Transfer", 2), ("Complete", 0)]


def test_served_job_removed_below_top():
    pair = BinPair(Fraction(1))
    pair.insert(view(0, 1))
    pair.insert(view(1, 1))
    assert pair.top() == 0
    assert pair.insert(view(2, 1)) == [("Transfer", 2)]
    assert pair.remove(0) == []
    assert ids(pair.F) == [1]
    assert ids(pair.P) == [2]
    assert pair.served is None
    with pytest.raises(CompletedNonTop):
        pair.remove(1)


@pytest.mark.parametrize("seed", range(3))
def test_two_bins_equal_predictions_perfect(seed):
    rows = [(r, 2, 2) for r in (0, 0, 0, 1, 1, 2, 3, 3)]
    rows += [(seed, 1, 1), (seed + 1, 4, 4), (2, 2, 2), (2, 2, 2)]
    inst = instance(rows, mu=1)
    monitors = [SnapshotMonitor(check_no_violations), SnapshotMonitor(check_bin_structure)]
    result = simulate(inst, make_policy("two-bins", inst), monitors)
    for monitor in monitors:
        print(f"{monitor.report=}")
        assert monitor.report.passed
    assert len(result.completion) == len(rows)
