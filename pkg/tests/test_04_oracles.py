import pytest
from fractions import Fraction

from flowsched.engine import simulate
from flowsched.errors import NonIntegerData, TooLarge, WeightedInstance
from flowsched.models import OracleLimits, RandomSpec
from flowsched.oracles import (
    lower_bound_flow,
    optimal_weighted_small,
    reference,
    srpt,
    srpt_on_predictions,
)
from flowsched.policies import REGISTRY, make_policy, policy_to_interface
from flowsched.workloads import enumerate_micro, gen_random

from .utils import instance


def test_srpt_example():
    inst = instance([(0, 4, 4), (1, 1, 1)])
    result, series = srpt(inst)
    assert result.flow_unweighted == 6
    assert series.value == 6
    assert series.at(Fraction(1, 2)) == (1, 1, 4)
    assert series.at(Fraction(1))[0] == 2
    assert series.at(Fraction(2))[0] == 1


def test_srpt_rejects_weights():
    with pytest.raises(WeightedInstance):
        srpt(instance([(0, 1, 1, 2)]))
    with pytest.raises(WeightedInstance):
        srpt_on_predictions(instance([(0, 1, 1, 2)]))


def test_weighted_optimum():
    inst = instance([(0, 1, 1, 10), (0, 2, 2, 1)])
    value, series = optimal_weighted_small(inst)
    print(f"{value=}")
    assert value == 13
    assert series.times == [0, 1, 2, 3]
    assert series.weight == [11, 1, 1, 0]
    assert series.integral_weight() == 13


@pytest.mark.parametrize(
    "rows, expected",
    [
        ([(0, 1, 1), (0, 1, 1), (0, 1, 1)], 6),
        ([(2, 3, 3, 2)], 6),
        ([(0, 2, 2, 1), (1, 1, 1, 4)], 7),
        ([(0, 3, 3, 1), (5, 1, 1, 1)], 4),
    ],
)
def test_weighted_optimum_cases(rows, expected):
    value, _ = optimal_weighted_small(instance(rows))
    assert value == expected


def test_weighted_optimum_limits():
    with pytest.raises(TooLarge):
        optimal_weighted_small(instance([(0, 1, 1, 2)] * 6))
    with pytest.raises(TooLarge):
        optimal_weighted_small(instance([(0, 25, 25, 2)]))
    with pytest.raises(NonIntegerData):
        optimal_weighted_small(instance([(Fraction(1, 2), 1, 1, 2)]))
    with pytest.raises(NonIntegerData):
        optimal_weighted_small(instance([(0, Fraction(1, 2), Fraction(1, 2), 2)]))


def test_weighted_optimum_agrees_with_srpt():
    limits = OracleLimits(half_grid_volume=0)
    for inst in enumerate_micro(max_n=2, weights=(1,)):
        value, _ = optimal_weighted_small(inst, limits)
        result, _ = srpt(inst)
        assert value == result.flow_weighted


def test_reference_kinds():
    ref = reference(instance([(0, 4, 4), (1, 1, 1)]))
    assert ref.kind == "srpt"
    assert ref.value == 6
    ref = reference(instance([(0, 1, 1, 10), (0, 2, 2, 1)]))
    assert ref.kind == "exact"
    assert ref.value == 13
    ref = reference(instance([(Fraction(1, 2), 1, 1, 3), (0, 2, 2, 1)]))
    assert ref.kind == "lower-bound"
    assert ref.value == 5
    assert ref.series is None


def test_lower_bound():
    inst = instance([(0, 1, 1, 10), (0, 2, 2, 1)])
    assert lower_bound_flow(inst) == 12
    assert lower_bound_flow(inst) <= optimal_weighted_small(inst)[0]


def test_srpt_is_best_on_exact_predictions():
    inst = instance([(0, 3, 3), (1, 1, 1), (1, 2, 2), (3, 1, 1)])
    clairvoyant, _ = srpt(inst)
    predicted = srpt_on_predictions(inst)
    assert predicted.flow_unweighted == clairvoyant.flow_unweighted
    for name in ("two-bins", "density-weight", "superbins"):
        result = simulate(inst, make_policy(name, inst))
        assert result.flow_weighted >= clairvoyant.flow_weighted


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("mu", [1, 2])
def test_weighted_optimum_below_policies(seed, mu):
    spec = RandomSpec(
        n=4,
        seed=seed,
        mu=mu,
        anchor="true",
        proc_range=(1, 4),
        release_window=4,
        weights=[1, 2, 5],
    )
    inst = gen_random(spec)
    value, _ = optimal_weighted_small(inst)
    print(f"{value=}")
    assert lower_bound_flow(inst) <= value
    for name in sorted(REGISTRY):
        if not policy_to_interface(name).weighted and not inst.unweighted:
            continue
        result = simulate(inst, make_policy(name, inst))
        assert value <= result.flow_weighted, name


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("mu", [1, Fraction(3, 2), 4])
def test_srpt_below_policies(seed, mu):
    spec = RandomSpec(n=25, seed=seed, mu=mu, release_window=20, proc_denominator=3)
    inst = gen_random(spec)
    clairvoyant, _ = srpt(inst)
    for name in sorted(REGISTRY):
        result = simulate(inst, make_policy(name, inst))
        assert clairvoyant.flow_unweighted <= result.flow_unweighted, name
