import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from innabs.abstraction import (
    Partition,
    abstract_network,
    alpha,
    averaged_weight,
    contiguous_partition,
    identity_partition,
    labs,
    layer_slice,
    rabs,
    random_partition,
    round_robin_partition,
    validate_partition,
)
from innabs.network import InnNetwork, Interval, random_network

from conftest import tiny


def worked_net():
    # 1 -> {a, b} -> {c, d} -> 1; a->c 7, b->c 10, a->d 8, b->d 11
    w = [np.ones((1, 2)), np.array([[7.0, 8.0], [10.0, 11.0]]), np.ones((2, 1))]
    return InnNetwork.from_concrete(w, [np.zeros(2), np.zeros(2), np.zeros(1)])


PAIRS = Partition((((0,),), ((0, 1),), ((0, 1),), ((0,),)))


def test_worked_example_full_merge():
    abs_net = abstract_network(worked_net(), PAIRS)
    assert abs_net.weight(1, 0, 0) == Interval(14.0, 22.0)


def test_worked_example_labs_then_rabs():
    net = worked_net()
    left = labs(net, 1, ((0, 1),))
    assert left.weight(0, 0, 0) == Interval(14.0, 20.0)
    assert left.weight(0, 0, 1) == Interval(16.0, 22.0)
    assert rabs(left, ((0, 1),)).weight(0, 0, 0) == Interval(14.0, 22.0)


def test_identity_partition_is_noop():
    net = random_network(np.random.default_rng(1), [3, 4, 5, 2], interval_width=0.2)
    assert abstract_network(net, identity_partition(net)).same_as(net)


def test_bias_hull_not_scaled():
    w = [np.ones((1, 2)), np.ones((2, 1))]
    net = InnNetwork.from_concrete(w, [np.array([-1.0, 3.0]), np.zeros(1)])
    part = Partition((((0,),), ((0, 1),), ((0,),)))
    assert abstract_network(net, part).bias(1, 0) == Interval(-1.0, 3.0)


def test_labs_examples():
    net = random_network(np.random.default_rng(2), [3, 2], interval_width=0.5)
    assert labs(net, 0, ((0,), (1,), (2,))).same_as(net)
    const = InnNetwork.from_concrete([np.full((3, 1), 2.5)], [np.zeros(1)])
    assert labs(const, 0, ((0, 1, 2),)).weight(0, 0, 0) == Interval(7.5, 7.5)


def test_rabs_examples():
    net = tiny([[[14, 20], [16, 22]]], [[0, 0], [-2, 5]])
    assert rabs(net, ((0,), (1,))).same_as(net)
    merged = rabs(net, ((0, 1),))
    assert merged.weight(0, 0, 0) == Interval(14.0, 22.0)
    assert merged.bias(1, 0) == Interval(-2.0, 5.0)
    with pytest.raises(ValueError):
        rabs(worked_net(), ((0,),))


def test_alpha_examples():
    assert alpha([3.0, 7.0], ((0, 1),)) == [Interval(3.0, 7.0)]
    assert alpha([3.0, 7.0], ((0,), (1,))) == [Interval(3.0, 3.0), Interval(7.0, 7.0)]
    assert alpha([4.0, 4.0, 4.0], ((0, 1, 2),)) == [Interval(4.0, 4.0)]


def test_validate_partition_examples():
    net = random_network(np.random.default_rng(3), [2, 3, 2])
    assert validate_partition(net, identity_partition(net)) == []
    dup = Partition((((0,), (1,)), ((0, 2), (2, 1)), ((0,), (1,))))
    assert any("2" in p for p in validate_partition(net, dup))
    merged_out = Partition((((0,), (1,)), ((0,), (1,), (2,)), ((0, 1),)))
    problems = validate_partition(net, merged_out, require_io_identity=True)
    assert problems
    assert validate_partition(net, merged_out, require_io_identity=False) == []


def test_partition_builders_balanced():
    net = random_network(np.random.default_rng(4), [2, 12, 7, 1])
    for part in (random_partition(net, 4, 0), contiguous_partition(net, 4), round_robin_partition(net, 4)):
        assert validate_partition(net, part) == []
        assert part.sizes == (2, 4, 4, 1)
        for groups in part.layers[1:-1]:
            lens = [len(g) for g in groups]
            assert max(lens) - min(lens) <= 1
    assert random_partition(net, 4, 9) == random_partition(net, 4, 9)
    assert random_partition(net, 20, 0).sizes == (2, 12, 7, 1)


@settings(max_examples=100, deadline=None)
@given(w=st.lists(st.floats(-5, 5), min_size=1, max_size=6), seed=st.integers(0, 1000))
def test_averaged_weight_in_scaled_hull(w, seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(0, 3, len(w))
    avg = averaged_weight(w, v)
    n = len(w)
    assert np.isclose(avg * v.mean(), np.dot(w, v), atol=1e-9)
    assert n * min(w) - 1e-9 <= avg <= n * max(w) + 1e-9


def test_layer_slice():
    net = worked_net()
    s = layer_slice(net, 1)
    assert s.k == 1 and s.layer_sizes == (2, 2)


def test_unscaled_marked_unsound():
    meta = abstract_network(worked_net(), PAIRS, scaled=False).meta
    assert meta["unsound"] and meta["abstraction"] == "unscaled-hull"
