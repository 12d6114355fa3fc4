from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kirsf.data import SurvivalDataset
from kirsf.survival import NodeSample, StepFunction, nelson_aalen
from kirsf.tree import Internal, Terminal, TreeConfig, depth, grow_tree, iter_nodes, n_leaves, tree_chf

from . import oracles


def test_nelson_aalen_hand_examples():
    H = nelson_aalen(NodeSample([1, 2, 3], [1, 0, 1]))
    np.testing.assert_array_equal(H.knots, [1, 3])
    assert H.values[0] == pytest.approx(1 / 3, abs=1e-16)
    assert H.values[1] == pytest.approx(4 / 3, abs=1e-15)

    assert nelson_aalen(NodeSample([5, 7], [0, 0])).is_zero

    H = nelson_aalen(NodeSample([2, 2, 4], [1, 1, 1]))
    np.testing.assert_array_equal(H.knots, [2, 4])
    assert H.values[0] == pytest.approx(2 / 3, abs=1e-16)
    assert H.values[1] == pytest.approx(5 / 3, abs=1e-15)


def test_step_function_evaluation():
    H = StepFunction([1.0, 3.0], [0.5, 2.0])
    np.testing.assert_array_equal(H([0.0, 1.0, 2.9, 3.0, 10.0]), [0, 0.5, 0.5, 2.0, 2.0])
    assert StepFunction.zero()(5.0) == 0.0
    with pytest.raises(ValueError):
        StepFunction([2.0, 1.0], [0.0, 1.0])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 1)), min_size=1, max_size=25))
def test_nelson_aalen_matches_oracle_and_is_monotone(pairs):
    t = [float(a) for a, _ in pairs]
    e = [b for _, b in pairs]
    H = nelson_aalen(NodeSample(t, e))
    want = oracles.nelson_aalen_points(t, e)
    assert H.knots.tolist() == sorted(want)
    for k, v in zip(H.knots, H.values):
        assert v == pytest.approx(float(want[k]), rel=1e-12)
    assert np.all(np.diff(H.values) >= 0)


def test_nelson_aalen_weights_are_multiplicities():
    w = nelson_aalen(NodeSample([1.0, 2.0, 3.0], [1, 1, 0], [3, 1, 2]))
    d = nelson_aalen(NodeSample([1.0] * 3 + [2.0] + [3.0] * 2, [1, 1, 1, 1, 0, 0]))
    np.testing.assert_allclose(w.values, d.values, rtol=1e-15)


def _cfg(**kw):
    return TreeConfig(**{"min_node_events": 1, "min_node_size": 1, **kw})


def test_identical_covariates_give_single_terminal():
    data = SurvivalDataset(np.arange(1.0, 11.0), np.ones(10, int), np.ones((10, 3)))
    tree = grow_tree(data, np.arange(10), _cfg(), np.random.default_rng(0))
    assert isinstance(tree, Terminal)
    assert tree.member_count == 10


def test_separating_feature_is_chosen_at_root():
    rng = np.random.default_rng(2024)
    n = 40
    x = np.concatenate([rng.uniform(0, 1, n // 2), rng.uniform(2, 3, n // 2)])
    times = np.concatenate([rng.exponential(1 / 0.1, n // 2), rng.exponential(1 / 3.0, n // 2)])
    data = SurvivalDataset(times, np.ones(n, int), x.reshape(-1, 1))
    tree = grow_tree(data, np.arange(n), _cfg(), np.random.default_rng(0))
    assert isinstance(tree, Internal)
    assert tree.feature_index == 0
    assert 1.0 <= tree.threshold <= 2.0
    lo, hi = tree_chf(tree, [0.5]), tree_chf(tree, [2.5])
    assert lo is not hi
    assert hi(1.0) > lo(1.0)


def test_tree_deterministic_under_seed():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 5))
    data = SurvivalDataset(rng.exponential(size=60), rng.integers(0, 2, 60), X)
    bag = rng.integers(0, 60, 60)

    def fingerprint(tree):
        return [
            (n.feature_index, n.threshold) if isinstance(n, Internal) else (n.chf.knots.tobytes(), n.chf.values.tobytes())
            for n in iter_nodes(tree)
        ]

    a = grow_tree(data, bag, TreeConfig(), np.random.default_rng(99))
    b = grow_tree(data, bag, TreeConfig(), np.random.default_rng(99))
    assert fingerprint(a) == fingerprint(b)
    assert n_leaves(a) >= 1 and depth(a) >= 0


def test_stopping_rules_are_respected():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 3))
    data = SurvivalDataset(rng.exponential(size=80), rng.integers(0, 2, 80), X)
    tree = grow_tree(data, np.arange(80), TreeConfig(min_node_events=5, min_node_size=10), np.random.default_rng(0))
    for node in iter_nodes(tree):
        if isinstance(node, Terminal):
            assert node.member_count >= 1
    stump = grow_tree(data, np.arange(80), TreeConfig(max_depth=1), np.random.default_rng(0))
    assert depth(stump) <= 1


def test_routing_single_leaf_and_threshold_goes_left():
    leaf = Terminal(StepFunction([1.0], [0.5]), 3)
    assert tree_chf(leaf, [123.0]) is leaf.chf
    left = Terminal(StepFunction([1.0], [1.0]), 1)
    right = Terminal(StepFunction([1.0], [2.0]), 1)
    tree = Internal(1, 0.25, left, right)
    assert tree_chf(tree, [9.0, 0.25]) is left.chf
    assert tree_chf(tree, [9.0, 0.2500001]) is right.chf
    with pytest.raises(ValueError, match="dimension"):
        tree_chf(tree, [1.0])


def test_leaves_use_bag_multiplicities():
    data = SurvivalDataset([1.0, 2.0, 3.0], [1, 1, 0], np.zeros((3, 1)))
    tree = grow_tree(data, [0, 0, 0, 1, 2, 2], _cfg(), np.random.default_rng(0))
    assert isinstance(tree, Terminal)
    # r = 6 at t=1 with 3 deaths, r = 3 at t=2 with 1 death
    want = [Fraction(3, 6), Fraction(3, 6) + Fraction(1, 3)]
    np.testing.assert_allclose(tree.chf.values, [float(v) for v in want], rtol=1e-15)
    assert tree.member_count == 6


def test_bag_without_events_rejected():
    data = SurvivalDataset([1.0, 2.0], [0, 1], np.zeros((2, 1)))
    with pytest.raises(ValueError, match="no events"):
        grow_tree(data, [0, 0], TreeConfig(), np.random.default_rng(0))


def test_mtry_resolution():
    assert TreeConfig().resolve_mtry(20) == 5
    assert TreeConfig().resolve_mtry(100) == 10
    assert TreeConfig(mtry=50).resolve_mtry(3) == 3
    with pytest.raises(ValueError):
        TreeConfig(split_rule="gini")
