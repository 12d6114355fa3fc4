"""Single survival trees with Nelson-Aalen terminal nodes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _search
from .splitrules import RULES
from .survival import StepFunction, _nelson_aalen_arrays, nelson_aalen

__all__ = [
    "Internal",
    "StepFunction",
    "Terminal",
    "TreeConfig",
    "TreeNode",
    "grow_tree",
    "nelson_aalen",
    "tree_chf",
]


@dataclass(frozen=True)
class TreeConfig:
    """Tree growing controls.

    ``mtry=None`` means ceil(sqrt(p)); values above p are clamped.
    Event and size counts include bootstrap multiplicity.
    """

    mtry: int | None = None
    min_node_events: int = 3
    min_node_size: int = 3
    split_rule: str = "logrank"
    max_depth: int | None = None

    def __post_init__(self):
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_node_events < 1 or self.min_node_size < 1:
            raise ValueError("min_node_events and min_node_size must be >= 1")
        if self.split_rule not in RULES:
            raise ValueError(f"split_rule must be one of {RULES}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    def resolve_mtry(self, p: int) -> int:
        m = math.ceil(math.sqrt(p)) if self.mtry is None else self.mtry
        return max(1, min(m, p))

    def to_dict(self):
        return {
            "mtry": self.mtry,
            "min_node_events": self.min_node_events,
            "min_node_size": self.min_node_size,
            "split_rule": self.split_rule,
            "max_depth": self.max_depth,
        }


@dataclass(frozen=True, eq=False)
class Terminal:
    chf: StepFunction
    member_count: int


@dataclass(frozen=True, eq=False)
class Internal:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Internal, Terminal]


class _Grower:
    def __init__(self, X, times, events, config: TreeConfig, rng):
        self.X = X
        self.times = times
        self.events = events.astype(float)
        self.config = config
        self.rng = rng
        self.p = X.shape[1]
        self.mtry = config.resolve_mtry(self.p)
        self.rule = _search.LOGRANK if config.split_rule == "logrank" else _search.DEVIANCE

    def leaf(self, idx, w):
        knots, values = _nelson_aalen_arrays(self.times[idx], self.events[idx], w)
        return Terminal(StepFunction(knots, values), int(round(w.sum())))

    def grow(self, idx, w, depth):
        cfg = self.config
        t, e = self.times[idx], self.events[idx]
        n_events = float(np.sum(w * e))
        if (
            n_events < cfg.min_node_events
            or w.sum() < cfg.min_node_size
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
            or idx.size < 2
        ):
            return self.leaf(idx, w)

        features = np.sort(self.rng.choice(self.p, self.mtry, replace=False))
        event_times = np.unique(t[e == 1])
        rank = np.searchsorted(event_times, t, side="right")
        ev_mask = e == 1
        d = np.bincount(rank[ev_mask] - 1, weights=w[ev_mask], minlength=event_times.size)
        counts = np.bincount(rank, weights=w, minlength=event_times.size + 1)
        r = np.cumsum(counts[::-1])[::-1][1:]
        if self.rule == _search.DEVIANCE:
            hazard = np.concatenate([[0.0], np.cumsum(d / r)])
            lam0 = hazard[rank]
        else:
            lam0 = np.zeros(idx.size)

        cols = np.ascontiguousarray(self.X[np.ix_(idx, features)].T)
        f_pos, threshold, score = _search.best_split(cols, rank.astype(np.int64), e, w, d, r, lam0, self.rule)
        if f_pos < 0 or not score > 0:
            return self.leaf(idx, w)

        feature = int(features[f_pos])
        go_left = self.X[idx, feature] <= threshold
        return Internal(
            feature,
            float(threshold),
            self.grow(idx[go_left], w[go_left], depth + 1),
            self.grow(idx[~go_left], w[~go_left], depth + 1),
        )


def grow_tree(data, row_indices, config: TreeConfig, rng: np.random.Generator) -> TreeNode:
    """Grow one tree on the bag ``row_indices`` (repeats allowed) of ``data``.

    At each node ``mtry`` features are drawn without replacement and the
    best split by ``config.split_rule`` over all midpoints is applied.
    """
    bag = np.asarray(row_indices, dtype=np.int64)
    if bag.size == 0:
        raise ValueError("empty bag")
    idx, mult = np.unique(bag, return_counts=True)
    if not np.any(data.events[idx] == 1):
        raise ValueError("bag contains no events")
    grower = _Grower(np.asarray(data.X, dtype=float), np.asarray(data.times, dtype=float),
                     np.asarray(data.events), config, rng)
    return grower.grow(idx, mult.astype(float), 0)


def tree_chf(tree: TreeNode, x) -> StepFunction:
    """CHF of the terminal node that ``x`` falls in (``<=`` goes left)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    node = tree
    while isinstance(node, Internal):
        if node.feature_index >= x.size:
            raise ValueError(f"dimension mismatch: tree uses feature {node.feature_index}, x has p={x.size}")
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.chf


def iter_nodes(tree: TreeNode):
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Internal):
            stack.extend((node.right, node.left))


def n_leaves(tree: TreeNode) -> int:
    return sum(isinstance(n, Terminal) for n in iter_nodes(tree))


def depth(tree: TreeNode) -> int:
    if isinstance(tree, Terminal):
        return 0
    return 1 + max(depth(tree.left), depth(tree.right))
