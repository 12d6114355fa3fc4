"""Bootstrap ensembles of survival trees.

Every tree is grown from its own random stream derived from the master
seed and the tree index, so a forest does not depend on how the trees were
scheduled across workers.
"""
from __future__ import annotations

import gzip
import json
import zlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from joblib import Parallel, delayed

from .data import SurvivalDataset
from .survival import StepFunction
from .tree import Internal, Terminal, TreeConfig, TreeNode, grow_tree

FORMAT_NAME = "kirsf-forest"
FORMAT_VERSION = 1
# bootstrap redraws allowed when a bag has no events
_MAX_BAG_DRAWS = 1000


class ModelFormatError(ValueError):
    """Corrupt or unreadable serialized forest."""


class ModelVersionError(ModelFormatError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 1000
    tree: TreeConfig = field(default_factory=TreeConfig)
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    def to_dict(self):
        return {"n_trees": self.n_trees, "tree": self.tree.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(n_trees=d["n_trees"], tree=TreeConfig(**d["tree"]), seed=d["seed"])


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent stream for tree ``tree_index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed % 2**64, spawn_key=(tree_index,)))


class _FlatTree:
    """Preorder array form of a tree for vectorized routing."""

    def __init__(self, feature, threshold, left, right, leaves):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.leaf_slot = np.full(self.feature.size, -1, dtype=np.int64)
        self.leaves = leaves
        slot = 0
        for i, f in enumerate(self.feature):
            if f < 0:
                self.leaf_slot[i] = slot
                slot += 1

    @classmethod
    def from_tree(cls, tree: TreeNode):
        feature, threshold, left, right, leaves = [], [], [], [], []

        def visit(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            if isinstance(node, Terminal):
                leaves.append(node)
                return i
            feature[i] = node.feature_index
            threshold[i] = node.threshold
            left[i] = visit(node.left)
            right[i] = visit(node.right)
            return i

        visit(tree)
        return cls(feature, threshold, left, right, leaves)

    def to_tree(self) -> TreeNode:
        def build(i):
            if self.feature[i] < 0:
                return self.leaves[self.leaf_slot[i]]
            return Internal(int(self.feature[i]), float(self.threshold[i]), build(self.left[i]), build(self.right[i]))

        return build(0)

    def apply(self, X) -> np.ndarray:
        """Leaf slot for every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active[rows] = self.feature[node[rows]] >= 0
        return self.leaf_slot[node]


def _grow_trees(X, times, events, config: ForestConfig, tree_indices):
    data = SurvivalDataset(times, events, X)
    n = len(data)
    out = []
    for b in tree_indices:
        rng = tree_rng(config.seed, b)
        for _ in range(_MAX_BAG_DRAWS):
            bag = rng.integers(0, n, size=n)
            if data.events[bag].any():
                break
        else:
            raise RuntimeError(f"tree {b}: no bootstrap sample with an event")
        counts = np.bincount(bag, minlength=n)
        out.append((grow_tree(data, bag, config.tree, rng), counts))
    return out


@dataclass(frozen=True, eq=False)
class SurvivalForest:
    trees: tuple
    inbag_counts: np.ndarray
    event_time_grid: np.ndarray
    training_times: np.ndarray
    training_events: np.ndarray
    training_X: np.ndarray
    config: ForestConfig
    feature_names: tuple = ()

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def feature_dim(self) -> int:
        return self.training_X.shape[1]

    @cached_property
    def _flat(self):
        return [_FlatTree.from_tree(t) for t in self.trees]

    @cached_property
    def _leaf_grids(self):
        # leaf knots are training event times, so grid evaluation is exact
        return [np.array([leaf.chf(self.event_time_grid) for leaf in ft.leaves]).reshape(len(ft.leaves), -1)
                for ft in self._flat]

    @cached_property
    def _mortality_weights(self) -> np.ndarray:
        # number of training times T_j falling in [t_k, t_{k+1})
        pos = np.searchsorted(self.event_time_grid, self.training_times, side="right") - 1
        return np.bincount(pos[pos >= 0], minlength=self.event_time_grid.size).astype(float)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.feature_dim:
            raise ValueError(f"dimension mismatch: forest expects p={self.feature_dim}, got p={X.shape[1]}")
        return X

    def tree_chf_matrix(self, b: int, X) -> np.ndarray:
        X = self._check(X)
        return self._leaf_grids[b][self._flat[b].apply(X)]

    def chf_matrix(self, X) -> np.ndarray:
        """Ensemble CHF of every row of X on the event-time grid (m x N)."""
        X = self._check(X)
        total = np.zeros((X.shape[0], self.event_time_grid.size))
        for ft, grid in zip(self._flat, self._leaf_grids):
            total += grid[ft.apply(X)]
        return total / self.n_trees

    def oob_chf_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """OOB ensemble CHF for every training record and the number of OOB
        trees behind it; rows with zero OOB trees are NaN."""
        X = self.training_X
        total = np.zeros((X.shape[0], self.event_time_grid.size))
        n_oob = np.zeros(X.shape[0])
        for b, (ft, grid) in enumerate(zip(self._flat, self._leaf_grids)):
            oob = np.flatnonzero(self.inbag_counts[b] == 0)
            if oob.size:
                total[oob] += grid[ft.apply(X[oob])]
                n_oob[oob] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            return total / n_oob[:, None], n_oob

    def mortality(self, X) -> np.ndarray:
        """Ensemble mortality: ensemble CHF summed over all training times."""
        return self.chf_matrix(X) @ self._mortality_weights

    def oob_predicted_outcomes(self) -> np.ndarray:
        chf, _ = self.oob_chf_matrix()
        return chf.sum(axis=1)


def fit(data: SurvivalDataset, config: ForestConfig, n_jobs: int = 1) -> SurvivalForest:
    """Grow ``config.n_trees`` trees on bootstrap samples of size n."""
    data.require_events()
    n = len(data)
    if n < 2:
        raise ValueError("need at least two records to fit a forest")
    B = config.n_trees
    if n_jobs == 1 or B == 1:
        grown = _grow_trees(data.X, data.times, data.events, config, range(B))
    else:
        chunks = [c for c in np.array_split(np.arange(B), max(1, abs(n_jobs)) * 4) if c.size]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_grow_trees)(data.X, data.times, data.events, config, c.tolist()) for c in chunks
        )
        grown = [g for part in parts for g in part]
    trees = tuple(t for t, _ in grown)
    inbag = np.array([c for _, c in grown], dtype=np.int64)
    grid = np.unique(data.times[data.events == 1])
    return SurvivalForest(
        trees, inbag, grid, np.array(data.times), np.array(data.events), np.array(data.X), config, data.feature_names
    )


def ensemble_chf(forest: SurvivalForest, x) -> StepFunction:
    """Average of the tree CHFs at ``x`` on the training event-time grid."""
    return StepFunction(forest.event_time_grid, forest.chf_matrix(x)[0])


def oob_ensemble_chf(forest: SurvivalForest, train_index: int) -> StepFunction:
    """Average CHF over the trees whose bootstrap sample left out record ``train_index``."""
    oob_trees = np.flatnonzero(forest.inbag_counts[:, train_index] == 0)
    if oob_trees.size == 0:
        raise ValueError(f"no OOB trees for record {train_index}")
    x = forest.training_X[train_index:train_index + 1]
    total = sum(forest.tree_chf_matrix(b, x)[0] for b in oob_trees)
    return StepFunction(forest.event_time_grid, total / oob_trees.size)


def predicted_outcome(chf: StepFunction, grid) -> float:
    """Sum of ``chf`` over the grid points; larger means worse outcome."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    return float(np.sum(chf(grid)))


def ensemble_mortality(forest: SurvivalForest, x) -> float:
    return float(forest.mortality(x)[0])


# ---------------------------------------------------------------------------
# persistence


def _tree_to_dict(ft: _FlatTree):
    return {
        "feature": ft.feature.tolist(),
        "threshold": ft.threshold.tolist(),
        "left": ft.left.tolist(),
        "right": ft.right.tolist(),
        "leaf_count": [leaf.member_count for leaf in ft.leaves],
        "leaf_knots": [leaf.chf.knots.tolist() for leaf in ft.leaves],
        "leaf_values": [leaf.chf.values.tolist() for leaf in ft.leaves],
    }


def _tree_from_dict(d) -> TreeNode:
    leaves = [Terminal(StepFunction(k, v), int(c)) for k, v, c in zip(d["leaf_knots"], d["leaf_values"], d["leaf_count"])]
    ft = _FlatTree(d["feature"], d["threshold"], d["left"], d["right"], leaves)
    if int(np.sum(ft.feature < 0)) != len(leaves):
        raise ModelFormatError("tree leaf count does not match its node table")
    return ft.to_tree()


def forest_to_dict(forest: SurvivalForest) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": forest.config.to_dict(),
        "feature_names": list(forest.feature_names),
        "event_time_grid": forest.event_time_grid.tolist(),
        "training_times": forest.training_times.tolist(),
        "training_events": forest.training_events.tolist(),
        "training_X": forest.training_X.tolist(),
        "inbag_counts": forest.inbag_counts.tolist(),
        "trees": [_tree_to_dict(ft) for ft in forest._flat],
    }


def check_header(doc, name=FORMAT_NAME, version=FORMAT_VERSION):
    if not isinstance(doc, dict) or doc.get("format") != name:
        raise ModelFormatError(f"not a {name} payload")
    if doc.get("version") != version:
        raise ModelVersionError(f"{name} version {doc.get('version')!r} is not supported (this build reads version {version})")


def forest_from_dict(doc) -> SurvivalForest:
    check_header(doc)
    try:
        n = len(doc["training_times"])
        return SurvivalForest(
            tuple(_tree_from_dict(t) for t in doc["trees"]),
            np.array(doc["inbag_counts"], dtype=np.int64).reshape(len(doc["trees"]), n),
            np.array(doc["event_time_grid"], dtype=float),
            np.array(doc["training_times"], dtype=float),
            np.array(doc["training_events"], dtype=np.int64),
            np.array(doc["training_X"], dtype=float).reshape(n, -1),
            ForestConfig.from_dict(doc["config"]),
            tuple(doc["feature_names"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt forest payload: {exc}") from exc


def dump_payload(doc) -> bytes:
    """gzip-compressed UTF-8 JSON; floats are written in round-trip repr."""
    raw = json.dumps(doc, separators=(",", ":"), allow_nan=False).encode("utf-8")
    return gzip.compress(raw, mtime=0)


def load_payload(payload: bytes):
    try:
        return json.loads(gzip.decompress(payload).decode("utf-8"))
    except (OSError, EOFError, zlib.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt payload: {exc}") from exc


def save(forest: SurvivalForest) -> bytes:
    return dump_payload(forest_to_dict(forest))


def load(payload: bytes) -> SurvivalForest:
    return forest_from_dict(load_payload(payload))
