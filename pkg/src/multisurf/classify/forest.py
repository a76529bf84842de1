"""Random forest of CART trees grown on Gini impurity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ..errors import EmptyTable
from ..rng import SeededDraws
from .config import ForestParams


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat array tree. ``feature[i] == -1`` marks a leaf; ``value`` holds class indices."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        for name, dtype in (("feature", np.int64), ("threshold", np.float64),
                            ("left", np.int64), ("right", np.int64), ("value", np.int64)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _kernels.tree_apply(
            np.ascontiguousarray(X, dtype=np.float64),
            self.feature, self.threshold, self.left, self.right, self.value,
        )

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def features_per_split(params: ForestParams, n_features: int) -> int:
    if params.features_per_split is not None:
        return min(params.features_per_split, n_features)
    return max(1, math.isqrt(n_features))


def grow_tree(X, y, n_classes, samples, params: ForestParams, draws: SeededDraws) -> DecisionTree:
    """Grow one tree depth-first on the (possibly repeated) row indices ``samples``.

    At each node a fresh feature permutation is drawn and the first
    ``features_per_split`` features are searched. If none of them admits a
    split, the remaining features are searched too, so an impure node only
    becomes a leaf when every feature is constant on it.
    """
    d = X.shape[1]
    k = features_per_split(params, d)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0)):
            lst.append(v)
        return len(feature) - 1

    stack = [(new_node(), np.asarray(samples, dtype=np.int64), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes)
        value[node] = int(np.argmax(counts))
        if (
            np.count_nonzero(counts) <= 1
            or idx.shape[0] < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            continue
        perm = draws.permutation(d)
        pos, thr, _ = _kernels.best_split(X, y, idx, perm[:k], n_classes)
        f = perm[pos] if pos >= 0 else -1
        if pos < 0 and k < d:
            pos, thr, _ = _kernels.best_split(X, y, idx, perm[k:], n_classes)
            f = perm[k + pos] if pos >= 0 else -1
        if f < 0:
            continue
        go_left = X[idx, f] <= thr
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], idx[~go_left], depth + 1))
        stack.append((left[node], idx[go_left], depth + 1))

    return DecisionTree(feature, threshold, left, right, value)


def fit_forest(X: np.ndarray, y: np.ndarray, n_classes: int, params: ForestParams, seed: int) -> list[DecisionTree]:
    n = X.shape[0]
    if n == 0:
        raise EmptyTable("training table")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    master = SeededDraws(seed)
    # per-tree sub-streams, fixed up front so tree order never affects draws
    tree_seeds = [master.spawn_seed() for _ in range(params.n_trees)]
    trees = []
    for ts in tree_seeds:
        draws = SeededDraws(ts)
        samples = draws.indices(n, n) if params.bootstrap else np.arange(n, dtype=np.int64)
        trees.append(grow_tree(X, y, n_classes, samples, params, draws))
    return trees


def forest_vote(trees, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Majority vote; ties go to the class listed first."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], n_classes), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for tree in trees:
        votes[rows, tree.apply(X)] += 1
    return np.argmax(votes, axis=1)
