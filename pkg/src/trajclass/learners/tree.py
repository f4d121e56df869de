"""CART decision tree and random forest classifiers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_predict_input, check_training_data

_CRITERIA = {"gini": _kernels.GINI, "entropy": _kernels.ENTROPY}
_UNLIMITED_DEPTH = 2 ** 31


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    return float(_kernels._impurity(counts, counts.sum(), _kernels.GINI))


def entropy(counts) -> float:
    """Entropy in bits."""
    counts = np.asarray(counts, dtype=float)
    return float(_kernels._impurity(counts, counts.sum(), _kernels.ENTROPY))


@dataclass(frozen=True, eq=False)
class TreeArrays:
    """Flat node arrays of one or more trees (one row per tree).

    ``value`` holds the training class counts reaching each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_nodes: np.ndarray

    @property
    def n_trees(self) -> int:
        return self.feature.shape[0]

    def leaf_classes(self, X) -> np.ndarray:
        """Majority class index of the leaf reached in every tree, shape (n, n_trees)."""
        leaves = _kernels.apply_trees(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                                      self.left, self.right)
        majority = np.argmax(self.value, axis=2)
        return majority[np.arange(self.n_trees)[None, :], leaves]

    def trimmed(self):
        m = int(self.n_nodes.max())
        return TreeArrays(self.feature[:, :m], self.threshold[:, :m], self.left[:, :m], self.right[:, :m],
                          self.value[:, :m], self.n_nodes)


def _grow(X, y_idx, n_classes, *, n_trees, bootstrap, max_depth, min_samples_split, min_samples_leaf,
          criterion, max_features, seed) -> TreeArrays:
    if criterion not in _CRITERIA:
        raise ValueError(f"criterion must be 'gini' or 'entropy', got {criterion!r}")
    if max_depth is not None and max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_samples_leaf < 1 or min_samples_split < 2:
        raise ValueError("need min_samples_leaf >= 1 and min_samples_split >= 2")
    seeds = np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint64)
    X = np.ascontiguousarray(X, dtype=float)
    orders = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    out = _kernels.build_forest(
        X, y_idx.astype(np.int64), orders, n_classes, n_trees, bootstrap,
        _UNLIMITED_DEPTH if max_depth is None else int(max_depth), int(min_samples_split),
        int(min_samples_leaf), _CRITERIA[criterion], int(max_features), seeds, 2 * X.shape[0] + 1)
    return TreeArrays(*out).trimmed()


def _seed(random_state) -> int:
    if random_state is None:
        return int(np.random.SeedSequence().generate_state(1)[0])
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(2 ** 63))
    return int(random_state)


class DecisionTreeClassifier(ClassifierMixin, BaseEstimator):
    """Greedy CART tree evaluating every feature and midpoint at each node."""

    def __init__(self, criterion="gini", max_depth=None, min_samples_split=2, min_samples_leaf=1,
                 random_state=None):
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, X, y):
        X, y_idx, self.classes_ = check_training_data(X, y)
        self.n_features_in_ = X.shape[1]
        self.tree_ = _grow(X, y_idx, len(self.classes_), n_trees=1, bootstrap=False,
                           max_depth=self.max_depth, min_samples_split=self.min_samples_split,
                           min_samples_leaf=self.min_samples_leaf, criterion=self.criterion,
                           max_features=X.shape[1], seed=_seed(self.random_state))
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_predict_input(X, self.n_features_in_)
        if len(X) == 0:
            return self.classes_[:0]
        return self.classes_[self.tree_.leaf_classes(X)[:, 0]]

    def get_depth(self) -> int:
        check_is_fitted(self, "tree_")
        left, right = self.tree_.left[0], self.tree_.right[0]
        depth = np.zeros(len(left), dtype=int)
        for node in range(int(self.tree_.n_nodes[0])):
            if left[node] != -1:
                depth[left[node]] = depth[right[node]] = depth[node] + 1
        return int(depth[: int(self.tree_.n_nodes[0])].max())


class RandomForestClassifier(ClassifierMixin, BaseEstimator):
    """Bagged CART trees with per-node feature subsampling and majority voting.

    ``max_features="sqrt"`` draws ceil(sqrt(d)) candidate features per node;
    ``None`` uses all features.
    """

    def __init__(self, n_estimators=100, criterion="gini", max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features="sqrt", bootstrap=True, random_state=None):
        self.n_estimators = n_estimators
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _n_candidates(self, d):
        if self.max_features is None:
            return d
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        return max(1, min(d, int(self.max_features)))

    def fit(self, X, y):
        if int(self.n_estimators) < 1:
            raise ValueError("n_estimators must be >= 1")
        X, y_idx, self.classes_ = check_training_data(X, y)
        self.n_features_in_ = X.shape[1]
        self.trees_ = _grow(X, y_idx, len(self.classes_), n_trees=int(self.n_estimators),
                            bootstrap=bool(self.bootstrap), max_depth=self.max_depth,
                            min_samples_split=self.min_samples_split, min_samples_leaf=self.min_samples_leaf,
                            criterion=self.criterion, max_features=self._n_candidates(X.shape[1]),
                            seed=_seed(self.random_state))
        return self

    def tree_votes(self, X) -> np.ndarray:
        """Class index voted by each tree, shape (n_samples, n_estimators)."""
        check_is_fitted(self, "trees_")
        X = check_predict_input(X, self.n_features_in_)
        return self.trees_.leaf_classes(X)

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = check_predict_input(X, self.n_features_in_)
        if len(X) == 0:
            return self.classes_[:0]
        votes = self.trees_.leaf_classes(X)
        tally = np.zeros((len(X), len(self.classes_)), dtype=np.int64)
        for k in range(len(self.classes_)):
            tally[:, k] = np.count_nonzero(votes == k, axis=1)
        # argmax returns the first maximum: ties go to the earliest class
        return self.classes_[np.argmax(tally, axis=1)]
