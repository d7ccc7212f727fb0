from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _tree_kernels as K
from ._common import as_matrix, as_vector, as_weights


@dataclass(frozen=True)
class Leaf:
    prediction: float


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class FlatTree:
    """Array form of a fitted tree; node 0 is the root, ``feature < 0`` marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def add_to(self, X: np.ndarray, out: np.ndarray, scale: float = 1.0) -> None:
        K.add_tree_predictions(X, self.feature, self.threshold, self.left, self.right,
                               self.value, scale, out)

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        out = np.zeros(X.shape[0])
        self.add_to(X, out)
        return out

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)

    def to_node(self, node: int = 0) -> TreeNode:
        if self.feature[node] < 0:
            return Leaf(float(self.value[node]))
        return Split(int(self.feature[node]), float(self.threshold[node]),
                     self.to_node(int(self.left[node])), self.to_node(int(self.right[node])))


def grow(Xt: np.ndarray, order: np.ndarray, y: np.ndarray, w: np.ndarray,
         max_depth: int, min_leaf: int) -> FlatTree:
    """Grow from a feature-major design ``Xt`` and its :func:`presort` order."""
    return FlatTree(*K.grow_tree(Xt, order, y, w, max_depth, min_leaf))


def fit_flat_tree(X, y, weights=None, max_depth: int = 3, min_leaf: int = 5) -> FlatTree:
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n, "y")
    w = as_weights(weights, n)
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
    if n < 2 * min_leaf:
        raise ValueError(f"need at least 2*min_leaf={2 * min_leaf} rows, got {n}")
    return grow(K.feature_major(X), K.presort(X), y, w, max_depth, min_leaf)


def fit_regression_tree(X, y, weights=None, max_depth: int = 3, min_leaf: int = 5) -> TreeNode:
    """Greedy weighted least-squares tree.

    Candidate thresholds are midpoints between consecutive distinct values of
    a feature. Gain ties go to the lowest feature index, then the lowest
    threshold. Growth stops at ``max_depth``, when a child would hold fewer
    than ``min_leaf`` rows, or when the node's targets are constant.
    """
    return fit_flat_tree(X, y, weights, max_depth, min_leaf).to_node()


def predict_node(node: TreeNode, x) -> float:
    while isinstance(node, Split):
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.prediction
