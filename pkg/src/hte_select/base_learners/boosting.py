"""Gradient-boosted regression trees under squared loss, with grid-searched settings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _tree_kernels as K
from ._common import DEFAULT_GRID, HyperGrid, as_matrix, as_vector, as_weights, check_n_features, kfold_indices
from .trees import FlatTree, grow

MIN_LEAF = 5


@dataclass(frozen=True)
class GbtModel:
    trees: tuple[FlatTree, ...]
    learning_rate: float
    base_prediction: float
    n_features: int
    chosen_hyperparams: dict = field(default_factory=dict)
    train_loss: tuple[float, ...] = ()  # weighted MSE after 0, 1, ..., len(trees) rounds

    def predict(self, X) -> np.ndarray:
        X = check_n_features(X, self.n_features)
        out = np.full(X.shape[0], self.base_prediction)
        for tree in self.trees:
            tree.add_to(X, out, self.learning_rate)
        return out


def _boost(X, order, y, w, learning_rate, max_depth, n_rounds, min_leaf,
           X_eval=None, snapshots=()):
    """Run ``n_rounds`` of boosting; optionally record predictions on ``X_eval``
    after each round count listed in ``snapshots``."""
    Xt = K.feature_major(X)
    base = float(w @ y / w.sum())
    fitted = np.full(len(y), base)
    eval_pred = None if X_eval is None else np.full(X_eval.shape[0], base)
    recorded = {}
    trees = []
    losses = [float(w @ (y - fitted) ** 2 / w.sum())]
    for r in range(1, n_rounds + 1):
        tree = grow(Xt, order, y - fitted, w, max_depth, min_leaf)
        tree.add_to(X, fitted, learning_rate)
        losses.append(float(w @ (y - fitted) ** 2 / w.sum()))
        trees.append(tree)
        if eval_pred is not None:
            tree.add_to(X_eval, eval_pred, learning_rate)
            if r in snapshots:
                recorded[r] = eval_pred.copy()
    return base, trees, losses, recorded


def fit_boosting(X, y, weights=None, learning_rate: float = 0.1, max_depth: int = 3,
                 n_estimators: int = 100, min_leaf: int = MIN_LEAF) -> GbtModel:
    """Fit one boosted ensemble with fixed hyperparameters."""
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n, "y")
    w = as_weights(weights, n)
    base, trees, losses, _ = _boost(X, K.presort(X), y, w, learning_rate, max_depth,
                                    n_estimators, min_leaf)
    return GbtModel(
        trees=tuple(trees),
        learning_rate=learning_rate,
        base_prediction=base,
        n_features=X.shape[1],
        chosen_hyperparams={"learning_rate": learning_rate, "max_depth": max_depth,
                            "n_estimators": n_estimators},
        train_loss=tuple(losses),
    )


def fit_gbt(X, y, weights=None, grid: HyperGrid = DEFAULT_GRID,
            rng: np.random.Generator | None = None, min_leaf: int = MIN_LEAF) -> GbtModel:
    """Grid-search boosting hyperparameters by k-fold weighted MSE, then refit.

    All ``n_estimators`` values for one (learning rate, depth) pair share a
    single boosting run per fold, since a shorter ensemble is a prefix of a
    longer one. Ties prefer smaller depth, then fewer trees, then the smaller
    learning rate.
    """
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n, "y")
    w = as_weights(weights, n)

    rates = sorted(grid.gbt_learning_rates)
    depths = sorted(grid.gbt_max_depths)
    sizes = sorted(grid.gbt_n_estimators)
    combos = [(d, m, lr) for d, m, lr in itertools.product(depths, sizes, rates)]

    if len(combos) == 1:
        best_depth, best_size, best_rate = combos[0]
    else:
        errors = {c: 0.0 for c in combos}
        for train, test in kfold_indices(n, grid.cv_folds, rng):
            w_tr = w[train]
            if w_tr.sum() <= 0:
                continue
            X_tr = X[train]
            order = K.presort(X_tr)
            for lr in rates:
                for depth in depths:
                    _, _, _, recorded = _boost(X_tr, order, y[train], w_tr, lr, depth, sizes[-1],
                                               min_leaf, X_eval=X[test], snapshots=set(sizes))
                    for m in sizes:
                        resid = y[test] - recorded[m]
                        errors[(depth, m, lr)] += float(w[test] @ resid**2)
        # combos are already in tie-break order; min() keeps the first minimum
        best_depth, best_size, best_rate = min(combos, key=lambda c: errors[c])

    return fit_boosting(X, y, w, learning_rate=best_rate, max_depth=best_depth,
                        n_estimators=best_size, min_leaf=min_leaf)
