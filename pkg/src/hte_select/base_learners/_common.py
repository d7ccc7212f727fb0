from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HyperGrid:
    """Hyperparameter sweeps used whenever a base learner is fit."""

    ridge_lambdas: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3, 1e4)
    # inverse penalty strengths C: the logistic objective is loglik - ||beta||^2 / (2C)
    logistic_cs: tuple[float, ...] = (1e-5, 1e-3, 1e-2, 1e-1, 1.0)
    gbt_learning_rates: tuple[float, ...] = (0.1, 0.3)
    gbt_max_depths: tuple[int, ...] = (1, 3, 6)
    gbt_n_estimators: tuple[int, ...] = (20, 100)
    cv_folds: int = 5

    def __post_init__(self):
        for name in ("ridge_lambdas", "logistic_cs", "gbt_learning_rates",
                     "gbt_max_depths", "gbt_n_estimators"):
            values = getattr(self, name)
            if len(values) == 0:
                raise ValueError(f"{name} must not be empty")
        if min(self.ridge_lambdas) <= 0 or min(self.logistic_cs) <= 0:
            raise ValueError("penalties must be positive")
        if any(not 0 < lr <= 1 for lr in self.gbt_learning_rates):
            raise ValueError("learning rates must lie in (0, 1]")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")


DEFAULT_GRID = HyperGrid()


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d feature matrix, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"feature matrix must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite entries")
    return X


def as_vector(v, n: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != n:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = as_vector(weights, n, "weights")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if not np.any(w > 0):
        raise ValueError("at least one weight must be positive")
    return w


def check_n_features(X, expected: int) -> np.ndarray:
    X = as_matrix(X)
    if X.shape[1] != expected:
        raise ValueError(f"model was fit on {expected} features, got {X.shape[1]}")
    return X


def kfold_indices(n: int, k: int, rng: np.random.Generator | None = None):
    """Contiguous folds over a (optionally) shuffled row order.

    Returns a list of ``(train_idx, test_idx)`` pairs. ``k`` is capped at ``n``.
    """
    k = min(k, n)
    order = rng.permutation(n) if rng is not None else np.arange(n)
    blocks = np.array_split(order, k)
    folds = []
    for i, test in enumerate(blocks):
        train = np.concatenate([b for j, b in enumerate(blocks) if j != i])
        folds.append((train, test))
    return folds
