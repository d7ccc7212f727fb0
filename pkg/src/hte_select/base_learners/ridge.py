"""Weighted ridge regression with a cross-validated penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import DEFAULT_GRID, HyperGrid, as_matrix, as_vector, as_weights, check_n_features, kfold_indices


@dataclass(frozen=True)
class RidgeModel:
    intercept: float
    coefficients: np.ndarray
    chosen_lambda: float

    def predict(self, X) -> np.ndarray:
        X = check_n_features(X, len(self.coefficients))
        return X @ self.coefficients + self.intercept


def _ridge_path(X: np.ndarray, y: np.ndarray, w: np.ndarray, lambdas) -> list[tuple[float, np.ndarray]]:
    """Closed-form weighted ridge solutions for several penalties at once.

    Minimizes ``sum_i w_i (y_i - b - x_i beta)^2 + lam * ||beta||^2`` with the
    intercept ``b`` left unpenalized, by centering at the weighted means and
    diagonalizing the centered Gram matrix once.
    """
    sw = w.sum()
    x_bar = w @ X / sw
    y_bar = w @ y / sw
    Xc = X - x_bar
    yc = y - y_bar
    gram = Xc.T @ (w[:, None] * Xc)
    rhs = Xc.T @ (w * yc)
    evals, evecs = np.linalg.eigh(gram)
    evals = np.clip(evals, 0.0, None)
    proj = evecs.T @ rhs
    out = []
    for lam in lambdas:
        beta = evecs @ (proj / (evals + lam))
        out.append((float(y_bar - x_bar @ beta), beta))
    return out


def fit_ridge(X, y, weights=None, grid: HyperGrid = DEFAULT_GRID,
              rng: np.random.Generator | None = None) -> RidgeModel:
    """Fit weighted ridge, choosing the penalty by k-fold weighted squared error.

    Ties in CV error go to the larger penalty. With a single-penalty grid no
    cross-validation is run.
    """
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n, "y")
    w = as_weights(weights, n)
    if n < 2:
        raise ValueError("ridge needs at least 2 rows")

    lambdas = sorted(grid.ridge_lambdas, reverse=True)
    if len(lambdas) == 1:
        best = lambdas[0]
    else:
        errors = np.zeros(len(lambdas))
        for train, test in kfold_indices(n, grid.cv_folds, rng):
            if w[train].sum() <= 0:
                continue
            for i, (b, beta) in enumerate(_ridge_path(X[train], y[train], w[train], lambdas)):
                resid = y[test] - (X[test] @ beta + b)
                errors[i] += w[test] @ resid**2
        best = lambdas[int(np.argmin(errors))]  # argmin keeps the first, i.e. largest, on ties

    (intercept, beta), = _ridge_path(X, y, w, [best])
    return RidgeModel(intercept=intercept, coefficients=beta, chosen_lambda=float(best))
