"""L2-penalized logistic regression fit by IRLS, used for propensity scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from ._common import DEFAULT_GRID, HyperGrid, as_matrix, as_vector, check_n_features, kfold_indices

PROPENSITY_CLIP = 1e-3
MAX_ITER = 100
TOL = 1e-8


def clip_propensity(p):
    return np.clip(p, PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)


@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    chosen_lambda: float  # the applied penalty, 1/C for the selected grid value

    def predict(self, X) -> np.ndarray:
        """Clipped probability of the positive class."""
        X = check_n_features(X, len(self.coefficients))
        return clip_propensity(expit(X @ self.coefficients + self.intercept))


def penalized_loglik(Z: np.ndarray, a: np.ndarray, theta: np.ndarray, lam: float) -> float:
    eta = Z @ theta
    ll = a @ log_expit(eta) + (1 - a) @ log_expit(-eta)
    return float(ll - 0.5 * lam * theta[1:] @ theta[1:])


def irls(X: np.ndarray, a: np.ndarray, lam: float, trace: list | None = None) -> tuple[float, np.ndarray]:
    """Newton/IRLS on the penalized log-likelihood, intercept unpenalized.

    Steps are halved while they decrease the objective. Stops when the largest
    parameter change falls below 1e-8 or after 100 iterations. If ``trace`` is
    given, the objective at every accepted iterate is appended to it.
    """
    n, d = X.shape
    Z = np.hstack([np.ones((n, 1)), X])
    penalty = np.full(d + 1, lam)
    penalty[0] = 0.0
    theta = np.zeros(d + 1)
    obj = penalized_loglik(Z, a, theta, lam)
    if trace is not None:
        trace.append(obj)
    for _ in range(MAX_ITER):
        p = expit(Z @ theta)
        grad = Z.T @ (a - p) - penalty * theta
        hess = Z.T @ ((p * (1 - p))[:, None] * Z) + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(50):
            cand = theta + t * step
            cand_obj = penalized_loglik(Z, a, cand, lam)
            if cand_obj >= obj:
                break
            t *= 0.5
        else:
            break
        change = np.max(np.abs(cand - theta))
        theta, obj = cand, cand_obj
        if trace is not None:
            trace.append(obj)
        if change < TOL:
            break
    return float(theta[0]), theta[1:]


def _log_loss(a: np.ndarray, p: np.ndarray) -> float:
    return float(-(a @ np.log(p) + (1 - a) @ np.log(1 - p)))


def fit_logistic(X, a, grid: HyperGrid = DEFAULT_GRID, rng: np.random.Generator | None = None) -> LogisticModel:
    """Penalized logistic regression with the penalty chosen by k-fold log-loss.

    Grid values are inverse strengths ``C`` (penalty ``1/C``). Ties in CV loss
    go to the smaller ``C``, i.e. the stronger penalty.
    """
    X = as_matrix(X)
    n = X.shape[0]
    a = as_vector(a, n, "a")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError("treatment must be binary")
    if a.min() == a.max():
        raise ValueError("degenerate treatment assignment")

    cs = sorted(grid.logistic_cs)
    if len(cs) == 1:
        best = cs[0]
    else:
        losses = np.zeros(len(cs))
        for train, test in kfold_indices(n, grid.cv_folds, rng):
            a_tr = a[train]
            for i, c in enumerate(cs):
                if a_tr.min() == a_tr.max():
                    p = np.full(len(test), a_tr[0])
                else:
                    b, beta = irls(X[train], a_tr, 1.0 / c)
                    p = expit(X[test] @ beta + b)
                losses[i] += _log_loss(a[test], clip_propensity(p))
        best = cs[int(np.argmin(losses))]

    intercept, beta = irls(X, a, 1.0 / best)
    return LogisticModel(intercept=intercept, coefficients=beta, chosen_lambda=1.0 / float(best))
