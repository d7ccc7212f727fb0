"""The candidate CATE estimators (S, ES, T, DR, R learners) and cross-fitted nuisances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base_learners import DEFAULT_GRID, HyperGrid, fit_gbt, fit_logistic, fit_ridge, kfold_indices
from .base_learners._common import check_n_features
from .core import Dataset, Method, Strategy
from .pseudo_outcomes import pseudo_dr, pseudo_r


class NotFactuallyEvaluable(ValueError):
    """Raised when potential-outcome predictions are requested from a direct learner."""


def fit_outcome_model(method: Method, X, y, weights=None, rng=None, grid: HyperGrid = DEFAULT_GRID):
    """Fit the ML subroutine: cross-validated ridge (LR) or grid-searched boosting (GB)."""
    method = Method(method)
    if method is Method.LR:
        return fit_ridge(X, y, weights, grid=grid, rng=rng)
    return fit_gbt(X, y, weights, grid=grid, rng=rng)


def fit_propensity(X, a, rng=None, grid: HyperGrid = DEFAULT_GRID):
    return fit_logistic(X, a, grid=grid, rng=rng)


def _with_treatment(X: np.ndarray, a) -> np.ndarray:
    a = np.broadcast_to(np.asarray(a, dtype=float), (X.shape[0],))
    return np.column_stack([X, a])


def _extended(X: np.ndarray, a) -> np.ndarray:
    a = np.broadcast_to(np.asarray(a, dtype=float), (X.shape[0],))
    return np.column_stack([X, a[:, None] * X, a])


@dataclass(frozen=True)
class CateEstimator:
    strategy: Strategy
    method: Method
    n_features: int
    models: dict

    @property
    def name(self) -> str:
        return f"{self.strategy.value}-{self.method.value}"

    @property
    def indirect(self) -> bool:
        return self.strategy.indirect

    def predict_po(self, X) -> tuple[np.ndarray, np.ndarray]:
        if not self.indirect:
            raise NotFactuallyEvaluable(f"{self.name} is not factually evaluable")
        X = check_n_features(X, self.n_features)
        m = self.models
        if self.strategy is Strategy.S:
            return m["outcome"].predict(_with_treatment(X, 0)), m["outcome"].predict(_with_treatment(X, 1))
        if self.strategy is Strategy.ES:
            return m["outcome"].predict(_extended(X, 0)), m["outcome"].predict(_extended(X, 1))
        return m["mu0"].predict(X), m["mu1"].predict(X)

    def predict_cate(self, X) -> np.ndarray:
        if self.indirect:
            mu0, mu1 = self.predict_po(X)
            return mu1 - mu0
        X = check_n_features(X, self.n_features)
        return self.models["effect"].predict(X)


def fit_cate_estimator(strategy: Strategy, method: Method, train: Dataset,
                       rng: np.random.Generator | None = None,
                       grid: HyperGrid = DEFAULT_GRID) -> CateEstimator:
    """Fit one meta-learner. Nuisances of DR and R are fit on the full
    training data (no cross-fitting) and propensities are clipped."""
    strategy, method = Strategy(strategy), Method(method)
    if not train.has_both_groups():
        raise ValueError("training data must contain both treatment groups")
    rng = rng if rng is not None else np.random.default_rng(0)
    streams = rng.spawn(4)
    X, A, Y = train.X, train.A, train.Y

    def outcome(i, X_, y_, w=None):
        return fit_outcome_model(method, X_, y_, w, rng=streams[i], grid=grid)

    if strategy is Strategy.S:
        models = {"outcome": outcome(0, _with_treatment(X, A), Y)}
    elif strategy is Strategy.ES:
        models = {"outcome": outcome(0, _extended(X, A), Y)}
    elif strategy is Strategy.T:
        models = {"mu0": outcome(0, X[A == 0], Y[A == 0]), "mu1": outcome(1, X[A == 1], Y[A == 1])}
    elif strategy is Strategy.DR:
        mu0 = outcome(0, X[A == 0], Y[A == 0])
        mu1 = outcome(1, X[A == 1], Y[A == 1])
        prop = fit_propensity(X, A, rng=streams[2], grid=grid)
        target = pseudo_dr(Y, A, mu0.predict(X), mu1.predict(X), prop.predict(X))
        models = {"mu0": mu0, "mu1": mu1, "propensity": prop, "effect": outcome(3, X, target)}
    else:
        mu = outcome(0, X, Y)
        prop = fit_propensity(X, A, rng=streams[2], grid=grid)
        target, weight = pseudo_r(Y, A, mu.predict(X), prop.predict(X))
        models = {"mu": mu, "propensity": prop, "effect": outcome(3, X, target, weight)}
    return CateEstimator(strategy, method, X.shape[1], models)


def cate_predict(est: CateEstimator, X) -> np.ndarray:
    return est.predict_cate(X)


def po_predict(est: CateEstimator, X) -> tuple[np.ndarray, np.ndarray]:
    return est.predict_po(X)


@dataclass(frozen=True)
class NuisanceSet:
    """Out-of-fold nuisance estimates, one entry per row of the source data."""

    mu0: np.ndarray
    mu1: np.ndarray
    mu: np.ndarray
    pi: np.ndarray


def cross_fit_nuisances(data: Dataset, method: Method, folds: int = 5,
                        rng: np.random.Generator | None = None,
                        grid: HyperGrid = DEFAULT_GRID) -> NuisanceSet:
    """Per-arm outcomes, pooled outcome and propensity, each predicted for a
    row by models trained only on the other folds.

    The fold split is the first draw from ``rng``, so two calls seeded
    identically share their split regardless of ``method``.
    """
    if folds < 2:
        raise ValueError("cross-fitting needs at least 2 folds")
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(data)
    splits = kfold_indices(n, folds, rng)
    for train, _ in splits:
        a = data.A[train]
        if a.min() == a.max():
            raise ValueError("insufficient group support for cross-fitting")
    out = {k: np.empty(n) for k in ("mu0", "mu1", "mu", "pi")}
    for (train, test), stream in zip(splits, rng.spawn(len(splits))):
        s = stream.spawn(4)
        X, A, Y = data.X[train], data.A[train], data.Y[train]
        Xt = data.X[test]
        out["mu0"][test] = fit_outcome_model(method, X[A == 0], Y[A == 0], rng=s[0], grid=grid).predict(Xt)
        out["mu1"][test] = fit_outcome_model(method, X[A == 1], Y[A == 1], rng=s[1], grid=grid).predict(Xt)
        out["mu"][test] = fit_outcome_model(method, X, Y, rng=s[2], grid=grid).predict(Xt)
        out["pi"][test] = fit_propensity(X, A, rng=s[3], grid=grid).predict(Xt)
    return NuisanceSet(**out)
