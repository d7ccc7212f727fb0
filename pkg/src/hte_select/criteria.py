"""Model-selection criteria scoring a pool of CATE estimators on validation data.

A score of ``None`` means the candidate cannot be evaluated by that criterion
(for example a direct learner under a factual criterion, or a candidate whose
fit failed). Lower scores are better for every criterion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .base_learners import DEFAULT_GRID, HyperGrid, nearest_neighbor_indices
from .core import Dataset, Method, Strategy, derive_rng
from .meta_learners import CateEstimator, NuisanceSet, cross_fit_nuisances, fit_cate_estimator
from .pseudo_outcomes import pseudo_dr, pseudo_pw, pseudo_r, pseudo_ra

log = logging.getLogger(__name__)

PSEUDO_KINDS = ("DR", "R", "PW", "RA", "Match")
KINDS = ("oracle", "factual", "wfactual", "plugin", "pseudo", "influence")


@dataclass(frozen=True)
class CriterionSpec:
    kind: str
    strategy: Strategy | None = None
    pseudo: str | None = None
    method: Method | None = None
    folds: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown criterion kind {self.kind!r}")
        if self.kind == "plugin" and (self.strategy is None or self.method is None):
            raise ValueError("plug-in criteria need a strategy and a method")
        if self.kind == "pseudo":
            if self.pseudo not in PSEUDO_KINDS:
                raise ValueError(f"unknown pseudo-outcome {self.pseudo!r}")
            if self.pseudo in ("DR", "R", "RA") and self.method is None:
                raise ValueError(f"pseudo-outcome {self.pseudo} needs a method")
        if self.kind == "influence" and self.method is None:
            raise ValueError("the influence-function criterion needs a method")

    @property
    def name(self) -> str:
        if self.kind in ("oracle", "factual", "wfactual"):
            return self.kind
        if self.kind == "plugin":
            return f"plug_{self.strategy.value}_{self.method.value}"
        if self.kind == "influence":
            return f"if_{self.method.value}"
        if self.pseudo == "Match":
            return "match"
        if self.method is None:
            return f"pseudo_{self.pseudo}"
        return f"pseudo_{self.pseudo}_{self.method.value}"

    @classmethod
    def parse(cls, name: str) -> "CriterionSpec":
        """Inverse of :attr:`name`, e.g. ``"plug_T_GB"`` or ``"pseudo_DR_LR"``."""
        parts = name.split("_")
        try:
            if name in ("oracle", "factual", "wfactual"):
                return cls(name)
            if name == "match":
                return cls("pseudo", pseudo="Match")
            if parts[0] == "plug" and len(parts) == 3:
                return cls("plugin", strategy=Strategy(parts[1]), method=Method(parts[2]))
            if parts[0] == "if" and len(parts) == 2:
                return cls("influence", method=Method(parts[1]))
            if parts[0] == "pseudo" and len(parts) in (2, 3):
                method = Method(parts[2]) if len(parts) == 3 else None
                return cls("pseudo", pseudo=parts[1], method=method)
        except ValueError as exc:
            raise ValueError(f"invalid criterion name {name!r}: {exc}") from None
        raise ValueError(f"invalid criterion name {name!r}")


def default_criteria() -> list[CriterionSpec]:
    """Every criterion: oracle, factual (plain and weighted), all plug-ins,
    all pseudo-outcome variants and the influence-function criterion."""
    specs = [CriterionSpec("oracle"), CriterionSpec("factual"), CriterionSpec("wfactual")]
    for method in Method:
        for strategy in Strategy:
            specs.append(CriterionSpec("plugin", strategy=strategy, method=method))
        for kind in ("DR", "R", "RA"):
            specs.append(CriterionSpec("pseudo", pseudo=kind, method=method))
        specs.append(CriterionSpec("influence", method=method))
    specs.append(CriterionSpec("pseudo", pseudo="PW"))
    specs.append(CriterionSpec("pseudo", pseudo="Match"))
    return specs


def _rmse(target, pred, weights=None) -> float:
    diff = np.asarray(target, dtype=float) - np.asarray(pred, dtype=float)
    if weights is None:
        return float(np.sqrt(np.mean(diff**2)))
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise ValueError("weights sum to zero")
    return float(np.sqrt(np.sum(w * diff**2) / np.sum(w)))


def oracle_score(candidate: CateEstimator, test_X, tau_true) -> float:
    """PEHE of the candidate against the true effects."""
    tau_true = np.asarray(tau_true, dtype=float)
    pred = candidate.predict_cate(test_X)
    if pred.shape != tau_true.shape:
        raise ValueError("tau_true length does not match test_X")
    return _rmse(tau_true, pred)


def importance_weights(a, pi) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return a / pi + (1 - a) / (1 - pi)


def factual_score(candidate: CateEstimator, val: Dataset, weights=None) -> float | None:
    """Observed-outcome RMSE ``sqrt(mean w_i (Y_i - mu_hat_{A_i}(X_i))^2)``.

    The weighted form keeps the ``1/n`` normalization. Direct learners give ``None``.
    """
    if not candidate.indirect:
        return None
    mu0, mu1 = candidate.predict_po(val.X)
    resid = val.Y - np.where(val.A == 1, mu1, mu0)
    w = np.ones(len(val)) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sqrt(np.mean(w * resid**2)))


def plugin_score(candidate: CateEstimator, plug: CateEstimator, val_X) -> float:
    return _rmse(plug.predict_cate(val_X), candidate.predict_cate(val_X))


def pseudo_score(candidate: CateEstimator, pseudo, weights, val_X) -> float:
    """Weighted RMSE between pseudo-outcomes and the candidate's effects."""
    return _rmse(pseudo, candidate.predict_cate(val_X), weights)


def matching_targets(val: Dataset) -> np.ndarray:
    """``(2A - 1)(Y - Y_nn)`` where ``Y_nn`` is the outcome of the nearest
    unit (Euclidean, lowest index on ties) in the opposite treatment group."""
    if not val.has_both_groups():
        raise ValueError("matching needs both treatment groups")
    out = np.empty(len(val))
    for arm in (0, 1):
        rows = np.flatnonzero(val.A == arm)
        pool = np.flatnonzero(val.A == 1 - arm)
        nn = pool[nearest_neighbor_indices(val.X[rows], val.X[pool])]
        out[rows] = (2 * arm - 1) * (val.Y[rows] - val.Y[nn])
    return out


def influence_terms(y, a, tilde_tau, pi_tilde, tau_hat) -> np.ndarray:
    """Per-row influence-function criterion, taken literally:
    ``(1-B) tt^2 + B y (tt - th) - D (tt - th)^2 + th^2`` with
    ``D = a - pi``, ``C = pi (1 - pi)``, ``B = 2 a (a - pi) / C``."""
    y, a, tt, pi, th = (np.asarray(v, dtype=float) for v in (y, a, tilde_tau, pi_tilde, tau_hat))
    C = pi * (1 - pi)
    B = 2 * a * (a - pi) / C
    D = a - pi
    return (1 - B) * tt**2 + B * y * (tt - th) - D * (tt - th) ** 2 + th**2


def influence_score(candidate: CateEstimator, val: Dataset, tilde_tau, pi_tilde) -> float:
    tau_hat = candidate.predict_cate(val.X)
    return float(np.mean(influence_terms(val.Y, val.A, tilde_tau, pi_tilde, tau_hat)))


def _is_missing(score) -> bool:
    return score is None or (isinstance(score, float) and math.isnan(score))


def select_best(scores: Sequence[float | None]) -> int:
    """Index of the smallest evaluable score; ties go to the lowest index."""
    best = None
    for i, s in enumerate(scores):
        if _is_missing(s):
            continue
        if best is None or s < scores[best]:
            best = i
    if best is None:
        raise ValueError("no evaluable candidate")
    return best


@dataclass
class ValidationContext:
    """Validation-side quantities shared by all criteria of one run.

    Nuisances, plug-in estimators and matching targets are built on first
    use, from ``val`` only, and cached.
    """

    val: Dataset
    seed: int = 0
    grid: HyperGrid = DEFAULT_GRID
    folds: int = 5
    _cache: dict = field(default_factory=dict, repr=False)

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def nuisances(self, method: Method) -> NuisanceSet:
        # same stream for both methods so they share the fold split
        return self._cached(("nuisance", method), lambda: cross_fit_nuisances(
            self.val, method, self.folds, rng=derive_rng(self.seed, "crossfit"), grid=self.grid))

    def propensity(self) -> np.ndarray:
        return self.nuisances(Method.LR).pi

    def plugin(self, strategy: Strategy, method: Method) -> CateEstimator:
        return self._cached(("plugin", strategy, method), lambda: fit_cate_estimator(
            strategy, method, self.val, rng=derive_rng(self.seed, "plugin", strategy.value, method.value),
            grid=self.grid))

    def pseudo_target(self, kind: str, method: Method | None):
        """``(targets, weights)`` for a pseudo-outcome criterion."""
        def build():
            v = self.val
            if kind == "Match":
                return matching_targets(v), None
            if kind == "PW":
                return pseudo_pw(v.Y, v.A, self.propensity()), None
            nu = self.nuisances(method)
            if kind == "DR":
                return pseudo_dr(v.Y, v.A, nu.mu0, nu.mu1, nu.pi), None
            if kind == "RA":
                return pseudo_ra(v.Y, v.A, nu.mu0, nu.mu1), None
            return pseudo_r(v.Y, v.A, nu.mu, nu.pi)
        return self._cached(("pseudo", kind, method), build)

    def score(self, spec: CriterionSpec, candidates: Sequence[CateEstimator | None]) -> list[float | None]:
        """Score every candidate; ``None`` marks failed or non-evaluable ones."""
        if spec.kind == "oracle":
            raise ValueError("the oracle needs test-set truth; score it with oracle_score")
        v = self.val
        if spec.kind == "factual":
            return [None if c is None else factual_score(c, v) for c in candidates]
        if spec.kind == "wfactual":
            w = importance_weights(v.A, self.propensity())
            return [None if c is None else factual_score(c, v, w) for c in candidates]
        if spec.kind == "plugin":
            plug = self.plugin(spec.strategy, spec.method)
            return [None if c is None else plugin_score(c, plug, v.X) for c in candidates]
        if spec.kind == "influence":
            nu = self.nuisances(spec.method)
            tilde_tau = nu.mu1 - nu.mu0
            return [None if c is None else influence_score(c, v, tilde_tau, nu.pi) for c in candidates]
        target, weights = self.pseudo_target(spec.pseudo, spec.method)
        return [None if c is None else pseudo_score(c, target, weights, v.X) for c in candidates]
