"""Semi-synthetic simulation with three knobs: CATE sparsity, input representation, confounding.

Continuous covariates are binarized at random observed cutoffs. The binarized
columns drive a control-outcome surface with pair, triple and quadruple
interactions and a treatment effect that is linear in them. Treatment is
assigned on the raw continuous columns.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import expit

from .core import Dataset

CONTINUOUS_MIN_DISTINCT = 11  # more than 10 distinct values


class InputRepr(str, Enum):
    RAW = "raw"
    BINARIZED = "binarized"


SETTINGS = {
    "A": (InputRepr.RAW, 0.0),
    "B": (InputRepr.BINARIZED, 0.0),
    "C": (InputRepr.RAW, 3.0),
    "D": (InputRepr.BINARIZED, 3.0),
}


@dataclass(frozen=True)
class DgpConfig:
    rho: float = 0.1
    xi: float = 0.0
    input_repr: InputRepr = InputRepr.BINARIZED
    n_trainval: int = 1000
    n_test: int = 500
    seed: int = 0
    noise_sd: float = 0.1
    base_coef_prob: float = 0.3
    interaction_coef_prob: float = 0.2
    intercept_c: float = 0.0

    def __post_init__(self):
        for name in ("rho", "base_coef_prob", "interaction_coef_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.n_trainval < 30 or self.n_test < 30:
            raise ValueError("n_trainval and n_test must be at least 30")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        object.__setattr__(self, "input_repr", InputRepr(self.input_repr))

    @classmethod
    def for_setting(cls, setting: str, **kwargs) -> "DgpConfig":
        input_repr, xi = SETTINGS[setting]
        return cls(input_repr=input_repr, xi=xi, **kwargs)


@dataclass(frozen=True)
class CovariateTable:
    values: np.ndarray
    columns: tuple[str, ...]
    continuous: np.ndarray  # boolean mask over columns

    @property
    def continuous_cols(self) -> np.ndarray:
        return np.flatnonzero(self.continuous)


def continuous_mask(values: np.ndarray) -> np.ndarray:
    return np.array([len(np.unique(col)) >= CONTINUOUS_MIN_DISTINCT for col in values.T])


def load_covariates(path, require_continuous: bool = True) -> CovariateTable:
    """Read a headered CSV of numeric columns; rows with missing cells are dropped.

    A table without continuous columns cannot drive the simulation and is
    rejected unless ``require_continuous`` is False.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read covariate file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"covariate file {path} is empty") from None
        header = [h.strip() for h in header]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}")
            parsed = []
            missing = False
            for col, cell in zip(header, row):
                cell = cell.strip()
                if cell == "" or cell.upper() in ("NA", "NAN"):
                    missing = True
                    break
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(f"{path}: non-numeric value {cell!r} at row {line_no}, column {col!r}") from None
            if not missing:
                rows.append(parsed)
    if not rows:
        raise ValueError(f"covariate file {path} has no complete rows")
    values = np.array(rows, dtype=float)
    mask = continuous_mask(values)
    if require_continuous and not mask.any():
        raise ValueError(f"covariate file {path} has no continuous columns")
    return CovariateTable(values, tuple(header), mask)


def synth_covariates(n: int, d_continuous: int, d_binary: int, rng: np.random.Generator) -> np.ndarray:
    """Equicorrelated (0.2) Gaussian columns followed by Bernoulli(0.5) columns."""
    if n < 1:
        raise ValueError("n must be positive")
    common = rng.standard_normal((n, 1))
    cont = math.sqrt(0.2) * common + math.sqrt(0.8) * rng.standard_normal((n, d_continuous))
    binary = (rng.random((n, d_binary)) < 0.5).astype(float)
    return np.hstack([cont, binary])


def synth_table(n: int, d_continuous: int = 23, d_binary: int = 5,
                rng: np.random.Generator | None = None) -> CovariateTable:
    rng = rng if rng is not None else np.random.default_rng(0)
    values = synth_covariates(n, d_continuous, d_binary, rng)
    columns = tuple(f"c{j}" for j in range(d_continuous)) + tuple(f"b{j}" for j in range(d_binary))
    mask = np.array([True] * d_continuous + [False] * d_binary)
    return CovariateTable(values, columns, mask)


def binarize_covariates(X_raw, continuous_cols, rng: np.random.Generator):
    """Threshold each continuous column at a uniformly drawn observed value
    (``1`` if strictly above). Returns the new matrix and the cutoffs."""
    X = np.array(X_raw, dtype=float, copy=True)
    cols = np.asarray(continuous_cols, dtype=int)
    cutoffs = np.empty(len(cols))
    for k, j in enumerate(cols):
        observed = np.unique(X[:, j])
        if len(observed) < 2:
            raise ValueError(f"continuous column {j} is constant")
        cutoffs[k] = observed[rng.integers(len(observed))]
        X[:, j] = (X[:, j] > cutoffs[k]).astype(float)
    return X, cutoffs


@dataclass(frozen=True)
class InteractionTerm:
    members: tuple[int, ...]
    coefficient: float


@dataclass(frozen=True)
class CoefficientSet:
    beta: np.ndarray
    gamma: np.ndarray
    interaction_terms: tuple[InteractionTerm, ...]


def sample_dgp_coefficients(d: int, cfg: DgpConfig, rng: np.random.Generator) -> CoefficientSet:
    """Binary main effects, effect coefficients and interactions.

    Each variable owns one pair, one triple and one quadruple term whose other
    members are drawn without replacement from the remaining variables.
    """
    if d < 4:
        raise ValueError("need at least 4 active variables for quadruple terms")
    beta = rng.binomial(1, cfg.base_coef_prob, d).astype(float)
    gamma = rng.binomial(1, cfg.rho, d).astype(float)
    terms = []
    for order in (2, 3, 4):
        for j in range(d):
            others = np.delete(np.arange(d), j)
            partners = rng.choice(others, order - 1, replace=False)
            coef = float(rng.binomial(1, cfg.interaction_coef_prob))
            terms.append(InteractionTerm((j, *map(int, partners)), coef))
    return CoefficientSet(beta, gamma, tuple(terms))


@dataclass(frozen=True)
class GroundTruth:
    tau: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    pi: np.ndarray | None = None

    def subset(self, idx) -> "GroundTruth":
        return GroundTruth(*(None if v is None else v[idx] for v in
                             (self.tau, self.mu0, self.mu1, self.y0, self.y1, self.pi)))


def control_surface(X_star, coeffs: CoefficientSet, intercept: float = 0.0) -> np.ndarray:
    X_star = np.asarray(X_star, dtype=float)
    mu0 = intercept + X_star @ coeffs.beta
    for term in coeffs.interaction_terms:
        if term.coefficient != 0:
            mu0 = mu0 + term.coefficient * np.prod(X_star[:, list(term.members)], axis=1)
    return mu0


def simulate_potential_outcomes(X_star, coeffs: CoefficientSet, cfg: DgpConfig,
                                rng: np.random.Generator) -> GroundTruth:
    """Potential outcomes on the active binarized columns; noise is shared by both arms."""
    X_star = np.asarray(X_star, dtype=float)
    if X_star.shape[1] != len(coeffs.beta):
        raise ValueError("X_star columns do not match the coefficient dimension")
    mu0 = control_surface(X_star, coeffs, cfg.intercept_c)
    tau = X_star @ coeffs.gamma
    mu1 = mu0 + tau
    eps = cfg.noise_sd * rng.standard_normal(X_star.shape[0])
    return GroundTruth(tau=tau, mu0=mu0, mu1=mu1, y0=mu0 + eps, y1=mu1 + eps)


def propensity_from_score(score, xi: float) -> np.ndarray:
    score = np.asarray(score, dtype=float)
    if xi == 0:
        return np.full(score.shape[0], 0.5)
    sd = score.std()
    if sd == 0:
        raise ValueError("degenerate confounding score")
    return expit(xi * (score - score.mean()) / sd)


def simulate_treatment(X_cont, beta, xi: float, rng: np.random.Generator):
    """Assign treatment with ``expit(xi * standardized(X_cont @ beta))``.

    ``X_cont`` holds the raw (pre-binarization) active columns.
    """
    pi = propensity_from_score(np.asarray(X_cont, dtype=float) @ np.asarray(beta, dtype=float), xi)
    A = (rng.random(pi.shape[0]) < pi).astype(float)
    return A, pi


@dataclass(frozen=True)
class SimulatedDataset:
    train: Dataset
    val: Dataset
    test: Dataset
    truth: dict  # split name -> GroundTruth
    cutoffs: np.ndarray
    coefficients: CoefficientSet
    config: DgpConfig = field(repr=False, default=None)

    def splits(self):
        return {"train": self.train, "val": self.val, "test": self.test}


def split_sizes(n_trainval: int) -> tuple[int, int]:
    n_train = (2 * n_trainval) // 3
    return n_train, n_trainval - n_train


def generate_dataset(cfg: DgpConfig, source: CovariateTable) -> SimulatedDataset:
    """Draw rows from ``source`` and simulate treatments and outcomes.

    Randomness comes from ``cfg.seed`` only, split into independent streams
    for row sampling, cutoffs, coefficients, noise and treatment, so changing
    ``xi`` or the input representation leaves everything else untouched.
    """
    n_total = cfg.n_trainval + cfg.n_test
    if source.values.shape[0] < n_total:
        raise ValueError(f"covariate source has {source.values.shape[0]} rows, need {n_total}")
    cont = source.continuous_cols
    if len(cont) == 0:
        raise ValueError("covariate source has no continuous columns")
    rows_rng, cut_rng, coef_rng, noise_rng, treat_rng = np.random.default_rng(cfg.seed).spawn(5)

    idx = rows_rng.choice(source.values.shape[0], n_total, replace=False)
    X_raw = source.values[idx]
    X_bin, cutoffs = binarize_covariates(X_raw, cont, cut_rng)
    coeffs = sample_dgp_coefficients(len(cont), cfg, coef_rng)
    truth = simulate_potential_outcomes(X_bin[:, cont], coeffs, cfg, noise_rng)
    A, pi = simulate_treatment(X_raw[:, cont], coeffs.beta, cfg.xi, treat_rng)
    truth = GroundTruth(truth.tau, truth.mu0, truth.mu1, truth.y0, truth.y1, pi)
    Y = np.where(A == 1, truth.y1, truth.y0)
    X = X_raw if cfg.input_repr is InputRepr.RAW else X_bin

    n_train, _ = split_sizes(cfg.n_trainval)
    parts = {
        "train": np.arange(n_train),
        "val": np.arange(n_train, cfg.n_trainval),
        "test": np.arange(cfg.n_trainval, n_total),
    }
    data = {k: Dataset(X[p], A[p], Y[p]) for k, p in parts.items()}
    return SimulatedDataset(
        train=data["train"], val=data["val"], test=data["test"],
        truth={k: truth.subset(p) for k, p in parts.items()},
        cutoffs=cutoffs, coefficients=coeffs, config=cfg,
    )


def write_dataset_csv(sim: SimulatedDataset, directory, prefix: str = "") -> list[Path]:
    """One CSV per split with covariates, treatment, outcome and ground truth."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, data in sim.splits().items():
        truth = sim.truth[name]
        path = directory / f"{prefix}{name}.csv"
        d = data.X.shape[1]
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row_id", *(f"x_{j}" for j in range(d)), "a", "y",
                        "tau_true", "mu0_true", "mu1_true", "pi_true"])
            for i in range(len(data)):
                nums = [*data.X[i], data.A[i], data.Y[i], truth.tau[i], truth.mu0[i],
                        truth.mu1[i], truth.pi[i]]
                w.writerow([i, *(format(v, ".17g") for v in nums)])
        written.append(path)
    return written
