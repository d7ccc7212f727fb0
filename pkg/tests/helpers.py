from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hte_select.dgp import (DgpConfig, binarize_covariates, sample_dgp_coefficients, simulate_potential_outcomes,
                            simulate_treatment, synth_covariates)


@dataclass
class Population:
    X_raw: np.ndarray
    X_star: np.ndarray
    tau: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    pi: np.ndarray
    A: np.ndarray
    Y: np.ndarray

    @property
    def mu(self):
        return self.pi * self.mu1 + (1 - self.pi) * self.mu0


def population(n=20_000, xi=3.0, rho=0.1, seed=0, d_continuous=10, d_binary=2) -> Population:
    """A large draw from the simulation with every true nuisance exposed."""
    rng = np.random.default_rng(seed)
    cfg = DgpConfig(rho=rho, xi=xi)
    X_raw = synth_covariates(n, d_continuous, d_binary, rng)
    cont = np.arange(d_continuous)
    X_bin, _ = binarize_covariates(X_raw, cont, rng)
    coeffs = sample_dgp_coefficients(d_continuous, cfg, rng)
    truth = simulate_potential_outcomes(X_bin[:, cont], coeffs, cfg, rng)
    A, pi = simulate_treatment(X_raw[:, cont], coeffs.beta, xi, rng)
    Y = np.where(A == 1, truth.y1, truth.y0)
    return Population(X_raw, X_bin, truth.tau, truth.mu0, truth.mu1, pi, A, Y)


def within_mc(values, target, k=3.0) -> bool:
    values = np.asarray(values, dtype=float)
    se = values.std(ddof=1) / np.sqrt(len(values))
    return abs(values.mean() - np.mean(target)) <= k * se
