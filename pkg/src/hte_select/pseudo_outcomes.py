"""Pseudo-outcomes whose conditional mean is the CATE under true nuisances.

All functions broadcast over numpy arrays and accept scalars.
"""

from __future__ import annotations

import numpy as np


def _check_pi(pi):
    pi = np.asarray(pi, dtype=float)
    if np.any((pi <= 0) | (pi >= 1)):
        raise ValueError("propensity must lie strictly inside (0, 1); clip it first")
    return pi


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def pseudo_dr(y, a, mu0, mu1, pi):
    """Doubly robust (AIPW) pseudo-outcome."""
    pi = _check_pi(pi)
    y, a, mu0, mu1 = (np.asarray(v, dtype=float) for v in (y, a, mu0, mu1))
    w1 = a / pi
    w0 = (1 - a) / (1 - pi)
    return _out((w1 - w0) * y + (1 - w1) * mu1 - (1 - w0) * mu0)


def pseudo_pw(y, a, pi):
    """Inverse-propensity-weighted pseudo-outcome."""
    pi = _check_pi(pi)
    y, a = np.asarray(y, dtype=float), np.asarray(a, dtype=float)
    return _out((a / pi - (1 - a) / (1 - pi)) * y)


def pseudo_ra(y, a, mu0, mu1):
    """Regression-adjusted pseudo-outcome ``(2a - 1)(y - mu_{1-a})``."""
    y, a, mu0, mu1 = (np.asarray(v, dtype=float) for v in (y, a, mu0, mu1))
    other = np.where(a == 1, mu0, mu1)
    return _out((2 * a - 1) * (y - other))


def pseudo_r(y, a, mu, pi):
    """R-learner target and weight: ``((y - mu)/(a - pi), (a - pi)^2)``."""
    y, a, mu, pi = (np.asarray(v, dtype=float) for v in (y, a, mu, pi))
    resid = a - pi
    if np.any(resid == 0):
        raise ValueError("a - pi must be nonzero; clip the propensity first")
    return _out((y - mu) / resid), _out(resid**2)
