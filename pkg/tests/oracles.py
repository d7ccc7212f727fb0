"""Reference implementations that share no code with the package.

They are slow and simple on purpose: plain loops, textbook formulas.
"""

from __future__ import annotations

import math

import numpy as np


def ridge_gd(X, y, w, lam, tol=1e-13, max_iter=2_000_000):
    """Minimize sum w (y - b - X beta)^2 + lam ||beta||^2 by accelerated gradient descent."""
    n, d = X.shape
    Z = np.hstack([np.ones((n, 1)), X])
    P = np.diag([0.0] + [lam] * d)
    H = 2 * (Z.T * w) @ Z + 2 * P
    L = np.linalg.eigvalsh(H).max()
    theta = np.zeros(d + 1)
    prev = theta.copy()
    for k in range(max_iter):
        v = theta + (k / (k + 3)) * (theta - prev)
        grad = 2 * (Z.T * w) @ (Z @ v - y) + 2 * P @ v
        prev, theta = theta, v - grad / L
        g = 2 * (Z.T * w) @ (Z @ theta - y) + 2 * P @ theta
        if np.max(np.abs(g)) < tol * max(1.0, np.abs(y).sum()):
            break
    return theta[0], theta[1:]


def logistic_slope_newton(x, lam, iters=200):
    """Penalized logistic slope for data with zero intercept by symmetry.

    Objective: sum a log s(bx) + (1-a) log s(-bx) - lam b^2 / 2, solved by
    scalar Newton on its derivative. Requires ``a`` = (x > 0).
    """
    a = (np.asarray(x) > 0).astype(float)
    b = 0.0
    for _ in range(iters):
        p = 1 / (1 + np.exp(-b * x))
        g = np.sum((a - p) * x) - lam * b
        h = -np.sum(p * (1 - p) * x * x) - lam
        step = g / h
        b -= step
        if abs(step) < 1e-15:
            break
    return b


def best_stump(x, y):
    """Exhaustive single split on one feature: (threshold, left mean, right mean)."""
    best = None
    values = sorted(set(x))
    for lo, hi in zip(values, values[1:]):
        thr = (lo + hi) / 2
        left = [yi for xi, yi in zip(x, y) if xi <= thr]
        right = [yi for xi, yi in zip(x, y) if xi > thr]
        ml, mr = sum(left) / len(left), sum(right) / len(right)
        sse = sum((v - ml) ** 2 for v in left) + sum((v - mr) ** 2 for v in right)
        if best is None or sse < best[0]:
            best = (sse, thr, ml, mr)
    return best[1:]


def nearest(query, pool):
    dists = [math.dist(query, row) for row in pool]
    return dists.index(min(dists))


def rmse(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)) / len(a))


def expit(z):
    return 1 / (1 + math.exp(-z))
