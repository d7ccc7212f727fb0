"""Compiled kernels for exact greedy regression trees.

Trees are stored as flat arrays: ``feature[node] < 0`` marks a leaf. Samples
go left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


def presort(X: np.ndarray) -> np.ndarray:
    """Row indices sorted by each feature, shape ``(n_features, n_rows)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def feature_major(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(X.T)


@njit(cache=True)
def grow_tree(Xt, order, y, w, max_depth, min_leaf):
    """Grow one tree; ``Xt`` is the feature-major (transposed) design."""
    n_features, n = order.shape
    cap = 2 ** (max_depth + 1) - 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    work = order.copy()
    buf = np.empty(n, dtype=np.int64)
    goes_left = np.zeros(Xt.shape[1], dtype=np.bool_)

    # explicit stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        sw = 0.0
        swy = 0.0
        sy = 0.0
        y_min = np.inf
        y_max = -np.inf
        for i in range(start, end):
            s = work[0, i]
            sw += w[s]
            swy += w[s] * y[s]
            sy += y[s]
            if y[s] < y_min:
                y_min = y[s]
            if y[s] > y_max:
                y_max = y[s]
        if y_min == y_max:
            value[node] = y_min  # exact, free of summation rounding
        elif sw > 0.0:
            value[node] = swy / sw
        else:
            value[node] = sy / m

        if depth >= max_depth or m < 2 * min_leaf or y_min == y_max or sw <= 0.0:
            continue

        parent_score = swy * swy / sw
        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        for f in range(n_features):
            swl = 0.0
            swyl = 0.0
            xf = Xt[f]
            for i in range(start, end - 1):
                s = work[f, i]
                swl += w[s]
                swyl += w[s] * y[s]
                n_left = i - start + 1
                if n_left < min_leaf:
                    continue
                if m - n_left < min_leaf:
                    break
                x_here = xf[s]
                x_next = xf[work[f, i + 1]]
                if x_here == x_next:
                    continue
                swr = sw - swl
                if swl <= 0.0 or swr <= 0.0:
                    continue
                swyr = swy - swyl
                gain = swyl * swyl / swl + swyr * swyr / swr - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * (x_here + x_next)

        if best_f < 0:
            continue

        n_left = 0
        for i in range(start, end):
            s = work[0, i]
            flag = Xt[best_f, s] <= best_thr
            goes_left[s] = flag
            if flag:
                n_left += 1
        # stable partition of each feature's sorted segment; children that
        # cannot split only need feature 0 (to compute their leaf values)
        n_part = n_features if depth + 1 < max_depth else 1
        for f in range(n_part):
            li = 0
            ri = n_left
            for i in range(start, end):
                s = work[f, i]
                if goes_left[s]:
                    buf[li] = s
                    li += 1
                else:
                    buf[ri] = s
                    ri += 1
            for i in range(m):
                work[f, start + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        stack[top, 0] = right_id
        stack[top, 1] = start + n_left
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = left_id
        stack[top, 1] = start
        stack[top, 2] = start + n_left
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True)
def add_tree_predictions(X, feature, threshold, left, right, value, scale, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += scale * value[node]
