from __future__ import annotations

import numpy as np

from ._common import as_matrix


def nearest_neighbor_index(query, pool) -> int:
    """Index of the pool row closest to ``query`` in Euclidean distance (lowest index on ties)."""
    pool = as_matrix(pool)
    query = np.asarray(query, dtype=float).ravel()
    if query.shape[0] != pool.shape[1]:
        raise ValueError(f"query has {query.shape[0]} features, pool has {pool.shape[1]}")
    return int(np.argmin(((pool - query) ** 2).sum(axis=1)))


def nearest_neighbor_indices(queries, pool) -> np.ndarray:
    """Vectorized :func:`nearest_neighbor_index` over the rows of ``queries``."""
    queries = as_matrix(queries)
    pool = as_matrix(pool)
    if queries.shape[1] != pool.shape[1]:
        raise ValueError("queries and pool differ in feature count")
    d2 = ((queries[:, None, :] - pool[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)
