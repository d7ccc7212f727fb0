"""Domain types shared across the package."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .base_learners._common import as_matrix, as_vector


class Strategy(str, Enum):
    S = "S"
    ES = "ES"
    T = "T"
    DR = "DR"
    R = "R"

    @property
    def indirect(self) -> bool:
        return self in (Strategy.S, Strategy.ES, Strategy.T)


class Method(str, Enum):
    LR = "LR"
    GB = "GB"


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X)
        A = as_vector(self.A, X.shape[0], "A")
        Y = as_vector(self.Y, X.shape[0], "Y")
        if not np.all((A == 0) | (A == 1)):
            raise ValueError("treatment must be binary")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.A[idx], self.Y[idx])

    def has_both_groups(self) -> bool:
        return bool(self.A.min() == 0 and self.A.max() == 1)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from an arbitrary tuple of keys (order-sensitive)."""
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
