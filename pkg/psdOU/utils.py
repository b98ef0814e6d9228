"""
Utility functions for psdOU.
"""

from functools import reduce
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, NumericalError

SeedLike = Union[None, int, np.random.SeedSequence]


def basis_matrix(i: int, j: int, d: int) -> np.ndarray:
    """
    Returns the standard basis matrix E^(ij) of M_d(R) (zero-based indices).
    """
    if not (0 <= i < d and 0 <= j < d):
        raise DimensionError(f"Index ({i}, {j}) outside a {d}x{d} matrix.")
    E = np.zeros((d, d))
    E[i, j] = 1.0
    return E


def kron(ops: Sequence[np.ndarray]) -> np.ndarray:
    """
    Computes the Kronecker product of a list of matrices.
    """
    return reduce(np.kron, ops)


def kron_sum(A: np.ndarray, B: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Kronecker sum A ⊗ I + I ⊗ B (B defaults to A).
    """
    B = A if B is None else B
    return kron([A, np.eye(B.shape[0])]) + kron([np.eye(A.shape[0]), B])


def as_square(M: object, name: str = "matrix") -> np.ndarray:
    """
    Converts to a float array and checks it is a finite square matrix.
    """
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} has non-finite entries.")
    return arr


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    """
    The one generator algorithm used across the project: PCG64.
    """
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: SeedLike, n: int) -> List[np.random.Generator]:
    """
    Independent per-replication streams derived deterministically from a master seed.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [make_rng(child) for child in root.spawn(n)]
