"""
Symmetric-matrix algebra: the value types SymMat, PsdMat, HalfVec and
CommutationMatrix, vectorisation operators, matrix exponential/logarithm and
positive semidefiniteness checks.

Conventions:
  vec stacks columns (column-major).
  vech stacks the columns of the lower triangle, so for d = 2 the order is
  (x11, x21, x22). This ordering is the wire format of every CSV and JSON
  artifact the package writes.
"""

import logging
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import BranchCutError, DimensionError, NotPositiveSemidefiniteError, NumericalError
from .utils import as_square, basis_matrix

logger = logging.getLogger(__name__)

PSD_TOL: float = 1e-10
SYMMETRY_TOL: float = 1e-9
SQRT_CLIP_TOL: float = 1e-10


class SymMat:
    """
    Immutable symmetric d x d matrix.

    Inputs within SYMMETRY_TOL * (1 + max|entry|) of symmetric are replaced by
    (M + M^T) / 2; larger asymmetry raises DimensionError.
    """

    __slots__ = ("_entries",)
    __array_priority__ = 20

    def __init__(self, entries: object, sym_tol: float = SYMMETRY_TOL) -> None:
        if isinstance(entries, SymMat):
            arr = np.array(entries.entries)
        else:
            arr = as_square(entries, "SymMat entries")
        asym = float(np.max(np.abs(arr - arr.T)))
        if asym > sym_tol * (1.0 + float(np.max(np.abs(arr)))):
            raise DimensionError(f"Matrix is not symmetric (max asymmetry {asym:.3e}).")
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        self._entries: np.ndarray = arr

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return np.array(self._entries, dtype=dtype)

    def __add__(self, other: object) -> "SymMat":
        return SymMat(self._entries + _raw(other, self.dim))

    __radd__ = __add__

    def __sub__(self, other: object) -> "SymMat":
        return SymMat(self._entries - _raw(other, self.dim))

    def __rsub__(self, other: object) -> "SymMat":
        return SymMat(_raw(other, self.dim) - self._entries)

    def __mul__(self, scalar: float) -> "SymMat":
        return SymMat(self._entries * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SymMat":
        return SymMat(-self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymMat):
            return NotImplemented
        return bool(np.array_equal(self._entries, other._entries))

    __hash__ = None  # type: ignore[assignment]

    def frobenius(self) -> float:
        return float(np.linalg.norm(self._entries))

    def eigenvalues(self) -> np.ndarray:
        return symmetric_eigenvalues(self._entries)

    def to_list(self) -> List[List[float]]:
        return self._entries.tolist()

    @classmethod
    def zeros(cls, d: int) -> "SymMat":
        return cls(np.zeros((d, d)))

    @classmethod
    def identity(cls, d: int) -> "SymMat":
        return cls(np.eye(d))

    def __repr__(self) -> str:
        return f"SymMat(dim={self.dim}, entries={self.to_list()})"


class PsdMat(SymMat):
    """
    Symmetric matrix certified positive semidefinite.

    eig_floor holds the smallest eigenvalue found at certification; it is
    never below -tol.
    """

    __slots__ = ("_eig_floor",)

    def __init__(self, entries: object, tol: float = PSD_TOL) -> None:
        super().__init__(entries)
        floor = float(self.eigenvalues()[0])
        if floor < -tol:
            raise NotPositiveSemidefiniteError(
                f"Smallest eigenvalue {floor:.6e} is below -{tol:.1e}.", eig_floor=floor
            )
        self._eig_floor: float = floor

    @property
    def eig_floor(self) -> float:
        return self._eig_floor

    @property
    def base(self) -> SymMat:
        return SymMat(self.entries)

    def __repr__(self) -> str:
        return f"PsdMat(dim={self.dim}, eig_floor={self._eig_floor:.3e}, entries={self.to_list()})"


class HalfVec:
    """
    Half-vectorisation of a symmetric matrix: length d(d+1)/2 in vech order.
    """

    __slots__ = ("dim", "data")

    def __init__(self, data: object, dim: Optional[int] = None) -> None:
        arr = np.array(data, dtype=float).ravel()
        inferred = _dim_from_vech_length(arr.size)
        if dim is not None and dim != inferred:
            raise DimensionError(f"HalfVec of length {arr.size} does not belong to d={dim}.")
        arr.setflags(write=False)
        self.dim: int = inferred
        self.data: np.ndarray = arr

    def to_list(self) -> List[float]:
        return self.data.tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HalfVec):
            return NotImplemented
        return bool(np.array_equal(self.data, other.data))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"HalfVec(dim={self.dim}, data={self.to_list()})"


class CommutationMatrix:
    """
    The d^2 x d^2 permutation K_d with K_d vec(A) = vec(A^T).
    """

    __slots__ = ("dim", "matrix")

    def __init__(self, dim: int, matrix: np.ndarray) -> None:
        matrix.setflags(write=False)
        self.dim: int = dim
        self.matrix: np.ndarray = matrix

    def __matmul__(self, other: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(other)

    def __rmatmul__(self, other: np.ndarray) -> np.ndarray:
        return np.asarray(other) @ self.matrix

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return np.array(self.matrix, dtype=dtype)


MatrixLike = Union[SymMat, np.ndarray]


def _raw(x: object, d: int) -> np.ndarray:
    arr = np.asarray(x.entries if isinstance(x, SymMat) else x, dtype=float)
    if arr.shape != (d, d):
        raise DimensionError(f"Expected a {d}x{d} matrix, got shape {arr.shape}.")
    return arr


def _dim_from_vech_length(n: int) -> int:
    d = int(round((np.sqrt(8 * n + 1) - 1) / 2))
    if d < 1 or d * (d + 1) // 2 != n:
        raise DimensionError(f"Length {n} is not d(d+1)/2 for any d >= 1.")
    return d


def _vech_indices(d: int) -> Tuple[np.ndarray, np.ndarray]:
    # triu of the transpose, read back as (row, col) of the lower triangle column by column
    cols, rows = np.triu_indices(d)
    return rows, cols


def vech(X: MatrixLike) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    rows, cols = _vech_indices(arr.shape[0])
    return arr[rows, cols].copy()


def unvech(v: object) -> np.ndarray:
    arr = np.asarray(v, dtype=float).ravel()
    d = _dim_from_vech_length(arr.size)
    rows, cols = _vech_indices(d)
    X = np.zeros((d, d))
    X[rows, cols] = arr
    X[cols, rows] = arr
    return X


def vec(X: object) -> np.ndarray:
    return np.asarray(X, dtype=float).reshape(-1, order="F").copy()


def unvec(v: object, d: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(v, dtype=float).ravel()
    d = int(round(np.sqrt(arr.size))) if d is None else d
    if d * d != arr.size:
        raise DimensionError(f"Vector of length {arr.size} is not vec of a {d}x{d} matrix.")
    return arr.reshape(d, d, order="F")


def halfvec_transform(x: Union[SymMat, HalfVec]) -> Union[HalfVec, SymMat]:
    """
    vech for a SymMat, unvech for a HalfVec.
    """
    if isinstance(x, HalfVec):
        return SymMat(unvech(x.data))
    if isinstance(x, SymMat):
        return HalfVec(vech(x.entries), dim=x.dim)
    raise DimensionError(f"halfvec_transform expects SymMat or HalfVec, got {type(x).__name__}.")


def trace_inner(X: object, Y: object) -> float:
    """
    tr(X^T Y) computed as vec(X) . vec(Y).
    """
    x, y = vec(X), vec(Y)
    if x.size != y.size:
        raise DimensionError("trace_inner needs matrices of equal size.")
    return float(x @ y)


def vech_labels(d: int, prefix: str = "s") -> List[str]:
    """
    Column names s_11, s_21, ... in vech order (one-based).
    """
    rows, cols = _vech_indices(d)
    return [f"{prefix}_{r + 1}{c + 1}" for r, c in zip(rows, cols)]


def commutation_matrix(d: int) -> CommutationMatrix:
    if d < 1:
        raise DimensionError("commutation_matrix needs d >= 1.")
    idx = np.arange(d * d).reshape(d, d, order="F")
    K = np.zeros((d * d, d * d))
    K[idx.ravel(order="F"), idx.T.ravel(order="F")] = 1.0
    return CommutationMatrix(d, K)


def duplication_matrix(d: int) -> np.ndarray:
    """
    D_d with vec(X) = D_d vech(X) for symmetric X.
    """
    rows, cols = _vech_indices(d)
    D = np.zeros((d * d, rows.size))
    for k, (i, j) in enumerate(zip(rows, cols)):
        D[j * d + i, k] = 1.0
        D[i * d + j, k] = 1.0
    return D


def elimination_matrix(d: int) -> np.ndarray:
    """
    L_d with vech(X) = L_d vec(X); L_d D_d = I.
    """
    rows, cols = _vech_indices(d)
    L = np.zeros((rows.size, d * d))
    L[np.arange(rows.size), cols * d + rows] = 1.0
    return L


def symmetric_basis(d: int) -> List[np.ndarray]:
    """
    Orthonormal basis of S_d for the trace inner product, in vech order.
    """
    basis = []
    for i, j in zip(*_vech_indices(d)):
        if i == j:
            basis.append(basis_matrix(i, i, d))
        else:
            basis.append((basis_matrix(i, j, d) + basis_matrix(j, i, d)) / np.sqrt(2.0))
    return basis


def matrix_exponential(M: object, t: float = 1.0) -> np.ndarray:
    """
    e^{Mt} by scaling and squaring with Pade approximants (scipy.linalg.expm).
    """
    arr = as_square(M, "matrix_exponential argument")
    if not np.isfinite(t):
        raise NumericalError("matrix_exponential needs a finite t.")
    return linalg.expm(arr * float(t))


def matrix_exponential_batch(M: object, ts: object) -> np.ndarray:
    """
    Stack of e^{M t_k}, shape (len(ts), d, d).
    """
    arr = as_square(M, "matrix_exponential argument")
    times = np.asarray(ts, dtype=float).ravel()
    if times.size == 0:
        return np.zeros((0,) + arr.shape)
    return linalg.expm(arr[None, :, :] * times[:, None, None])


def matrix_logarithm(M: object, tol: float = 1e-12) -> np.ndarray:
    """
    Principal real logarithm. Raises BranchCutError when an eigenvalue lies on
    the closed negative real axis (within tol relative to the spectral radius).
    """
    arr = as_square(M, "matrix_logarithm argument")
    eigs = np.linalg.eigvals(arr)
    scale = max(1.0, float(np.max(np.abs(eigs))))
    on_cut = (np.abs(eigs.imag) <= tol * scale) & (eigs.real <= tol * scale)
    if np.any(on_cut):
        raise BranchCutError(f"Spectrum touches the branch cut: {eigs[on_cut]}.")
    L = linalg.logm(arr)
    if np.iscomplexobj(L):
        if np.max(np.abs(L.imag)) > 1e-8 * (1.0 + np.max(np.abs(L.real))):
            raise BranchCutError("Principal logarithm is not real.")
        L = L.real
    return np.asarray(L, dtype=float)


def symmetric_eigenvalues(X: object) -> np.ndarray:
    """
    Ascending eigenvalues of a symmetric matrix (LAPACK symmetric driver).
    """
    arr = np.asarray(X.entries if isinstance(X, SymMat) else X, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("Eigen-decomposition of a matrix with non-finite entries.")
    return linalg.eigvalsh(arr)


def _effective_tol(X: np.ndarray, tol: float, scale_aware: bool) -> float:
    return tol * (1.0 + float(np.linalg.norm(X))) if scale_aware else tol


def psd_check(X: MatrixLike, tol: float = PSD_TOL, scale_aware: bool = False) -> PsdMat:
    """
    Certifies X as positive semidefinite (smallest eigenvalue >= -tol).

    Raises NotPositiveSemidefiniteError carrying the offending eigenvalue.
    With scale_aware the tolerance is tol * (1 + ||X||_F).
    """
    if tol < 0:
        raise ValueError("tol must be non-negative.")
    arr = np.asarray(X, dtype=float)
    return PsdMat(arr, tol=_effective_tol(arr, tol, scale_aware))


def is_psd(X: MatrixLike, tol: float = PSD_TOL, scale_aware: bool = False) -> bool:
    arr = np.asarray(X, dtype=float)
    return bool(symmetric_eigenvalues(arr)[0] >= -_effective_tol(arr, tol, scale_aware))


def is_positive_definite(X: MatrixLike, tol: float = PSD_TOL, scale_aware: bool = False) -> bool:
    """
    Membership in S_d^{++}: smallest eigenvalue > +tol.
    """
    arr = np.asarray(X, dtype=float)
    return bool(symmetric_eigenvalues(arr)[0] > _effective_tol(arr, tol, scale_aware))


def sqrtm_psd(X: MatrixLike, clip_tol: float = SQRT_CLIP_TOL) -> np.ndarray:
    """
    Symmetric square root of a PSD matrix. Eigenvalues in [-clip_tol, 0) are
    clipped to zero; anything more negative is rejected.
    """
    arr = np.asarray(X, dtype=float)
    w, V = linalg.eigh(0.5 * (arr + arr.T))
    if w[0] < -clip_tol:
        raise NotPositiveSemidefiniteError(
            f"Square root of a matrix with eigenvalue {w[0]:.6e}.", eig_floor=float(w[0])
        )
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T
