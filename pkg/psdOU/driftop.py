"""
The drift operator X -> AX + XA^T on symmetric matrices: application,
semigroup, Kronecker-sum generator, inverses, stability, and the two
constructive recovery procedures (from the images of the diagonal basis
matrices, and from a black-box semigroup).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .errors import DimensionError, NumericalError, SingularOperatorError, UnstableDriftError
from .symcore import (
    SymMat,
    duplication_matrix,
    matrix_exponential,
    matrix_exponential_batch,
    unvec,
    vec,
)
from .utils import as_square, basis_matrix, kron_sum

logger = logging.getLogger(__name__)

SOLVE_COND_MAX: float = 1e12
SemigroupEvaluator = Callable[[float, np.ndarray], object]


class DriftOperator:
    """
    Represents the operator X -> AX + XA^T on S_d by its matrix A.

    gen_small = A ⊗ I + I ⊗ A is cached; it is the vec-space matrix of the
    operator, and the big operator acting on d^2 x d^2 second moments is the
    drift operator of gen_small itself.
    """

    __slots__ = ("_A", "_gen_small")

    def __init__(self, A: object) -> None:
        arr = as_square(A, "drift matrix A")
        arr.setflags(write=False)
        gen = kron_sum(arr)
        gen.setflags(write=False)
        self._A: np.ndarray = arr
        self._gen_small: np.ndarray = gen

    @property
    def A(self) -> np.ndarray:
        return self._A

    @property
    def dim(self) -> int:
        return self._A.shape[0]

    @property
    def gen_small(self) -> np.ndarray:
        return self._gen_small

    def __call__(self, X: SymMat) -> SymMat:
        return apply_drift(self, X)

    def to_dict(self) -> Dict[str, object]:
        return {"d": self.dim, "A": self._A.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "DriftOperator":
        if set(data) != {"d", "A"}:
            raise DimensionError(f"DriftOperator JSON needs exactly keys d and A, got {sorted(data)}.")
        op = cls(data["A"])
        if op.dim != data["d"]:
            raise DimensionError(f"Declared d={data['d']} but A is {op.dim}x{op.dim}.")
        return op

    def __repr__(self) -> str:
        return f"DriftOperator(d={self.dim}, A={self._A.tolist()})"


@dataclass(frozen=True)
class StabilityReport:
    spectrum: List[complex]
    margin: float

    @property
    def stable(self) -> bool:
        return self.margin < 0


def _check_dim(op: DriftOperator, X: object) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.shape != (op.dim, op.dim):
        raise DimensionError(f"Operator acts on {op.dim}x{op.dim} matrices, got shape {arr.shape}.")
    return arr


def apply_drift(op: DriftOperator, X: SymMat) -> SymMat:
    """
    AX + XA^T.
    """
    arr = _check_dim(op, X)
    return SymMat(op.A @ arr + arr @ op.A.T)


def semigroup_apply(op: DriftOperator, t: float, X: SymMat) -> SymMat:
    """
    e^{At} X e^{A^T t}.
    """
    arr = _check_dim(op, X)
    E = matrix_exponential(op.A, t)
    return SymMat(E @ arr @ E.T)


def semigroup_evaluator(op: DriftOperator) -> SemigroupEvaluator:
    """
    Black-box (t, X) -> e^{At} X e^{A^T t}, the input format of extract_generator.
    """
    def evaluate(t: float, X: np.ndarray) -> np.ndarray:
        return semigroup_apply(op, t, SymMat(X)).entries

    return evaluate


def generator_matrix(op: DriftOperator) -> np.ndarray:
    return np.array(op.gen_small)


def reduced_generator(op: DriftOperator) -> np.ndarray:
    """
    The generator in vech coordinates: D_d^+ (A ⊗ I + I ⊗ A) D_d.
    """
    D = duplication_matrix(op.dim)
    return np.linalg.pinv(D) @ op.gen_small @ D


def _pair_sum_gap(eigs: np.ndarray) -> float:
    sums = eigs[:, None] + eigs[None, :]
    return float(np.min(np.abs(sums)) / max(1.0, float(np.max(np.abs(eigs)))))


def _kron_sum_condition(K: np.ndarray) -> float:
    try:
        cond = float(np.linalg.cond(K, 1))
    except np.linalg.LinAlgError:
        return float("inf")
    return cond if np.isfinite(cond) else float("inf")


def solve_drift_equation(
    op: DriftOperator,
    Y: Union[SymMat, np.ndarray],
    level: str = "small",
    cond_max: float = SOLVE_COND_MAX,
) -> Union[SymMat, np.ndarray]:
    """
    Solves AX + XA^T = Y on S_d (level="small") or GV + VG^T = W on S_{d^2}
    with G = A ⊗ I + I ⊗ A (level="big").

    The small system is solved as the vec-linear Kronecker-sum system by LU
    with partial pivoting; the big one by Bartels-Stewart. Both refuse with
    SingularOperatorError when an eigenvalue pair of the relevant generator
    (nearly) sums to zero, or when the condition estimate exceeds cond_max.
    """
    if level == "small":
        arr = _check_dim(op, Y)
        K = op.gen_small
        cond = _kron_sum_condition(K)
        if cond > cond_max or _pair_sum_gap(np.linalg.eigvals(op.A)) < 1.0 / cond_max:
            raise SingularOperatorError(
                f"Drift operator is singular or ill-conditioned (condition estimate {cond:.3e})."
            )
        x = linalg.lu_solve(linalg.lu_factor(K), vec(arr))
        X = unvec(x, op.dim)
        X = 0.5 * (X + X.T)
        residual = float(np.linalg.norm(op.A @ X + X @ op.A.T - arr))
        if residual > 1e-10 * (1.0 + float(np.linalg.norm(arr))):
            logger.warning("solve_drift_equation(small): residual %.3e above target.", residual)
        return SymMat(X)
    if level == "big":
        n = op.dim * op.dim
        W = np.asarray(Y, dtype=float)
        if W.shape != (n, n):
            raise DimensionError(f"Big-level right-hand side must be {n}x{n}, got {W.shape}.")
        G = op.gen_small
        if _pair_sum_gap(np.linalg.eigvals(G)) < 1.0 / cond_max:
            raise SingularOperatorError("Big drift operator is singular: eigenvalue pair of the generator sums to zero.")
        V = linalg.solve_continuous_lyapunov(G, W)
        V = 0.5 * (V + V.T)
        residual = float(np.linalg.norm(G @ V + V @ G.T - W))
        if residual > 1e-10 * (1.0 + float(np.linalg.norm(W))):
            logger.warning("solve_drift_equation(big): residual %.3e above target.", residual)
        return V
    raise ValueError(f"level must be 'small' or 'big', got {level!r}.")


def stability_margin(op: DriftOperator) -> StabilityReport:
    eigs = np.linalg.eigvals(op.A)
    order = np.argsort(-eigs.real, kind="stable")
    spectrum = [complex(z) for z in eigs[order]]
    margin = float(np.max(eigs.real))
    # rounding noise around a purely imaginary spectrum must not count as stable
    if abs(margin) <= 1e-12 * (1.0 + float(np.linalg.norm(op.A))):
        margin = 0.0
    return StabilityReport(spectrum=spectrum, margin=margin)


def require_stable(op: DriftOperator) -> StabilityReport:
    report = stability_margin(op)
    if not report.stable:
        raise UnstableDriftError(f"Drift is not stable: max Re σ(A) = {report.margin:.6g}.")
    return report


def decay_horizon(op: DriftOperator, tol: float) -> float:
    """
    A horizon T with ||e^{AT}||_2^2 <= tol. Starts from the margin-based
    guess log(tol) / (2 * margin) and stretches it until the bound holds,
    which absorbs transient growth of non-normal A.
    """
    report = require_stable(op)
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1).")
    T = np.log(tol) / (2.0 * report.margin)
    for _ in range(80):
        if np.linalg.norm(matrix_exponential(op.A, T), 2) ** 2 <= tol:
            return float(T)
        T *= 1.25
    raise NumericalError("Could not find a decay horizon; the drift decays too slowly.")


def drift_integral(op: DriftOperator, gamma: SymMat, t: Union[float, Sequence[float]]) -> np.ndarray:
    """
    ∫_0^t e^{Au} γ e^{A^T u} du via the exponential of the augmented generator
    [[G, vec γ], [0, 0]]. Valid for singular operators (A = 0 gives γ t).
    Returns a (d, d) array for scalar t and (n, d, d) for a sequence.
    """
    g = _check_dim(op, gamma)
    n = op.dim * op.dim
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = op.gen_small
    M[:n, n] = vec(g)
    scalar = np.ndim(t) == 0
    E = matrix_exponential_batch(M, np.atleast_1d(t))
    cols = E[:, :n, n]
    out = cols.reshape(-1, op.dim, op.dim).transpose(0, 2, 1)
    out = 0.5 * (out + out.transpose(0, 2, 1))
    return out[0] if scalar else out


def recover_from_basis_action(images: Sequence[SymMat], tol: float = 1e-12) -> DriftOperator:
    """
    Rebuilds A from the images 𝐀E^(ii), i = 1..d: column i of A is read off
    column i of the i-th image, with the diagonal entry halved.
    """
    d = len(images)
    if d < 1:
        raise DimensionError("recover_from_basis_action needs at least one image.")
    A = np.zeros((d, d))
    for i, image in enumerate(images):
        img = np.asarray(image, dtype=float)
        if img.shape != (d, d):
            raise DimensionError(f"Image {i} has shape {img.shape}, expected ({d}, {d}).")
        scale = tol * (1.0 + float(np.max(np.abs(img))))
        if np.max(np.abs(img - img.T)) > scale:
            raise DimensionError(f"Image {i} is not symmetric.")
        outside = np.delete(np.delete(img, i, axis=0), i, axis=1)
        if outside.size and np.max(np.abs(outside)) > scale:
            raise DimensionError(f"Image {i} has entries outside row/column {i}; not of the form 𝐀E^(ii).")
        A[:, i] = img[:, i]
        A[i, i] = img[i, i] / 2.0
    return DriftOperator(A)


class _WindowTooLarge(Exception):
    pass


def _d_tilde(semigroup: SemigroupEvaluator, t: float, d: int) -> np.ndarray:
    img11 = np.asarray(semigroup(t, basis_matrix(0, 0, d)), dtype=float)
    p = img11[0, 0]
    if not p > 0:
        raise _WindowTooLarge(t)
    D11 = np.sqrt(p)
    D = np.zeros((d, d))
    D[0, 0] = D11
    D[1:, 0] = img11[1:, 0] / D11
    for j in range(1, d):
        img = np.asarray(semigroup(t, basis_matrix(0, j, d) + basis_matrix(j, 0, d)), dtype=float)
        D[0, j] = img[0, 0] / (2.0 * D11)
        D[1:, j] = img[0, 1:] / D11 - img[0, 0] * img11[1:, 0] / (2.0 * D11 ** 3)
    return D


def _central(semigroup: SemigroupEvaluator, h: float, d: int) -> np.ndarray:
    return (_d_tilde(semigroup, h, d) - _d_tilde(semigroup, -h, d)) / (2.0 * h)


def extract_generator(
    semigroup: SemigroupEvaluator,
    d: int,
    h0: Optional[float] = None,
    tol: float = 1e-8,
    max_halvings: int = 20,
) -> DriftOperator:
    """
    Recovers A from a black-box semigroup (t, X) -> e^{𝐀t}X.

    D(t) is rebuilt from the images of E^(11) and E^(1j) + E^(j1) (square root
    of the (1,1) entry, then first column, first row and interior), and
    A = dD/dt at 0 by central differences at h and 2h combined with one level
    of Richardson extrapolation. The evaluator is called at negative times.

    Raises NumericalError when the (1,1) positivity window cannot be found
    after max_halvings halvings, or when the semigroup fails the congruence
    residual test (it is then not of the form X -> D X D^T).
    """
    if d < 1:
        raise DimensionError("extract_generator needs d >= 1.")
    if h0 is None:
        pilot = 1e-4
        for _ in range(max_halvings):
            try:
                rate = float(np.linalg.norm(_central(semigroup, pilot, d)))
                break
            except _WindowTooLarge:
                pilot /= 2.0
        else:
            raise NumericalError("Positivity window for the (1,1) entry not found at the pilot step.")
        h0 = 1e-3 / (1.0 + rate)

    h = h0
    for attempt in range(max_halvings + 1):
        try:
            c1 = _central(semigroup, h, d)
            c2 = _central(semigroup, 2.0 * h, d)
            D_h = _d_tilde(semigroup, h, d)
            break
        except _WindowTooLarge:
            logger.warning("extract_generator: (1,1) entry not positive at step %.3e; halving.", h)
            h /= 2.0
    else:
        raise NumericalError(
            f"Window shrink failure: (e^(𝐀t)E11)_11 <= 0 even at step {h:.3e}; "
            "the semigroup is not of congruence form or the window is too large."
        )

    probe = np.ones((d, d)) + np.diag(np.arange(1.0, d + 1.0))
    expected = np.asarray(semigroup(h, probe), dtype=float)
    residual = float(np.linalg.norm(expected - D_h @ probe @ D_h.T))
    if residual > tol * (1.0 + float(np.linalg.norm(probe))):
        raise NumericalError(f"Semigroup is not representable as X -> D X D^T (residual {residual:.3e}).")

    A = (4.0 * c1 - c2) / 3.0
    logger.debug("extract_generator: step %.3e after %d halvings.", h, attempt)
    return DriftOperator(A)
