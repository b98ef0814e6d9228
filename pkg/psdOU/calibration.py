"""
Inverse problems for psd OU processes.

- derive_driver_charfn: the driver exponent ψ_L(Z) = -Dψ(Z)(A^T Z + ZA)
  that makes a given (operator self-decomposable) law stationary.
- drift_condition_check: whether -Aγ_μ - γ_μA^T is PSD, i.e. whether the
  resulting driver is a matrix subordinator.
- mom_fit: method-of-moments estimate of (A, E(L_1), var(vec L_1)) from
  stationary mean, variance and one or more autocovariances.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .driftop import DriftOperator, solve_drift_equation, stability_margin
from .errors import BranchCutError, DimensionError, NumericalError, ParameterError, SingularOperatorError
from .mixing import MixingLaw
from .moments import MomentReport, stationary_cumulant, stationary_moments
from .simulation import OUProcessSpec
from .subordinators import GaussMixtureCP
from .symcore import (
    SymMat,
    duplication_matrix,
    elimination_matrix,
    is_psd,
    matrix_exponential,
    matrix_logarithm,
    symmetric_basis,
    symmetric_eigenvalues,
)
from .utils import basis_matrix, kron_sum

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], complex]
GradientEvaluator = Callable[[np.ndarray], np.ndarray]

VAR_COND_MAX: float = 1e10


def numerical_gradient(psi: Evaluator, Z: object, step: Optional[float] = None) -> np.ndarray:
    """
    Riesz representative of Dψ(Z): the complex symmetric matrix R with
    Dψ(Z)X = tr(RX), from central differences along an orthonormal basis of
    S_d. Default step 1e-5 (1 + ||Z||_F).
    """
    Zm = SymMat(Z).entries
    d = Zm.shape[0]
    h = 1e-5 * (1.0 + float(np.linalg.norm(Zm))) if step is None else float(step)
    R = np.zeros((d, d), dtype=complex)
    for E in symmetric_basis(d):
        slope = (complex(psi(Zm + h * E)) - complex(psi(Zm - h * E))) / (2.0 * h)
        R += slope * E
    if not np.all(np.isfinite(R)):
        raise NumericalError("Gradient evaluation produced non-finite values.")
    return R


class CumulantTransform:
    """
    Log characteristic function ψ of a target law on S_d, with an optional
    analytic Riesz-gradient and the drift γ_μ of the target.
    """

    def __init__(
        self,
        psi: Evaluator,
        dim: int,
        grad: Optional[GradientEvaluator] = None,
        gamma_mu: Optional[object] = None,
        step: Optional[float] = None,
    ) -> None:
        self.psi: Evaluator = psi
        self.dim: int = int(dim)
        self.grad: Optional[GradientEvaluator] = grad
        self.gamma_mu: SymMat = SymMat.zeros(self.dim) if gamma_mu is None else SymMat(gamma_mu)
        self.step: Optional[float] = step

    @property
    def grad_mode(self) -> str:
        return "analytic" if self.grad is not None else "numerical"

    def __call__(self, Z: object) -> complex:
        return complex(self.psi(SymMat(Z).entries))

    def gradient(self, Z: object) -> np.ndarray:
        Zm = SymMat(Z).entries
        if self.grad is not None:
            return np.asarray(self.grad(Zm), dtype=complex)
        return numerical_gradient(self.psi, Zm, self.step)

    @classmethod
    def linear(cls, gamma: object) -> "CumulantTransform":
        """Degenerate target at γ: ψ(Z) = i tr(γZ)."""
        g = SymMat(gamma)
        G = g.entries
        return cls(lambda Z: 1j * float(np.trace(G @ Z)), g.dim, grad=lambda Z: 1j * G, gamma_mu=g)

    @classmethod
    def gamma_1d(cls, shape: float, rate: float) -> "CumulantTransform":
        """Gamma(shape, rate) on R+: ψ(z) = -shape log(1 - iz/rate)."""
        if not (shape > 0 and rate > 0):
            raise ParameterError("gamma_1d needs shape > 0 and rate > 0.")

        def psi(Z):
            z = float(np.asarray(Z).reshape(-1)[0])
            return complex(-shape * np.log(1.0 - 1j * z / rate))

        def grad(Z):
            z = float(np.asarray(Z).reshape(-1)[0])
            return np.array([[1j * shape / (rate - 1j * z)]])

        return cls(psi, 1, grad=grad)

    @classmethod
    def from_stationary(cls, spec: OUProcessSpec, epsabs: float = 1e-11) -> "CumulantTransform":
        """The stationary law of spec, evaluated by quadrature; gradient by finite differences."""
        gamma = stationary_moments(spec).gamma_sigma
        return cls(lambda Z: stationary_cumulant(spec, Z, epsabs=epsabs), spec.dim, gamma_mu=gamma, step=1e-4)


def derive_driver_charfn(
    target: CumulantTransform, drift: DriftOperator, check_ray: bool = True
) -> Evaluator:
    """
    ψ_L(Z) = -Dψ(Z)(A^T Z + ZA) for Z != 0 and 0 at Z = 0.

    With check_ray the value is probed along Z = 10^-k I; a limit that does
    not go to zero is logged as a warning.
    """
    A = drift.A
    if target.dim != drift.dim:
        raise DimensionError(f"Target has d={target.dim}, drift has d={drift.dim}.")

    def psi_L(Z: object) -> complex:
        Zm = SymMat(Z).entries
        if not np.any(Zm):
            return 0j
        R = target.gradient(Zm)
        value = -complex(np.trace(R @ (A.T @ Zm + Zm @ A)))
        if not np.isfinite(value):
            raise NumericalError("Driver exponent is not finite.")
        return value

    if check_ray:
        probe = np.eye(drift.dim)
        values = [abs(psi_L(probe * 10.0 ** -k)) for k in (1, 4, 7)]
        if values[-1] > 1e-3 * (1.0 + values[0]):
            logger.warning("Driver exponent does not vanish along Z -> 0 (|ψ_L| = %s).", values)
    return psi_L


@dataclass(frozen=True, eq=False)
class DriftCondition:
    matrix: SymMat
    spectrum: np.ndarray
    is_psd: bool

    def to_dict(self) -> Dict[str, object]:
        return {"matrix": self.matrix.to_list(), "spectrum": self.spectrum.tolist(), "is_psd": self.is_psd}


def drift_condition_check(drift: DriftOperator, gamma_mu: object) -> DriftCondition:
    """
    -Aγ_μ - γ_μA^T with its ascending spectrum and PSD verdict.
    """
    g = SymMat(gamma_mu)
    if g.dim != drift.dim:
        raise DimensionError(f"gamma_mu is {g.dim}x{g.dim}, drift has d={drift.dim}.")
    M = SymMat(-(drift.A @ g.entries) - g.entries @ drift.A.T)
    spectrum = symmetric_eigenvalues(M)
    return DriftCondition(matrix=M, spectrum=spectrum, is_psd=is_psd(M, scale_aware=True))


def non_subordinator_scenario(
    A: object,
    gamma_mu: object,
    rate: float,
    C: object,
    mixing: MixingLaw,
    sigma0: Optional[object] = None,
) -> OUProcessSpec:
    """
    OU process driven by Gaussian-mixture jumps plus the drift
    -Aγ_μ - γ_μA^T. When that drift is not PSD the driver is flagged
    non_subordinator, yet the stationary law stays on the PSD cone.
    """
    op = DriftOperator(A)
    condition = drift_condition_check(op, gamma_mu)
    if condition.is_psd:
        logger.info("Drift -Aγ - γA^T is PSD; the scenario driver is a genuine subordinator.")
    driver = GaussMixtureCP(rate=rate, C=C, mixing=mixing, drift=condition.matrix)
    return OUProcessSpec(op, driver, sigma0)


# ---------------------------------------------------------------------------
# Method of moments
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MoMEstimate:
    A_hat: DriftOperator
    mean_L: SymMat
    var_vec_L: np.ndarray
    lags: List[float]
    stable: bool
    residuals: Dict[str, float] = field(default_factory=dict)
    mean_L_psd: bool = True
    var_vec_L_psd: bool = True


def _vech_generator_basis(d: int) -> np.ndarray:
    """Columns: vec of D_d^+ (E_ij ⊗ I + I ⊗ E_ij) D_d for E_ij in column-major order."""
    D = duplication_matrix(d)
    Dp = np.linalg.pinv(D)
    cols = []
    for j in range(d):
        for i in range(d):
            cols.append((Dp @ kron_sum(basis_matrix(i, j, d)) @ D).ravel())
    return np.column_stack(cols)


def _project_psd(V: np.ndarray):
    w, U = np.linalg.eigh(0.5 * (V + V.T))
    clipped = float(-w[w < 0].sum()) if np.any(w < 0) else 0.0
    return (U * np.clip(w, 0.0, None)) @ U.T, clipped


def _lag_candidates(report: MomentReport, lag: Optional[float]) -> List[float]:
    available = sorted(h for h in report.autocov if h > 0)
    if not available:
        raise ParameterError("mom_fit needs an autocovariance at a positive lag.")
    if lag is None:
        return available[:1]
    if not any(np.isclose(lag, h) for h in available):
        raise ParameterError(f"Lag {lag} not in the report (available: {available}).")
    return [h for h in reversed(available) if h <= lag * (1 + 1e-12)]


def mom_fit(
    empirical: MomentReport,
    lag: Optional[float] = None,
    multi_lag: bool = False,
    cond_max: float = VAR_COND_MAX,
) -> MoMEstimate:
    """
    Method-of-moments estimate of (A, E(L_1), var(vec L_1)).

    Works in vech coordinates, where var(vech Σ) is invertible:
    G_h = logm(cov_vech(h) var_vech^{-1}) / h, and A_hat is the least-squares
    solution of D^+(A ⊗ I + I ⊗ A)D = G_h (stacked over all positive lags
    with multi_lag). If the logarithm fails at `lag`, the next smaller lag
    in the report is tried.
    """
    d = empirical.dim
    D = duplication_matrix(d)
    L = elimination_matrix(d)
    V, clipped = _project_psd(empirical.var_vec)
    if clipped > 0:
        logger.info("mom_fit: clipped %.3e of negative spectral mass from var_vec.", clipped)
    var_vech = L @ V @ L.T
    cond = float(np.linalg.cond(var_vech))
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularOperatorError(f"var(vech) is too ill-conditioned to invert (condition {cond:.3e}).")
    var_inv = np.linalg.inv(var_vech)

    def generator_at(h: float) -> np.ndarray:
        cov_vech = L @ empirical.autocov[h] @ L.T
        return matrix_logarithm(cov_vech @ var_inv) / h

    if multi_lag:
        lags = sorted(h for h in empirical.autocov if h > 0)
        if not lags:
            raise ParameterError("mom_fit needs an autocovariance at a positive lag.")
        targets = [generator_at(h) for h in lags]
    else:
        targets, lags = [], []
        last_error: Optional[BranchCutError] = None
        for h in _lag_candidates(empirical, lag):
            try:
                targets = [generator_at(h)]
                lags = [h]
                break
            except BranchCutError as exc:
                logger.warning("mom_fit: logarithm failed at lag %g, trying a smaller lag.", h)
                last_error = exc
        if not targets:
            raise last_error

    basis = _vech_generator_basis(d)
    M = np.vstack([basis] * len(targets))
    g = np.concatenate([t.ravel() for t in targets])
    a, *_ = np.linalg.lstsq(M, g, rcond=None)
    A_hat = a.reshape(d, d, order="F")
    op = DriftOperator(A_hat)
    projection = float(np.linalg.norm(M @ a - g) / max(float(np.linalg.norm(g)), 1e-300))

    mean = empirical.mean.entries
    mean_L = SymMat(-(A_hat @ mean + mean @ A_hat.T))
    G = op.gen_small
    var_L = -(G @ V + V @ G.T)
    var_L = 0.5 * (var_L + var_L.T)
    stable = stability_margin(op).stable
    residuals = {"projection": projection, "var_clip": clipped}
    if stable:
        residuals.update(_reconstruction_errors(op, mean_L, var_L, empirical, lags))
    else:
        logger.warning("mom_fit: estimated drift is not stable.")
    return MoMEstimate(
        A_hat=op,
        mean_L=mean_L,
        var_vec_L=var_L,
        lags=lags,
        stable=stable,
        residuals=residuals,
        mean_L_psd=is_psd(mean_L, scale_aware=True),
        var_vec_L_psd=is_psd(var_L, tol=1e-8, scale_aware=True),
    )


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b)))


def _reconstruction_errors(
    op: DriftOperator, mean_L: SymMat, var_L: np.ndarray, empirical: MomentReport, lags: Sequence[float]
) -> Dict[str, float]:
    mean = -solve_drift_equation(op, mean_L, level="small")
    var = solve_drift_equation(op, -var_L, level="big")
    autocov_err = max(
        _relative(matrix_exponential(op.gen_small, h) @ var, empirical.autocov[h]) for h in lags
    )
    return {
        "mean_reconstruction": _relative(mean.entries, empirical.mean.entries),
        "var_reconstruction": _relative(var, empirical.var_vec),
        "autocov_reconstruction": autocov_err,
    }
