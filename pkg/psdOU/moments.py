"""
Stationary moments and characteristic function of psd OU processes, their
Monte Carlo counterparts, and positivity diagnostics.

With 𝐀X = AX + XA^T and G = A ⊗ I + I ⊗ A the stationary law satisfies

    E(Σ)          = -𝐀^{-1} E(L_1)
    var(vec Σ)    = V with GV + VG^T = -var(vec L_1)
    cov(vec Σ_{t+h}, vec Σ_t) = e^{Gh} V
    log E exp(i tr(ΣZ)) = ∫_0^∞ ψ_L(e^{A^T s} Z e^{As}) ds
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .driftop import SOLVE_COND_MAX, decay_horizon, require_stable, solve_drift_equation
from .errors import DimensionError, ParameterError, QuadratureError
from .simulation import OUPath, OUProcessSpec
from .subordinators import char_exponent, drift_matrix, driver_moments
from .symcore import SymMat, matrix_exponential, symmetric_eigenvalues

logger = logging.getLogger(__name__)

PD_TOL: float = 1e-10


@dataclass(eq=False)
class MomentReport:
    """
    Stationary mean, var(vec Σ) and autocovariances keyed by lag. provenance is
    "closed_form" or "monte_carlo"; Monte Carlo reports carry std_errors with
    the same keys ("mean", "var_vec", "autocov").
    """

    mean: SymMat
    var_vec: np.ndarray
    autocov: Dict[float, np.ndarray] = field(default_factory=dict)
    provenance: str = "closed_form"
    std_errors: Optional[Dict[str, object]] = None
    gamma_sigma: Optional[SymMat] = None
    n_samples: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.mean.dim

    def validate(self, tol: float = 1e-8) -> None:
        V = self.var_vec
        scale = 1.0 + float(np.max(np.abs(V))) if V.size else 1.0
        if not np.allclose(V, V.T, atol=tol * scale):
            raise ParameterError("var_vec is not symmetric.")
        eig = float(np.linalg.eigvalsh(0.5 * (V + V.T))[0])
        if eig < -tol * scale:
            raise ParameterError(f"var_vec has eigenvalue {eig:.3e}.")
        if 0.0 in self.autocov and not np.allclose(self.autocov[0.0], V, atol=tol * scale):
            raise ParameterError("autocov at lag 0 differs from var_vec.")


def stationary_moments(
    spec: OUProcessSpec, lags: Sequence[float] = (), cond_max: float = SOLVE_COND_MAX
) -> MomentReport:
    """
    Closed-form stationary moments. The mean uses the small drift equation,
    the variance the d^2-level Lyapunov equation; autocov always contains
    lag 0.
    """
    op = spec.drift
    require_stable(op)
    dm = driver_moments(spec.driver)
    mean = -solve_drift_equation(op, dm.mean, level="small", cond_max=cond_max)
    var = solve_drift_equation(op, -dm.var_vec, level="big", cond_max=cond_max)
    gamma_sigma = -solve_drift_equation(op, drift_matrix(spec.driver), level="small", cond_max=cond_max)
    autocov = {0.0: var}
    for h in sorted({float(h) for h in lags}):
        if h < 0:
            raise ParameterError(f"Lags must be non-negative, got {h}.")
        if h > 0:
            autocov[h] = matrix_exponential(op.gen_small, h) @ var
    report = MomentReport(mean=mean, var_vec=var, autocov=autocov, gamma_sigma=gamma_sigma)
    report.validate()
    return report


# ---------------------------------------------------------------------------
# Characteristic function
# ---------------------------------------------------------------------------


def _integrate_cumulant(fn, T: float, epsabs: float) -> complex:
    def pair(s):
        z = fn(s)
        return np.array([z.real, z.imag])

    value, err, info = integrate.quad_vec(pair, 0.0, T, epsabs=epsabs, epsrel=1e-10, limit=2000, full_output=True)
    if info.status != 0 or not np.all(np.isfinite(value)):
        raise QuadratureError("Stationary cumulant quadrature did not reach the requested tolerance", float(err))
    return complex(value[0], value[1])


def stationary_cumulant(spec: OUProcessSpec, Z: object, epsabs: Optional[float] = None) -> complex:
    """
    ∫_0^{T*} ψ_L(e^{A^T s} Z e^{As}) ds with ||e^{AT*}||^2 <= charfn_tol.
    """
    op = spec.drift
    require_stable(op)
    Zm = SymMat(Z).entries
    if Zm.shape[0] != spec.dim:
        raise DimensionError(f"Z is {Zm.shape[0]}x{Zm.shape[0]}, process has d={spec.dim}.")
    if not np.any(Zm):
        return 0j
    T = decay_horizon(op, spec.options.charfn_tol)
    tol = spec.options.quad_epsabs if epsabs is None else epsabs

    def integrand(s: float) -> complex:
        E = matrix_exponential(op.A, s)
        return char_exponent(spec.driver, E.T @ Zm @ E)

    return _integrate_cumulant(integrand, T, tol)


def stationary_charfn(spec: OUProcessSpec, Z: object, epsabs: Optional[float] = None) -> complex:
    return complex(np.exp(stationary_cumulant(spec, Z, epsabs)))


# ---------------------------------------------------------------------------
# Monte Carlo estimates
# ---------------------------------------------------------------------------


def _as_vec_rows(draws: np.ndarray) -> np.ndarray:
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 3 or draws.shape[1] != draws.shape[2]:
        raise DimensionError(f"Expected draws of shape (n, d, d), got {draws.shape}.")
    return np.transpose(draws, (0, 2, 1)).reshape(draws.shape[0], -1)


def _cross_moment(Yc: np.ndarray, Xc: np.ndarray):
    """Sample cross-covariance of centred rows and the standard error of each entry."""
    n = Xc.shape[0]
    cov = Yc.T @ Xc / (n - 1)
    second = (Yc ** 2).T @ (Xc ** 2) / n
    se = np.sqrt(np.clip(second - (Yc.T @ Xc / n) ** 2, 0.0, None) / n)
    return cov, se


def empirical_moments(
    draws: np.ndarray, lagged: Optional[Dict[float, np.ndarray]] = None
) -> MomentReport:
    """
    Sample mean, var(vec) and lagged cross-covariances of (n, d, d) draws,
    with standard errors s/sqrt(n) for the mean and the standard deviation
    of the centred products over sqrt(n) for covariance entries.
    """
    X = _as_vec_rows(draws)
    n, dd = X.shape
    if n < 2:
        raise ParameterError("empirical_moments needs at least two draws.")
    d = int(round(np.sqrt(dd)))
    mu = X.mean(axis=0)
    Xc = X - mu
    var, var_se = _cross_moment(Xc, Xc)
    autocov = {0.0: var}
    autocov_se = {0.0: var_se}
    for h, Y in sorted((lagged or {}).items()):
        Yv = _as_vec_rows(Y)
        if Yv.shape != X.shape:
            raise DimensionError(f"Lagged draws at {h} have shape {Yv.shape}, expected {X.shape}.")
        # both margins are stationary, so centre at the pooled mean
        pooled = 0.5 * (mu + Yv.mean(axis=0))
        autocov[float(h)], autocov_se[float(h)] = _cross_moment(Yv - pooled, X - pooled)
    mean = mu.reshape(d, d, order="F")
    se = {
        "mean": (X.std(axis=0, ddof=1) / np.sqrt(n)).reshape(d, d, order="F"),
        "var_vec": var_se,
        "autocov": autocov_se,
    }
    return MomentReport(
        mean=SymMat(mean), var_vec=0.5 * (var + var.T), autocov=autocov,
        provenance="monte_carlo", std_errors=se, n_samples=n,
    )


def path_moments(
    states: Union[np.ndarray, OUPath],
    step: float,
    lags: Sequence[float] = (),
    n_batches: int = 20,
) -> MomentReport:
    """
    Moments from one equally spaced path after burn-in. Standard errors are
    batch means: the path is cut into n_batches contiguous blocks and the
    spread of the block statistics is scaled by sqrt(n_batches).
    """
    arr = states.states if isinstance(states, OUPath) else np.asarray(states, dtype=float)
    X = _as_vec_rows(arr)
    n, dd = X.shape
    d = int(round(np.sqrt(dd)))
    lag_steps = {}
    for h in sorted({float(h) for h in lags}):
        k = int(round(h / step))
        if k < 1 or abs(k * step - h) > 1e-9 * (1.0 + h):
            raise ParameterError(f"Lag {h} is not a positive multiple of the step {step}.")
        lag_steps[h] = k
    k_max = max(lag_steps.values(), default=0)
    if n - k_max < 2 * n_batches:
        raise ParameterError("Path too short for the requested lags and batches.")

    def statistics(block: np.ndarray) -> Dict[str, np.ndarray]:
        mu = block.mean(axis=0)
        c = block - mu
        m = block.shape[0]
        out = {"mean": mu, 0.0: c.T @ c / (m - 1)}
        for h, k in lag_steps.items():
            out[h] = c[k:].T @ c[:-k] / (m - k - 1)
        return out

    full = statistics(X)
    edges = np.linspace(0, n, n_batches + 1).astype(int)
    batches = [statistics(X[a:b]) for a, b in zip(edges[:-1], edges[1:])]

    def batch_se(key) -> np.ndarray:
        stack = np.array([b[key] for b in batches])
        return stack.std(axis=0, ddof=1) / np.sqrt(n_batches)

    var = 0.5 * (full[0.0] + full[0.0].T)
    autocov = {0.0: var}
    autocov.update({h: full[h] for h in lag_steps})
    se = {
        "mean": batch_se("mean").reshape(d, d, order="F"),
        "var_vec": batch_se(0.0),
        "autocov": {key: batch_se(key) for key in [0.0] + list(lag_steps)},
    }
    return MomentReport(
        mean=SymMat(full["mean"].reshape(d, d, order="F")), var_vec=var, autocov=autocov,
        provenance="monte_carlo", std_errors=se, n_samples=n,
    )


@dataclass(frozen=True)
class CharfnEstimate:
    value: complex
    std_error: float
    n: int


def empirical_charfn(draws: np.ndarray, Z: object) -> CharfnEstimate:
    """Sample mean of exp(i tr(ΣZ)) and its standard error."""
    arr = np.asarray(draws, dtype=float)
    Zm = SymMat(Z).entries
    phase = np.exp(1j * np.einsum("nij,ji->n", arr, Zm))
    n = phase.size
    se = float(np.sqrt(np.var(phase.real, ddof=1) + np.var(phase.imag, ddof=1)) / np.sqrt(n))
    return CharfnEstimate(value=complex(phase.mean()), std_error=se, n=n)


# ---------------------------------------------------------------------------
# Positivity diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsdDiagnostics:
    n: int
    min_eigenvalue: float
    fraction_positive_definite: float
    rank_histogram: Dict[int, int]

    def to_dict(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "min_eigenvalue": self.min_eigenvalue,
            "fraction_positive_definite": self.fraction_positive_definite,
            "rank_histogram": {str(k): v for k, v in sorted(self.rank_histogram.items())},
        }


def psd_diagnostics(path_or_samples: Union[OUPath, np.ndarray], pd_tol: float = PD_TOL) -> PsdDiagnostics:
    """
    Smallest eigenvalue over all states, the fraction with smallest
    eigenvalue above pd_tol, and a histogram of numerical ranks.
    """
    arr = path_or_samples.states if isinstance(path_or_samples, OUPath) else np.asarray(path_or_samples, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[0] == 0:
        raise ParameterError("psd_diagnostics needs at least one state.")
    eigs = np.array([symmetric_eigenvalues(s) for s in arr])
    scale = 1.0 + np.max(np.abs(eigs), axis=1, keepdims=True)
    ranks = np.sum(eigs > pd_tol * scale, axis=1)
    values, counts = np.unique(ranks, return_counts=True)
    return PsdDiagnostics(
        n=int(arr.shape[0]),
        min_eigenvalue=float(eigs[:, 0].min()),
        fraction_positive_definite=float(np.mean(eigs[:, 0] > pd_tol)),
        rank_histogram={int(v): int(c) for v, c in zip(values, counts)},
    )
