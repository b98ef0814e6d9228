"""
Matrix subordinators used as background driving processes.

Four driver families are supported:

- DriftOnly: deterministic L_t = γ t.
- DiagonalCP: diagonal compound Poisson subordinators built from a completely
  positive factorisation C = BB^T (the multivariate construction with
  prescribed mean and covariance of the diagonal).
- GaussMixtureCP: compound Poisson processes whose jumps are xx^T with
  x = (εC)^{1/2} N, i.e. quadratic variations of Gaussian-mixture compound
  Poisson processes.
- TypeGbar: quadratic variation of a normal variance mixture Lévy process
  X_t = C^{1/2} W(T_t) with subordinator T (NIG when T is inverse Gaussian).

Models are immutable; all randomness comes from a caller-owned
numpy Generator.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DimensionError,
    NotDoublyNonnegativeError,
    NumericalError,
    ParameterError,
    QuadratureError,
    UnsupportedModelError,
)
from .mixing import (
    ConstantMixing,
    GammaMixing,
    GIGMixing,
    MixingLaw,
    MixingMoments,
    mixing_from_dict,
    mixing_to_dict,
)
from .symcore import (
    PSD_TOL,
    PsdMat,
    SymMat,
    commutation_matrix,
    is_psd,
    psd_check,
    sqrtm_psd,
    symmetric_eigenvalues,
    vec,
)
from .utils import as_square, make_rng

logger = logging.getLogger(__name__)

INCREMENT_PSD_TOL: float = 1e-10
DEFAULT_N_SUB: int = 16
CP_RESTARTS: int = 50


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


def _sym(x: object, name: str) -> SymMat:
    if isinstance(x, SymMat):
        return SymMat(x.entries)
    return SymMat(as_square(x, name))


@dataclass(frozen=True, eq=False)
class DriftOnly:
    """
    L_t = γ t. A drift that is not PSD is allowed and flagged
    non_subordinator (the resulting process is then not a matrix
    subordinator, yet can still produce PSD OU processes).
    """

    gamma: SymMat

    kind = "drift_only"

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", _sym(self.gamma, "DriftOnly.gamma"))

    @property
    def dim(self) -> int:
        return self.gamma.dim

    @property
    def non_subordinator(self) -> bool:
        return not is_psd(self.gamma, scale_aware=True)

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "gamma": self.gamma.to_list()}


@dataclass(frozen=True, eq=False)
class DiagonalCP:
    """
    Diagonal matrix subordinator L_t = diag(B L~_t + gamma t), where the k
    components of L~ are independent compound Poisson processes with
    intensity `rate` and exponential jumps of rate `jump_rate_param`.
    """

    B: np.ndarray
    rate: float
    jump_rate_param: float
    gamma: np.ndarray

    kind = "diagonal_cp"

    def __post_init__(self) -> None:
        B = np.array(self.B, dtype=float)
        if B.ndim != 2:
            raise DimensionError(f"DiagonalCP.B must be a d x k matrix, got shape {B.shape}.")
        gamma = np.array(self.gamma, dtype=float).ravel()
        if gamma.size != B.shape[0]:
            raise DimensionError(f"DiagonalCP.gamma has length {gamma.size}, expected {B.shape[0]}.")
        if np.any(B < 0) or not np.all(np.isfinite(B)):
            raise ParameterError("DiagonalCP.B must be finite and entrywise nonnegative.")
        if np.any(gamma < 0):
            raise ParameterError("DiagonalCP.gamma must be nonnegative.")
        if not (self.rate > 0 and self.jump_rate_param > 0):
            raise ParameterError("DiagonalCP needs rate > 0 and jump_rate_param > 0.")
        B.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "jump_rate_param", float(self.jump_rate_param))

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    @property
    def n_components(self) -> int:
        return self.B.shape[1]

    @property
    def non_subordinator(self) -> bool:
        return False

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "B": self.B.tolist(),
            "rate": self.rate,
            "jump_rate_param": self.jump_rate_param,
            "gamma": self.gamma.tolist(),
        }


@dataclass(frozen=True, eq=False)
class GaussMixtureCP:
    """
    Compound Poisson driver with intensity `rate` and jumps xx^T,
    x = (εC)^{1/2} N, plus an optional drift.
    """

    rate: float
    C: PsdMat
    mixing: MixingLaw
    drift: Optional[SymMat] = None

    kind = "gauss_mixture_cp"

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ParameterError(f"GaussMixtureCP needs rate > 0, got {self.rate}.")
        C = self.C if isinstance(self.C, PsdMat) else psd_check(as_square(self.C, "GaussMixtureCP.C"))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "rate", float(self.rate))
        drift = SymMat.zeros(C.dim) if self.drift is None else _sym(self.drift, "GaussMixtureCP.drift")
        if drift.dim != C.dim:
            raise DimensionError("GaussMixtureCP drift and C differ in dimension.")
        object.__setattr__(self, "drift", drift)

    @property
    def dim(self) -> int:
        return self.C.dim

    @property
    def non_subordinator(self) -> bool:
        return not is_psd(self.drift, scale_aware=True)

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {
            "kind": self.kind,
            "rate": self.rate,
            "C": self.C.to_list(),
            "mixing": mixing_to_dict(self.mixing),
        }
        if np.any(self.drift.entries != 0):
            out["drift"] = self.drift.to_list()
        return out


@dataclass(frozen=True, eq=False)
class TypeGbar:
    """
    Quadratic variation of X_t = C^{1/2} W(T_t), where T is the subordinator
    whose time-one law is `mixing`. Increments are simulated as the discrete
    quadratic variation of exact X increments on n_sub substeps.
    With constant mixing the time change is deterministic, X is a scaled
    Brownian motion and the driver is its full quadratic variation
    value * C * t, a pure drift; the jump part alone would be zero.
    """

    C: PsdMat
    mixing: MixingLaw
    n_sub: int = DEFAULT_N_SUB

    kind = "type_gbar"

    def __post_init__(self) -> None:
        C = self.C if isinstance(self.C, PsdMat) else psd_check(as_square(self.C, "TypeGbar.C"))
        object.__setattr__(self, "C", C)
        if int(self.n_sub) < 1:
            raise ParameterError("TypeGbar.n_sub must be at least 1.")
        object.__setattr__(self, "n_sub", int(self.n_sub))

    @property
    def dim(self) -> int:
        return self.C.dim

    @property
    def non_subordinator(self) -> bool:
        return False

    @property
    def can_simulate(self) -> bool:
        m = self.mixing
        return isinstance(m, (ConstantMixing, GammaMixing)) or (isinstance(m, GIGMixing) and m.is_inverse_gaussian)

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "C": self.C.to_list(), "mixing": mixing_to_dict(self.mixing), "n_sub": self.n_sub}


SubordinatorModel = Union[DriftOnly, DiagonalCP, GaussMixtureCP, TypeGbar]

MODEL_KINDS = {cls.kind: cls for cls in (DriftOnly, DiagonalCP, GaussMixtureCP, TypeGbar)}


def model_from_dict(data: Dict[str, object]) -> SubordinatorModel:
    """
    Builds a driver from its tagged JSON object.
    """
    if not isinstance(data, dict):
        raise ParameterError("A driver must be a JSON object.")
    kind = data.get("kind")
    allowed = {
        "drift_only": ({"gamma"}, set()),
        "diagonal_cp": ({"B", "rate", "jump_rate_param", "gamma"}, set()),
        "gauss_mixture_cp": ({"rate", "C", "mixing"}, {"drift"}),
        "type_gbar": ({"C", "mixing"}, {"n_sub"}),
    }
    if kind not in allowed:
        raise ParameterError(f"Unknown driver kind {kind!r}; expected one of {sorted(allowed)}.")
    required, optional = allowed[kind]
    keys = set(data) - {"kind"}
    if not required <= keys or keys - required - optional:
        raise ParameterError(
            f"Driver {kind!r} needs keys {sorted(required)} (optional {sorted(optional)}), got {sorted(keys)}."
        )
    if kind == "drift_only":
        return DriftOnly(SymMat(data["gamma"]))
    if kind == "diagonal_cp":
        return DiagonalCP(
            B=np.asarray(data["B"], dtype=float),
            rate=float(data["rate"]),
            jump_rate_param=float(data["jump_rate_param"]),
            gamma=np.asarray(data["gamma"], dtype=float),
        )
    mixing = mixing_from_dict(data["mixing"])
    if kind == "gauss_mixture_cp":
        drift = SymMat(data["drift"]) if "drift" in data else None
        return GaussMixtureCP(rate=float(data["rate"]), C=psd_check(data["C"]), mixing=mixing, drift=drift)
    return TypeGbar(C=psd_check(data["C"]), mixing=mixing, n_sub=int(data.get("n_sub", DEFAULT_N_SUB)))


def model_to_dict(model: SubordinatorModel) -> Dict[str, object]:
    return model.to_dict()


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JumpRecord:
    time: float
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class Increment:
    """
    L_{t+dt} - L_t together with the jumps that made it up (jump times are
    relative to the start of the interval).
    """

    value: SymMat
    jumps: List[JumpRecord] = field(default_factory=list)


def _check_dt(dt: float) -> float:
    if not (np.isfinite(dt) and dt > 0):
        raise ParameterError(f"Time step must be positive and finite, got {dt}.")
    return float(dt)


def _gaussian_outer(C_half: np.ndarray, eps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Stack of x x^T with x = sqrt(eps) C^{1/2} N."""
    z = rng.standard_normal((eps.size, C_half.shape[0]))
    x = np.sqrt(eps)[:, None] * (z @ C_half)
    return np.einsum("ni,nj->nij", x, x)


def is_compound_poisson(model: SubordinatorModel) -> bool:
    """True when the driver has finitely many jumps on bounded intervals."""
    if isinstance(model, TypeGbar):
        return isinstance(model.mixing, ConstantMixing)
    return True


def sample_jumps(model: SubordinatorModel, t0: float, t1: float, rng: np.random.Generator) -> List[JumpRecord]:
    """
    Jump times (sorted, in [t0, t1)) and jump matrices of a compound Poisson
    driver on an interval. DriftOnly has no jumps; TypeGbar has infinitely
    many and is rejected.
    """
    length = _check_dt(t1 - t0)
    d = model.dim
    if isinstance(model, DriftOnly) or (isinstance(model, TypeGbar) and is_compound_poisson(model)):
        return []
    if isinstance(model, GaussMixtureCP):
        count = int(rng.poisson(model.rate * length))
        times = np.sort(rng.uniform(t0, t1, size=count))
        eps = np.asarray(model.mixing.sample(rng, count), dtype=float).reshape(count)
        mats = _gaussian_outer(sqrtm_psd(model.C), eps, rng)
        return [JumpRecord(float(t), m) for t, m in zip(times, mats)]
    if isinstance(model, DiagonalCP):
        k = model.n_components
        count = int(rng.poisson(k * model.rate * length))
        times = np.sort(rng.uniform(t0, t1, size=count))
        comps = rng.integers(0, k, size=count)
        sizes = rng.exponential(1.0 / model.jump_rate_param, size=count)
        records = []
        for t, j, e in zip(times, comps, sizes):
            mat = np.zeros((d, d))
            mat[np.diag_indices(d)] = model.B[:, j] * e
            records.append(JumpRecord(float(t), mat))
        return records
    raise UnsupportedModelError(f"{model.kind} drivers have no finite jump list; use sample_increment.")


def sample_jump_batch(
    model: SubordinatorModel, lengths: np.ndarray, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Jumps of a compound Poisson driver on many independent intervals at once.

    Returns (owner, age, matrices): the interval index of each jump, its
    distance to the end of that interval, and the (m, d, d) jump matrices.
    """
    lengths = np.asarray(lengths, dtype=float).ravel()
    d = model.dim
    if isinstance(model, DriftOnly) or (isinstance(model, TypeGbar) and is_compound_poisson(model)):
        return np.zeros(0, dtype=int), np.zeros(0), np.zeros((0, d, d))
    if isinstance(model, GaussMixtureCP):
        counts = rng.poisson(model.rate * lengths)
        owner = np.repeat(np.arange(lengths.size), counts)
        age = rng.uniform(0.0, 1.0, size=owner.size) * lengths[owner]
        eps = np.asarray(model.mixing.sample(rng, owner.size), dtype=float).reshape(owner.size)
        return owner, age, _gaussian_outer(sqrtm_psd(model.C), eps, rng)
    if isinstance(model, DiagonalCP):
        k = model.n_components
        counts = rng.poisson(k * model.rate * lengths)
        owner = np.repeat(np.arange(lengths.size), counts)
        age = rng.uniform(0.0, 1.0, size=owner.size) * lengths[owner]
        comps = rng.integers(0, k, size=owner.size)
        sizes = rng.exponential(1.0 / model.jump_rate_param, size=owner.size)
        mats = np.zeros((owner.size, d, d))
        idx = np.arange(d)
        mats[:, idx, idx] = model.B.T[comps] * sizes[:, None]
        return owner, age, mats
    raise UnsupportedModelError(f"{model.kind} drivers have no finite jump list.")


def drift_matrix(model: SubordinatorModel) -> np.ndarray:
    """The deterministic drift γ_L as a d x d array."""
    if isinstance(model, DriftOnly):
        return model.gamma.entries.copy()
    if isinstance(model, DiagonalCP):
        return np.diag(model.gamma)
    if isinstance(model, GaussMixtureCP):
        return model.drift.entries.copy()
    if isinstance(model, TypeGbar):
        if isinstance(model.mixing, ConstantMixing):
            return model.mixing.value * model.C.entries
        return np.zeros((model.dim, model.dim))
    raise UnsupportedModelError(f"Unknown driver {model!r}.")


def _finish(model: SubordinatorModel, value: np.ndarray) -> SymMat:
    if model.non_subordinator:
        return SymMat(value)
    return psd_check(value, tol=INCREMENT_PSD_TOL, scale_aware=True)


def sample_increment(model: SubordinatorModel, dt: float, rng: np.random.Generator) -> Increment:
    """
    One increment L_{t+dt} - L_t with its jump record.

    For TypeGbar the increment is the discrete quadratic variation of the
    exact X increments on model.n_sub equal substeps; the records are the
    substep outer products stamped with the substep end times.
    """
    dt = _check_dt(dt)
    if isinstance(model, TypeGbar):
        return _type_gbar_increment(model, dt, rng)
    jumps = sample_jumps(model, 0.0, dt, rng)
    value = drift_matrix(model) * dt
    for jump in jumps:
        value = value + jump.matrix
    return Increment(_finish(model, value), jumps)


def _type_gbar_increment(model: TypeGbar, dt: float, rng: np.random.Generator) -> Increment:
    if isinstance(model.mixing, ConstantMixing):
        return Increment(_finish(model, drift_matrix(model) * dt), [])
    if not model.can_simulate:
        raise UnsupportedModelError(
            f"TypeGbar simulation needs inverse Gaussian or gamma mixing, got {model.mixing!r}."
        )
    h = dt / model.n_sub
    tau = np.asarray(model.mixing.sample(rng, model.n_sub, time_scale=h), dtype=float)
    outers = _gaussian_outer(sqrtm_psd(model.C), tau, rng)
    records = [JumpRecord(float((s + 1) * h), m) for s, m in enumerate(outers)]
    return Increment(_finish(model, outers.sum(axis=0)), records)


def sample_increments(model: SubordinatorModel, dt: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    n independent increments over dt as an (n, d, d) array, without jump
    records.
    """
    dt = _check_dt(dt)
    if n < 0:
        raise ParameterError("n must be non-negative.")
    d = model.dim
    out = np.broadcast_to(drift_matrix(model) * dt, (n, d, d)).copy()
    if isinstance(model, DiagonalCP):
        counts = rng.poisson(model.rate * dt, size=(n, model.n_components))
        sums = rng.gamma(shape=counts, scale=1.0 / model.jump_rate_param)
        idx = np.arange(d)
        out[:, idx, idx] += sums @ model.B.T
    elif isinstance(model, GaussMixtureCP):
        counts = rng.poisson(model.rate * dt, size=n)
        total = int(counts.sum())
        eps = np.asarray(model.mixing.sample(rng, total), dtype=float).reshape(total)
        outers = _gaussian_outer(sqrtm_psd(model.C), eps, rng)
        np.add.at(out, np.repeat(np.arange(n), counts), outers)
    elif isinstance(model, TypeGbar) and not isinstance(model.mixing, ConstantMixing):
        if not model.can_simulate:
            raise UnsupportedModelError(
                f"TypeGbar simulation needs inverse Gaussian or gamma mixing, got {model.mixing!r}."
            )
        h = dt / model.n_sub
        tau = np.asarray(model.mixing.sample(rng, (n, model.n_sub), time_scale=h), dtype=float)
        z = rng.standard_normal((n, model.n_sub, d))
        x = np.sqrt(tau)[..., None] * (z @ sqrtm_psd(model.C))
        out += np.einsum("nsi,nsj->nij", x, x)
    return out


def discrete_qv(increments: Sequence[object], dim: Optional[int] = None) -> PsdMat:
    """
    Sum of outer products of the given R^d increments.
    """
    vectors = [np.asarray(x, dtype=float).ravel() for x in increments]
    if not vectors:
        if dim is None:
            raise DimensionError("discrete_qv of an empty sequence needs dim.")
        return PsdMat(np.zeros((dim, dim)))
    X = np.vstack(vectors)
    if dim is not None and X.shape[1] != dim:
        raise DimensionError(f"Increments have length {X.shape[1]}, expected {dim}.")
    return psd_check(X.T @ X, scale_aware=True)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DriverMoments:
    """E(L_1) (d x d) and var(vec L_1) (d^2 x d^2)."""

    mean: np.ndarray
    var_vec: np.ndarray


def quadratic_kernel(C: object) -> np.ndarray:
    """C⊗C + K_d(C⊗C) + vec(C)vec(C)^T, i.e. E[vec(yy^T) vec(yy^T)^T] for y ~ N(0, C)."""
    Cm = as_square(C, "C")
    d = Cm.shape[0]
    CC = np.kron(Cm, Cm)
    v = vec(Cm)
    return CC + commutation_matrix(d) @ CC + np.outer(v, v)


def mixture_qv_moments(
    kind: str, mix: MixingMoments, C: object, r: Optional[float] = None
) -> DriverMoments:
    """
    Mean and var(vec) of the quadratic-variation drivers at time one.

    cp:        mean = r E(ε) C,  var = r E(ε²) kernel(C)
    typeGbar:  mean = E(ε) C,    var = var(ε) kernel(C)
    """
    Cm = as_square(C, "C")
    kernel = quadratic_kernel(Cm)
    if kind == "cp":
        if r is None or not r > 0:
            raise ParameterError("mixture_qv_moments(kind='cp') needs r > 0.")
        mean = r * mix.mean_eps * Cm
        var = r * mix.second_moment_eps * kernel
    elif kind == "typeGbar":
        mean = mix.mean_eps * Cm
        var = mix.var_eps * kernel
    else:
        raise ParameterError(f"Unknown mixture kind {kind!r}; expected 'cp' or 'typeGbar'.")
    return DriverMoments(mean=mean, var_vec=0.5 * (var + var.T))


def diagonal_covariance(model: DiagonalCP) -> np.ndarray:
    """Covariance of diag(L_1): (2 rate / λ²) B B^T."""
    if not isinstance(model, DiagonalCP):
        raise UnsupportedModelError("diagonal_covariance is defined for DiagonalCP drivers only.")
    return 2.0 * model.rate / model.jump_rate_param ** 2 * (model.B @ model.B.T)


def driver_moments(model: SubordinatorModel) -> DriverMoments:
    d = model.dim
    drift = drift_matrix(model)
    if isinstance(model, DriftOnly):
        return DriverMoments(mean=drift, var_vec=np.zeros((d * d, d * d)))
    if isinstance(model, DiagonalCP):
        mean = np.diag(model.gamma + model.rate / model.jump_rate_param * model.B.sum(axis=1))
        var = np.zeros((d * d, d * d))
        diag_pos = np.arange(d) * (d + 1)
        var[np.ix_(diag_pos, diag_pos)] = diagonal_covariance(model)
        return DriverMoments(mean=mean, var_vec=var)
    if isinstance(model, GaussMixtureCP):
        m = mixture_qv_moments("cp", model.mixing.moments(), model.C.entries, r=model.rate)
        return DriverMoments(mean=m.mean + drift, var_vec=m.var_vec)
    if isinstance(model, TypeGbar):
        return mixture_qv_moments("typeGbar", model.mixing.moments(), model.C.entries)
    raise UnsupportedModelError(f"Unknown driver {model!r}.")


@dataclass(frozen=True, eq=False)
class IdentifiedMixture:
    C: np.ndarray
    mean_eps: float
    var_eps: float
    residual: float


def identify_mixture(mean: object, var_vec: object, normalization: str = "mean_eps") -> IdentifiedMixture:
    """
    Recovers (C, E(ε), var(ε)) of a type-G̅ quadratic-variation driver from
    E(L_1) = E(ε)C and var(vec L_1) = var(ε) kernel(C). Only E(ε)C is
    identified, so the scale is fixed by `normalization`: "mean_eps"
    (E(ε) = 1) or "det_C" (det C = 1).
    """
    M = as_square(mean, "mean")
    V = np.asarray(var_vec, dtype=float)
    d = M.shape[0]
    if V.shape != (d * d, d * d):
        raise DimensionError(f"var_vec must be {d * d}x{d * d}, got {V.shape}.")
    if normalization == "mean_eps":
        mean_eps = 1.0
    elif normalization == "det_C":
        det = float(np.linalg.det(M))
        if not det > 0:
            raise ParameterError("det_C normalisation needs a positive definite mean.")
        mean_eps = det ** (1.0 / d)
    else:
        raise ParameterError(f"Unknown normalization {normalization!r}; expected 'mean_eps' or 'det_C'.")
    C = M / mean_eps
    kernel = quadratic_kernel(C)
    var_eps = float(np.sum(V * kernel) / np.sum(kernel * kernel))
    residual = float(np.linalg.norm(V - var_eps * kernel) / (1.0 + np.linalg.norm(V)))
    return IdentifiedMixture(C=C, mean_eps=mean_eps, var_eps=var_eps, residual=residual)


# ---------------------------------------------------------------------------
# Characteristic exponent
# ---------------------------------------------------------------------------


def _quadratic_form_cf(lams: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """E exp(i s N^T diag(lams) N) = prod_k (1 - 2 i s lam_k)^{-1/2}, vectorised in s."""
    s = np.asarray(scale, dtype=float)[..., None]
    return np.prod((1.0 - 2j * s * lams) ** -0.5, axis=-1)


def _whitened_eigs(C: PsdMat, Z: np.ndarray) -> np.ndarray:
    half = sqrtm_psd(C)
    return symmetric_eigenvalues(half @ Z @ half)


def _levy_weight(mixing: MixingLaw, u: np.ndarray) -> np.ndarray:
    """2 u^3 ν_T(u²), the subordinator Lévy density after τ = u²."""
    if isinstance(mixing, GIGMixing) and mixing.is_inverse_gaussian:
        return 2.0 * mixing.delta / np.sqrt(2.0 * np.pi) * np.exp(-0.5 * mixing.alpha ** 2 * u * u)
    if isinstance(mixing, GammaMixing):
        return 2.0 * mixing.shape * u * np.exp(-mixing.rate * u * u)
    raise UnsupportedModelError(f"No Lévy density for {mixing!r}.")


def _integrate_complex(fn, a: float, b: float, epsabs: float) -> complex:
    def pair(x):
        z = fn(x)
        return np.array([z.real, z.imag])

    value, err, info = integrate.quad_vec(pair, a, b, epsabs=epsabs, epsrel=1e-10, limit=500, full_output=True)
    if info.status != 0 or not np.all(np.isfinite(value)):
        raise QuadratureError("Characteristic exponent quadrature did not converge", float(err))
    return complex(value[0], value[1])


def char_exponent(
    model: SubordinatorModel,
    Z: object,
    epsabs: float = 1e-10,
    rng: Optional[np.random.Generator] = None,
) -> complex:
    """
    ψ_L(Z) with E exp(i tr(L_t Z)) = exp(t ψ_L(Z)).

    Closed forms cover DriftOnly, DiagonalCP and GaussMixtureCP (the jump
    expectation of a Gaussian quadratic form is integrated over ε), and
    TypeGbar with constant, gamma or inverse Gaussian mixing (integrated
    against the subordinator Lévy density). Other models raise
    UnsupportedModelError unless `rng` is given, in which case the Monte
    Carlo estimate of char_exponent_mc is returned.
    """
    Zm = _sym(Z, "Z").entries
    if Zm.shape[0] != model.dim:
        raise DimensionError(f"Z is {Zm.shape[0]}x{Zm.shape[0]}, driver has d={model.dim}.")
    if not np.any(Zm):
        return 0j
    drift_term = 1j * float(np.trace(drift_matrix(model) @ Zm))
    if isinstance(model, DriftOnly):
        return drift_term
    if isinstance(model, DiagonalCP):
        lam = model.jump_rate_param
        bz = model.B.T @ np.diag(Zm)
        return drift_term + model.rate * complex(np.sum(lam / (lam - 1j * bz) - 1.0))
    lams = _whitened_eigs(model.C, Zm)
    try:
        if isinstance(model, GaussMixtureCP):
            if isinstance(model.mixing, ConstantMixing):
                expect = complex(_quadratic_form_cf(lams, model.mixing.value))
            else:
                pdf = model.mixing.pdf
                expect = _integrate_complex(
                    lambda x: _quadratic_form_cf(lams, x) * pdf(x), 0.0, np.inf, epsabs
                )
            return drift_term + model.rate * (expect - 1.0)
        if isinstance(model, TypeGbar):
            if isinstance(model.mixing, ConstantMixing):
                return drift_term
            trace_term = 1j * float(np.sum(lams))

            def integrand(u):
                tau = u * u
                if tau < 1e-12:
                    ratio = trace_term
                else:
                    ratio = (complex(_quadratic_form_cf(lams, tau)) - 1.0) / tau
                return ratio * _levy_weight(model.mixing, u)

            return _integrate_complex(integrand, 0.0, np.inf, epsabs)
    except UnsupportedModelError:
        if rng is None:
            raise
    if rng is None:
        raise UnsupportedModelError(f"No closed-form characteristic exponent for {model!r}.")
    logger.warning("Falling back to a Monte Carlo characteristic exponent for %r.", model)
    return char_exponent_mc(model, Zm, rng).value


@dataclass(frozen=True)
class CharExponentEstimate:
    value: complex
    std_error: float
    n: int
    dt: float
    method: str = "monte_carlo"


def char_exponent_mc(
    model: SubordinatorModel,
    Z: object,
    rng: Optional[np.random.Generator] = None,
    n: int = 200_000,
    dt: float = 0.05,
) -> CharExponentEstimate:
    """
    Monte Carlo ψ_L(Z) ≈ Log(φ̂_dt(Z)) / dt from n increments over dt, with a
    delta-method standard error. dt must be small enough that dt ψ_L stays
    on the principal branch.
    """
    rng = rng if rng is not None else make_rng()
    Zm = _sym(Z, "Z").entries
    incs = sample_increments(model, dt, n, rng)
    phase = np.exp(1j * np.einsum("nij,ji->n", incs, Zm))
    phi = phase.mean()
    if abs(phi) < 1e-3:
        raise NumericalError("Empirical characteristic function is too close to zero; reduce dt.")
    se_phi = float(np.sqrt(np.var(phase.real) + np.var(phase.imag)) / np.sqrt(n))
    return CharExponentEstimate(
        value=complex(np.log(phi) / dt), std_error=se_phi / (abs(phi) * dt), n=n, dt=dt
    )


# ---------------------------------------------------------------------------
# Completely positive factorisation and the multivariate construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CPFactorization:
    """
    Outcome of cp_factorize. status is "found" or "not_found"; "not_found"
    says nothing about complete positivity of C.
    """

    status: str
    B: Optional[np.ndarray]
    residual: float
    k: int
    attempts: int

    @property
    def found(self) -> bool:
        return self.status == "found"


def _check_doubly_nonnegative(C: np.ndarray, tol: float) -> None:
    scale = 1.0 + float(np.max(np.abs(C)))
    if np.min(C) < -tol * scale:
        raise NotDoublyNonnegativeError(f"Matrix has a negative entry {np.min(C):.6g}; it is not doubly nonnegative.")
    eig = symmetric_eigenvalues(C)[0]
    if eig < -PSD_TOL * scale:
        raise NotDoublyNonnegativeError(f"Matrix has eigenvalue {eig:.6g}; it is not doubly nonnegative.")


def _diagonal_dominance_factor(C: np.ndarray) -> Optional[np.ndarray]:
    """One column per positive off-diagonal pair plus a diagonal remainder; valid when C is diagonally dominant."""
    d = C.shape[0]
    cols = []
    for i in range(d):
        for j in range(i + 1, d):
            if C[i, j] > 0:
                col = np.zeros(d)
                col[i] = col[j] = np.sqrt(C[i, j])
                cols.append(col)
    for i in range(d):
        rest = C[i, i] - (np.sum(np.clip(C[i], 0, None)) - max(C[i, i], 0.0))
        if rest < 0:
            return None
        col = np.zeros(d)
        col[i] = np.sqrt(rest)
        cols.append(col)
    return np.column_stack(cols)


def _cp_residual(B: np.ndarray, C: np.ndarray) -> float:
    return float(np.linalg.norm(B @ B.T - C))


def _drop_zero_columns(B: np.ndarray) -> np.ndarray:
    keep = np.any(B > 0, axis=0)
    return B[:, keep] if np.any(keep) else B[:, :1]


def cp_factorize(
    C: object,
    k: Optional[int] = None,
    tol: float = 1e-8,
    restarts: int = CP_RESTARTS,
    rng: Optional[np.random.Generator] = None,
) -> CPFactorization:
    """
    Searches for a nonnegative B (d x k) with BB^T = C.

    Cheap constructions are tried first (the PSD square root when it is
    entrywise nonnegative, then the diagonal-dominance factor); otherwise a
    bound-constrained least-squares fit is run from up to `restarts` random
    starting points. All-zero columns are dropped from the returned factor.
    """
    Cm = _sym(C, "C").entries
    d = Cm.shape[0]
    _check_doubly_nonnegative(Cm, tol)
    k = d * (d + 1) // 2 if k is None else int(k)
    if k < 1:
        raise ParameterError("cp_factorize needs k >= 1.")
    threshold = tol * (1.0 + float(np.linalg.norm(Cm)))
    if not np.any(Cm):
        return CPFactorization("found", np.zeros((d, 1)), 0.0, 1, 0)

    attempts = 0
    candidates = []
    root = sqrtm_psd(Cm)
    if np.min(root) >= -1e-12:
        candidates.append(np.clip(root, 0.0, None))
    dominance = _diagonal_dominance_factor(Cm)
    if dominance is not None:
        candidates.append(dominance)
    for cand in candidates:
        attempts += 1
        cand = _drop_zero_columns(cand)
        if cand.shape[1] <= k:
            res = _cp_residual(cand, Cm)
            if res <= threshold:
                logger.debug("cp_factorize: closed-form candidate accepted (residual %.3e).", res)
                return CPFactorization("found", cand, res, cand.shape[1], attempts)

    rng = rng if rng is not None else make_rng(0)
    rows, cols = np.triu_indices(d)
    target = Cm[rows, cols]

    def residuals(b):
        B = b.reshape(d, k)
        return (B @ B.T)[rows, cols] - target

    def jacobian(b):
        B = b.reshape(d, k)
        J = np.zeros((rows.size, d, k))
        for m, (p, q) in enumerate(zip(rows, cols)):
            J[m, p, :] += B[q]
            J[m, q, :] += B[p]
        return J.reshape(rows.size, d * k)

    scale = np.sqrt(max(float(np.mean(np.diag(Cm))), 1e-300) / k)
    best = (np.inf, None)
    for _ in range(restarts):
        attempts += 1
        x0 = rng.uniform(0.0, 2.0 * scale, size=d * k)
        fit = optimize.least_squares(
            residuals, x0, jac=jacobian, bounds=(0.0, np.inf), method="trf",
            ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=2000,
        )
        B = np.clip(fit.x.reshape(d, k), 0.0, None)
        res = _cp_residual(B, Cm)
        if res < best[0]:
            best = (res, B)
        if res <= threshold:
            B = _drop_zero_columns(B)
            return CPFactorization("found", B, res, B.shape[1], attempts)
    logger.info("cp_factorize: no factor within tolerance after %d attempts (best residual %.3e).", attempts, best[0])
    return CPFactorization("not_found", best[1], float(best[0]), k, attempts)


def build_multivariate_subordinator(
    mu: Sequence[float],
    C: Optional[object] = None,
    B: Optional[object] = None,
    k: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> SubordinatorModel:
    """
    Diagonal matrix subordinator with E(L_1) = diag(mu) and covariance C of
    the diagonal vector, where C = BB^T with B >= 0.

    With λ = min_i mu_i / (Be)_i the k driving compound Poisson components
    have intensity λ²/2 and Exp(λ) jumps, so each has mean λ/2 and variance
    one; the remaining mean goes into the drift mu - λ Be / 2, which is
    strictly positive.
    """
    mu_arr = np.asarray(mu, dtype=float).ravel()
    if np.any(~np.isfinite(mu_arr)) or np.any(mu_arr <= 0):
        raise ParameterError("All entries of mu must be strictly positive.")
    d = mu_arr.size
    if B is None:
        if C is None:
            raise ParameterError("build_multivariate_subordinator needs C or B.")
        Cm = _sym(C, "C").entries
        if Cm.shape[0] != d:
            raise DimensionError(f"C is {Cm.shape[0]}x{Cm.shape[0]}, mu has length {d}.")
        if not np.any(Cm):
            return DriftOnly(SymMat(np.diag(mu_arr)))
        fact = cp_factorize(Cm, k=k, rng=rng)
        if not fact.found:
            raise NumericalError(
                f"No completely positive factor found for C (best residual {fact.residual:.3e})."
            )
        Bm = fact.B
    else:
        Bm = np.asarray(B, dtype=float)
        if Bm.ndim != 2 or Bm.shape[0] != d:
            raise DimensionError(f"B must have {d} rows, got shape {Bm.shape}.")
        if np.any(Bm < 0):
            raise ParameterError("B must be entrywise nonnegative.")
        if C is not None:
            Cm = _sym(C, "C").entries
            if np.linalg.norm(Bm @ Bm.T - Cm) > 1e-8 * (1.0 + np.linalg.norm(Cm)):
                raise ParameterError("B B^T does not reproduce C.")
        if not np.any(Bm):
            return DriftOnly(SymMat(np.diag(mu_arr)))
    row_sums = Bm.sum(axis=1)
    active = row_sums > 0
    lam = float(np.min(mu_arr[active] / row_sums[active]))
    gamma = mu_arr - 0.5 * lam * row_sums
    model = DiagonalCP(B=Bm, rate=0.5 * lam * lam, jump_rate_param=lam, gamma=gamma)
    logger.debug("Multivariate subordinator: lambda=%.6g, rate=%.6g, k=%d.", lam, model.rate, model.n_components)
    return model
