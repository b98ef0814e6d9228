"""
Simulation engine for positive semidefinite Ornstein-Uhlenbeck processes

    dΣ_t = (AΣ_{t-} + Σ_{t-}A^T) dt + dL_t,   Σ_0 = sigma0,

driven by a matrix subordinator L.

Compound Poisson drivers are simulated exactly: between events the state
follows the semigroup plus the integrated drift, and jumps are added at their
times. Drivers with infinitely many jumps (TypeGbar) use the grid scheme
Σ_{t+h} = e^{Ah} Σ_t e^{A^T h} + (L_{t+h} - L_t).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .driftop import DriftOperator, decay_horizon, drift_integral, require_stable
from .errors import DimensionError, NumericalError, ParameterError
from .subordinators import (
    JumpRecord,
    SubordinatorModel,
    drift_matrix,
    is_compound_poisson,
    sample_increments,
    sample_jump_batch,
    sample_jumps,
)
from .symcore import PsdMat, SymMat, matrix_exponential, matrix_exponential_batch, psd_check, vech

logger = logging.getLogger(__name__)

EXPM_CHUNK: int = 65536
SEGMENT_CHUNK: int = 20000


@dataclass
class SimulationOptions:
    grid_step: float = 0.1
    burn_in_tol: float = 1e-8
    quad_epsabs: float = 1e-8
    charfn_tol: float = 1e-10
    progress: bool = False

    def validate(self) -> None:
        if not self.grid_step > 0:
            raise ParameterError(f"grid_step must be positive, got {self.grid_step}.")
        for name in ("burn_in_tol", "charfn_tol"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ParameterError(f"{name} must lie in (0, 1), got {value}.")
        if not self.quad_epsabs > 0:
            raise ParameterError(f"quad_epsabs must be positive, got {self.quad_epsabs}.")


class OUProcessSpec:
    """
    The triple (A, L, Σ_0) plus numerical options.
    """

    def __init__(
        self,
        drift: DriftOperator,
        driver: SubordinatorModel,
        sigma0: Optional[object] = None,
        options: Optional[SimulationOptions] = None,
    ) -> None:
        if not isinstance(drift, DriftOperator):
            drift = DriftOperator(drift)
        if driver.dim != drift.dim:
            raise DimensionError(f"Driver has d={driver.dim}, drift has d={drift.dim}.")
        sigma0 = np.zeros((drift.dim, drift.dim)) if sigma0 is None else sigma0
        self.drift: DriftOperator = drift
        self.driver: SubordinatorModel = driver
        self.sigma0: PsdMat = sigma0 if isinstance(sigma0, PsdMat) else psd_check(sigma0, scale_aware=True)
        if self.sigma0.dim != drift.dim:
            raise DimensionError(f"sigma0 is {self.sigma0.dim}x{self.sigma0.dim}, drift has d={drift.dim}.")
        self.options: SimulationOptions = options if options is not None else SimulationOptions()
        self.options.validate()

    @property
    def dim(self) -> int:
        return self.drift.dim

    def with_sigma0(self, sigma0: object) -> "OUProcessSpec":
        return OUProcessSpec(self.drift, self.driver, sigma0, self.options)

    def __repr__(self) -> str:
        return f"OUProcessSpec(d={self.dim}, driver={self.driver.kind})"


@dataclass
class OUPath:
    """
    Recorded states of one simulated path. states has shape (n, d, d);
    times is increasing. scheme is "exact" or "grid".
    """

    times: np.ndarray
    states: np.ndarray
    jumps: List[JumpRecord] = field(default_factory=list)
    scheme: str = "exact"

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> SymMat:
        return SymMat(self.states[-1])

    def state(self, i: int) -> SymMat:
        return SymMat(self.states[i])

    def vech_states(self) -> np.ndarray:
        d = self.dim
        return np.array([vech(s) for s in self.states]).reshape(len(self.times), d * (d + 1) // 2)

    def min_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.states)[:, 0]


def _expm_many(A: np.ndarray, ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype=float).ravel()
    out = np.empty((ts.size,) + A.shape)
    for start in range(0, ts.size, EXPM_CHUNK):
        out[start:start + EXPM_CHUNK] = matrix_exponential_batch(A, ts[start:start + EXPM_CHUNK])
    return out


def _drift_integrals(op: DriftOperator, gamma: np.ndarray, ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype=float).ravel()
    if not np.any(gamma):
        return np.zeros((ts.size, op.dim, op.dim))
    out = np.empty((ts.size, op.dim, op.dim))
    g = SymMat(gamma)
    for start in range(0, ts.size, EXPM_CHUNK):
        out[start:start + EXPM_CHUNK] = drift_integral(op, g, ts[start:start + EXPM_CHUNK])
    return out


def _check_finite(state: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(state)):
        raise NumericalError(f"Simulated state became non-finite at t={t:.6g}.")


def simulate_path_from_jumps(
    spec: OUProcessSpec,
    horizon: float,
    jumps: Sequence[JumpRecord],
    sigma0: Optional[object] = None,
    t0: float = 0.0,
    progress: Optional[bool] = None,
) -> OUPath:
    """
    Deterministic exact scheme for a given jump realisation on
    [t0, t0 + horizon]: states are recorded on the grid t0 + k * grid_step
    (plus the end point) and right after every jump.
    """
    if not (np.isfinite(horizon) and horizon > 0):
        raise ParameterError(f"horizon must be positive, got {horizon}.")
    op = spec.drift
    d = spec.dim
    t1 = t0 + horizon
    step = spec.options.grid_step
    n_grid = int(np.ceil(horizon / step - 1e-9))
    grid = np.minimum(t0 + np.arange(1, n_grid + 1) * step, t1)
    jump_times = np.array([j.time for j in jumps], dtype=float)
    if jump_times.size and (jump_times.min() < t0 or jump_times.max() > t1):
        raise ParameterError(f"Jump times must lie in [{t0}, {t1}].")
    times = np.concatenate([grid, jump_times])
    is_jump = np.concatenate([np.zeros(grid.size, dtype=bool), np.ones(jump_times.size, dtype=bool)])
    jump_index = np.concatenate([np.full(grid.size, -1), np.arange(jump_times.size)])
    order = np.lexsort((is_jump, times))
    times, is_jump, jump_index = times[order], is_jump[order], jump_index[order]
    deltas = np.diff(np.concatenate([[t0], times]))

    E = _expm_many(op.A, deltas)
    D = _drift_integrals(op, drift_matrix(spec.driver), deltas)

    state = np.array(spec.sigma0.entries if sigma0 is None else np.asarray(sigma0, dtype=float))
    if state.shape != (d, d):
        raise DimensionError(f"sigma0 must be {d}x{d}, got {state.shape}.")
    states = np.empty((times.size + 1, d, d))
    states[0] = state
    show = spec.options.progress if progress is None else progress
    for m in tqdm(range(times.size), desc="Simulating path", disable=not show):
        state = E[m] @ state @ E[m].T + D[m]
        if is_jump[m]:
            state = state + jumps[jump_index[m]].matrix
        state = 0.5 * (state + state.T)
        states[m + 1] = state
    _check_finite(state, float(t1))
    recorded = [jumps[i] for i in jump_index[is_jump]]
    return OUPath(times=np.concatenate([[t0], times]), states=states, jumps=recorded, scheme="exact")


def _simulate_grid(spec: OUProcessSpec, horizon: float, rng: np.random.Generator, show: bool) -> OUPath:
    n_steps = int(np.ceil(horizon / spec.options.grid_step - 1e-9))
    h = horizon / n_steps
    E = matrix_exponential(spec.drift.A, h)
    incs = sample_increments(spec.driver, h, n_steps, rng)
    states = np.empty((n_steps + 1, spec.dim, spec.dim))
    state = np.array(spec.sigma0.entries)
    states[0] = state
    for m in tqdm(range(n_steps), desc="Simulating path", disable=not show):
        state = E @ state @ E.T + incs[m]
        state = 0.5 * (state + state.T)
        states[m + 1] = state
    _check_finite(state, horizon)
    return OUPath(times=np.arange(n_steps + 1) * h, states=states, jumps=[], scheme="grid")


def simulate_path(
    spec: OUProcessSpec, horizon: float, rng: np.random.Generator, progress: Optional[bool] = None
) -> OUPath:
    """
    One path on [0, horizon]. Exact for compound Poisson drivers, grid scheme
    with step grid_step (shrunk to divide the horizon) otherwise.
    """
    if not (np.isfinite(horizon) and horizon > 0):
        raise ParameterError(f"horizon must be positive, got {horizon}.")
    show = spec.options.progress if progress is None else progress
    if is_compound_poisson(spec.driver):
        jumps = sample_jumps(spec.driver, 0.0, horizon, rng)
        logger.debug("simulate_path: %d jumps on [0, %g].", len(jumps), horizon)
        return simulate_path_from_jumps(spec, horizon, jumps, progress=show)
    return _simulate_grid(spec, horizon, rng, show)


# ---------------------------------------------------------------------------
# Stationary sampling
# ---------------------------------------------------------------------------


def stationary_horizons(spec: OUProcessSpec) -> Tuple[float, float]:
    """
    (T_burn, T_mix) with ||e^{A T_burn}||_2^2 <= burn_in_tol and T_mix = T_burn.
    """
    require_stable(spec.drift)
    T_burn = decay_horizon(spec.drift, spec.options.burn_in_tol)
    return T_burn, T_burn


def _normalise_lags(lags: Optional[Sequence[float]]) -> List[float]:
    values = sorted({float(h) for h in (lags or [])})
    if any(h < 0 or not np.isfinite(h) for h in values):
        raise ParameterError(f"Lags must be finite and non-negative, got {values}.")
    return values


def _segment_noise(
    spec: OUProcessSpec, lengths: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """
    For each independent segment, the driver contribution seen at the segment
    end: integrated drift plus e^{A a} J e^{A^T a} for each jump of age a.
    """
    op = spec.drift
    uniq, inverse = np.unique(lengths, return_inverse=True)
    noise = _drift_integrals(op, drift_matrix(spec.driver), uniq)[inverse]
    owner, age, mats = sample_jump_batch(spec.driver, lengths, rng)
    for start in range(0, owner.size, EXPM_CHUNK):
        sl = slice(start, start + EXPM_CHUNK)
        Ea = matrix_exponential_batch(op.A, age[sl])
        np.add.at(noise, owner[sl], np.einsum("nij,njk,nlk->nil", Ea, mats[sl], Ea))
    return noise


def _collect_exact(
    spec: OUProcessSpec, n: int, lags: List[float], rng: np.random.Generator, show: bool
) -> Tuple[np.ndarray, Dict[float, np.ndarray]]:
    T_burn, T_mix = stationary_horizons(spec)
    lag_max = lags[-1] if lags else 0.0
    if lag_max >= T_mix:
        raise ParameterError(f"Lags must be shorter than the mixing time {T_mix:.6g}, got {lag_max}.")
    lag_steps = list(np.diff([0.0] + lags))
    per_draw = 1 + len(lags)
    lengths = np.array(
        [T_burn] + lag_steps + ([T_mix - lag_max] + lag_steps) * (n - 1), dtype=float
    )
    uniq, inverse = np.unique(lengths, return_inverse=True)
    E = _expm_many(spec.drift.A, uniq)

    d = spec.dim
    out = np.empty((lengths.size, d, d))
    state = np.zeros((d, d))
    bar = tqdm(total=lengths.size, desc="Stationary sampling", disable=not show)
    for start in range(0, lengths.size, SEGMENT_CHUNK):
        stop = min(start + SEGMENT_CHUNK, lengths.size)
        noise = _segment_noise(spec, lengths[start:stop], rng)
        for m in range(start, stop):
            Em = E[inverse[m]]
            state = Em @ state @ Em.T + noise[m - start]
            state = 0.5 * (state + state.T)
            out[m] = state
        bar.update(stop - start)
    bar.close()
    _check_finite(state, float(lengths.sum()))
    draws = out[0::per_draw]
    lagged = {h: out[i + 1::per_draw] for i, h in enumerate(lags)}
    return draws, lagged


def _collect_grid(
    spec: OUProcessSpec, n: int, lags: List[float], rng: np.random.Generator, show: bool
) -> Tuple[np.ndarray, Dict[float, np.ndarray]]:
    T_burn, _ = stationary_horizons(spec)
    h = spec.options.grid_step
    lag_steps = []
    for lag in lags:
        k = int(round(lag / h))
        if abs(k * h - lag) > 1e-9 * (1.0 + lag):
            logger.warning("Lag %g is not a multiple of grid_step %g; using %g.", lag, h, k * h)
        lag_steps.append(k)
    burn_steps = int(np.ceil(T_burn / h))
    E = matrix_exponential(spec.drift.A, h)
    d = spec.dim
    states = np.zeros((n, d, d))
    lagged: Dict[float, np.ndarray] = {}
    total = burn_steps + (max(lag_steps) if lag_steps else 0)
    draws = None
    pending = dict(zip(lags, lag_steps))
    for step in tqdm(range(total + 1), desc="Stationary sampling", disable=not show):
        if step == burn_steps:
            draws = states.copy()
        for lag, k in list(pending.items()):
            if step == burn_steps + k:
                lagged[lag] = states.copy()
                del pending[lag]
        if step == total:
            break
        states = E @ states @ E.T + sample_increments(spec.driver, h, n, rng)
    _check_finite(states, total * h)
    return draws, lagged


def sample_stationary_pairs(
    spec: OUProcessSpec,
    n: int,
    lags: Optional[Sequence[float]],
    rng: np.random.Generator,
    progress: Optional[bool] = None,
) -> Tuple[np.ndarray, Dict[float, np.ndarray]]:
    """
    n approximately stationary draws Σ (shape (n, d, d)) and, for every lag
    h, the states Σ_{t+h} following each draw.

    Compound Poisson drivers: one path started at zero, burnt in over T_burn,
    collected every T_mix; lags must be shorter than T_mix. Grid drivers: n
    independent chains advanced in parallel; lags are rounded to grid_step.
    """
    if n < 1:
        raise ParameterError("n must be at least 1.")
    lag_list = _normalise_lags(lags)
    show = spec.options.progress if progress is None else progress
    if is_compound_poisson(spec.driver):
        draws, lagged = _collect_exact(spec, n, lag_list, rng, show)
    else:
        draws, lagged = _collect_grid(spec, n, lag_list, rng, show)
    if not spec.driver.non_subordinator:
        floor = float(np.min(np.linalg.eigvalsh(draws)[:, 0]))
        if floor < -1e-10 * (1.0 + float(np.max(np.abs(draws)))):
            raise NumericalError(f"Stationary draw left the PSD cone (eigenvalue {floor:.3e}).")
    return draws, lagged


def sample_stationary(
    spec: OUProcessSpec, n: int, rng: np.random.Generator, progress: Optional[bool] = None
) -> np.ndarray:
    draws, _ = sample_stationary_pairs(spec, n, None, rng, progress)
    return draws
