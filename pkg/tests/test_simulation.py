import numpy as np
import pytest

from psdOU.driftop import DriftOperator, drift_integral, semigroup_apply
from psdOU.errors import DimensionError, ParameterError, UnstableDriftError
from psdOU.mixing import ConstantMixing, InverseGaussianMixing
from psdOU.moments import psd_diagnostics
from psdOU.simulation import (
    OUProcessSpec,
    SimulationOptions,
    sample_stationary,
    sample_stationary_pairs,
    simulate_path,
    simulate_path_from_jumps,
    stationary_horizons,
)
from psdOU.subordinators import DriftOnly, GaussMixtureCP, JumpRecord, TypeGbar
from psdOU.symcore import matrix_exponential
from psdOU.utils import make_rng

from .conftest import DRIFT, JUMP_C

SIGMA0 = np.array([[1.0, 0.2], [0.2, 0.4]])
JUMP = np.array([[0.5, 0.1], [0.1, 0.3]])


def test_spec_validation(drift, gauss_driver):
    with pytest.raises(DimensionError):
        OUProcessSpec(DriftOperator(np.eye(3)), gauss_driver)
    with pytest.raises(ParameterError):
        OUProcessSpec(drift, gauss_driver, options=SimulationOptions(grid_step=0.0))
    with pytest.raises(ParameterError):
        OUProcessSpec(drift, gauss_driver, options=SimulationOptions(burn_in_tol=2.0))
    spec = OUProcessSpec(DRIFT, gauss_driver)
    assert spec.dim == 2
    np.testing.assert_array_equal(spec.sigma0.entries, np.zeros((2, 2)))


def test_no_jump_path_follows_semigroup_and_drift(drift):
    gamma = np.array([[0.3, 0.1], [0.1, 0.2]])
    spec = OUProcessSpec(drift, DriftOnly(gamma), sigma0=SIGMA0, options=SimulationOptions(grid_step=0.5))
    path = simulate_path(spec, 2.0, make_rng(0))
    expected = semigroup_apply(drift, 2.0, SIGMA0).entries + drift_integral(drift, gamma, 2.0)
    np.testing.assert_allclose(path.final.entries, expected, atol=1e-12)
    np.testing.assert_allclose(path.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert path.scheme == "exact"
    assert path.jumps == []


def test_jump_enters_at_its_time(drift, gauss_driver):
    spec = OUProcessSpec(drift, gauss_driver, sigma0=SIGMA0, options=SimulationOptions(grid_step=1.0))
    path = simulate_path_from_jumps(spec, 2.0, [JumpRecord(0.7, JUMP)])
    np.testing.assert_allclose(path.times, [0.0, 0.7, 1.0, 2.0])
    E1, E2 = matrix_exponential(drift.A, 0.7), matrix_exponential(drift.A, 1.3)
    expected = E2 @ (E1 @ SIGMA0 @ E1.T + JUMP) @ E2.T
    np.testing.assert_allclose(path.final.entries, expected, atol=1e-12)
    np.testing.assert_allclose(path.state(1).entries, E1 @ SIGMA0 @ E1.T + JUMP, atol=1e-12)
    assert len(path.jumps) == 1


def test_jump_on_grid_point_is_recorded_after_grid_state(drift, gauss_driver):
    spec = OUProcessSpec(drift, gauss_driver, options=SimulationOptions(grid_step=1.0))
    path = simulate_path_from_jumps(spec, 2.0, [JumpRecord(1.0, JUMP)])
    np.testing.assert_allclose(path.times, [0.0, 1.0, 1.0, 2.0])
    np.testing.assert_allclose(path.state(1).entries, 0.0)
    np.testing.assert_allclose(path.state(2).entries, JUMP)


def test_jump_outside_interval_is_rejected(drift, gauss_driver):
    spec = OUProcessSpec(drift, gauss_driver)
    with pytest.raises(ParameterError):
        simulate_path_from_jumps(spec, 1.0, [JumpRecord(1.5, JUMP)])
    with pytest.raises(ParameterError):
        simulate_path(spec, -1.0, make_rng(0))


def test_simulated_path_is_psd_and_reproducible(gauss_spec):
    a = simulate_path(gauss_spec, 20.0, make_rng(3))
    b = simulate_path(gauss_spec, 20.0, make_rng(3))
    np.testing.assert_array_equal(a.states, b.states)
    assert np.all(np.diff(a.times) >= 0)
    assert psd_diagnostics(a).min_eigenvalue >= -1e-12
    assert a.vech_states().shape == (a.times.size, 3)


def test_grid_scheme_for_infinite_activity(drift):
    driver = TypeGbar(C=JUMP_C, mixing=InverseGaussianMixing(1.0, 1.0), n_sub=4)
    spec = OUProcessSpec(drift, driver, options=SimulationOptions(grid_step=0.3))
    path = simulate_path(spec, 1.0, make_rng(1))
    assert path.scheme == "grid"
    assert path.times.size == 5
    assert path.times[-1] == pytest.approx(1.0)
    assert np.all(path.min_eigenvalues() >= -1e-12)


def test_stationary_horizons(gauss_spec):
    T_burn, T_mix = stationary_horizons(gauss_spec)
    assert T_burn == T_mix
    assert np.linalg.norm(matrix_exponential(gauss_spec.drift.A, T_burn), 2) ** 2 <= 1e-8


def test_stationary_sampling_shapes(gauss_spec):
    draws, lagged = sample_stationary_pairs(gauss_spec, 50, [1.0, 0.5], make_rng(2))
    assert draws.shape == (50, 2, 2)
    assert sorted(lagged) == [0.5, 1.0]
    assert all(v.shape == (50, 2, 2) for v in lagged.values())
    assert np.all(np.linalg.eigvalsh(draws)[:, 0] >= -1e-12)


def test_stationary_sampling_rejects_bad_input(gauss_spec, gauss_driver):
    with pytest.raises(ParameterError):
        sample_stationary(gauss_spec, 0, make_rng(0))
    with pytest.raises(ParameterError):
        sample_stationary_pairs(gauss_spec, 5, [1e6], make_rng(0))
    with pytest.raises(ParameterError):
        sample_stationary_pairs(gauss_spec, 5, [-1.0], make_rng(0))
    unstable = OUProcessSpec(DriftOperator(np.eye(2)), gauss_driver)
    with pytest.raises(UnstableDriftError):
        sample_stationary(unstable, 5, make_rng(0))


def test_stationary_sampling_is_reproducible(gauss_spec):
    a = sample_stationary(gauss_spec, 20, make_rng(8))
    b = sample_stationary(gauss_spec, 20, make_rng(8))
    np.testing.assert_array_equal(a, b)


def test_grid_stationary_sampling_rounds_lags(drift):
    driver = TypeGbar(C=JUMP_C, mixing=InverseGaussianMixing(1.0, 1.0), n_sub=2)
    spec = OUProcessSpec(drift, driver, options=SimulationOptions(grid_step=0.25))
    draws, lagged = sample_stationary_pairs(spec, 30, [0.0, 0.5], make_rng(4))
    assert draws.shape == (30, 2, 2)
    np.testing.assert_array_equal(lagged[0.0], draws)
    assert not np.array_equal(lagged[0.5], draws)


def test_non_psd_drift_can_still_give_psd_states(nonsub_matrices):
    A, gamma_mu = nonsub_matrices
    op = DriftOperator(A)
    drift = -(A @ gamma_mu) - gamma_mu @ A.T
    driver = GaussMixtureCP(rate=1.0, C=np.eye(2), mixing=ConstantMixing(1.0), drift=drift)
    assert driver.non_subordinator
    draws = sample_stationary(OUProcessSpec(op, driver), 200, make_rng(5))
    assert psd_diagnostics(draws).min_eigenvalue >= -1e-10
