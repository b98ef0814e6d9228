import numpy as np
import pytest

from psdOU.driftop import DriftOperator
from psdOU.errors import DimensionError, ParameterError, UnstableDriftError
from psdOU.mixing import ConstantMixing, GammaMixing
from psdOU.moments import (
    MomentReport,
    empirical_charfn,
    empirical_moments,
    path_moments,
    psd_diagnostics,
    stationary_charfn,
    stationary_cumulant,
    stationary_moments,
)
from psdOU.simulation import OUProcessSpec, SimulationOptions, sample_stationary_pairs, simulate_path
from psdOU.subordinators import DriftOnly, GaussMixtureCP
from psdOU.symcore import SymMat, matrix_exponential
from psdOU.utils import make_rng

N_SE = 4.0
LAGS = (0.5, 1.0)


def _scalar_spec(a=-0.7, rate=1.0, c=1.0, mixing=None):
    driver = GaussMixtureCP(rate=rate, C=[[c]], mixing=mixing or ConstantMixing(1.0))
    return OUProcessSpec(DriftOperator([[a]]), driver)


def test_scalar_closed_form():
    a, rate, c = -0.7, 2.0, 1.5
    report = stationary_moments(_scalar_spec(a, rate, c), lags=[0.5])
    # jumps c N^2: mean c, second moment 3 c^2
    assert report.mean.entries[0, 0] == pytest.approx(-rate * c / (2.0 * a))
    assert report.var_vec[0, 0] == pytest.approx(-rate * 3.0 * c * c / (4.0 * a))
    assert report.autocov[0.5][0, 0] == pytest.approx(np.exp(2.0 * a * 0.5) * report.var_vec[0, 0])
    assert report.provenance == "closed_form"


def test_closed_form_structure(gauss_spec):
    report = stationary_moments(gauss_spec, lags=LAGS)
    assert sorted(report.autocov) == [0.0, 0.5, 1.0]
    np.testing.assert_array_equal(report.autocov[0.0], report.var_vec)
    G = gauss_spec.drift.gen_small
    np.testing.assert_allclose(report.autocov[1.0], matrix_exponential(G, 1.0) @ report.var_vec)
    np.testing.assert_allclose(report.var_vec, report.var_vec.T)
    assert np.linalg.eigvalsh(report.var_vec)[0] >= -1e-12
    np.testing.assert_allclose(report.gamma_sigma.entries, 0.0)


def test_drift_only_driver_has_degenerate_law(drift):
    gamma = np.array([[1.0, 0.2], [0.2, 0.5]])
    report = stationary_moments(OUProcessSpec(drift, DriftOnly(gamma)))
    np.testing.assert_allclose(report.var_vec, 0.0, atol=1e-14)
    np.testing.assert_allclose(report.mean.entries, report.gamma_sigma.entries)


def test_unstable_drift_is_rejected(gauss_driver):
    spec = OUProcessSpec(DriftOperator([[0.1, 0.0], [0.0, -1.0]]), gauss_driver)
    with pytest.raises(UnstableDriftError):
        stationary_moments(spec)
    with pytest.raises(ParameterError):
        stationary_moments(_scalar_spec(), lags=[-1.0])


def test_report_validation():
    bad = MomentReport(mean=SymMat([[1.0]]), var_vec=np.array([[-1.0]]))
    with pytest.raises(ParameterError):
        bad.validate()


def test_stationary_cumulant_scalar_closed_form():
    # constant-mixing Gaussian jumps with A = -1 integrate to log(2 / (1 + sqrt(1 - 2iz)))
    spec = _scalar_spec(-1.0, 1.0, 1.0)
    z = 0.3
    expected_log = np.log(2.0 / (1.0 + np.sqrt(1.0 - 2j * z)))
    assert stationary_cumulant(spec, [[z]]) == pytest.approx(expected_log, abs=1e-7)
    assert stationary_cumulant(spec, [[0.0]]) == 0j
    assert abs(stationary_charfn(spec, [[z]])) <= 1.0
    with pytest.raises(DimensionError):
        stationary_cumulant(spec, np.eye(2))


def test_charfn_gradient_gives_mean(gauss_spec):
    # d/dt log E exp(i t tr(Σ Z)) at 0 is i tr(E(Σ) Z)
    Z = np.array([[0.4, 0.1], [0.1, 0.2]])
    t = 1e-3
    plus = stationary_cumulant(gauss_spec, t * Z, epsabs=1e-13)
    minus = stationary_cumulant(gauss_spec, -t * Z, epsabs=1e-13)
    slope = (plus - minus) / (2.0 * t)
    mean = stationary_moments(gauss_spec).mean.entries
    assert slope == pytest.approx(1j * np.trace(mean @ Z), abs=1e-5)


@pytest.mark.slow
def test_monte_carlo_moments_within_band(gauss_spec):
    closed = stationary_moments(gauss_spec, lags=LAGS)
    draws, lagged = sample_stationary_pairs(gauss_spec, 20_000, LAGS, make_rng(17))
    emp = empirical_moments(draws, lagged)
    se = emp.std_errors
    assert np.all(np.abs(emp.mean.entries - closed.mean.entries) <= N_SE * se["mean"])
    assert np.all(np.abs(emp.var_vec - closed.var_vec) <= N_SE * se["var_vec"] + 1e-12)
    for h in LAGS:
        assert np.all(np.abs(emp.autocov[h] - closed.autocov[h]) <= N_SE * se["autocov"][h] + 1e-12)


@pytest.mark.slow
def test_empirical_charfn_matches_closed_form(gauss_spec):
    Z = np.array([[0.3, -0.2], [-0.2, 0.5]])
    draws, _ = sample_stationary_pairs(gauss_spec, 20_000, None, make_rng(23))
    estimate = empirical_charfn(draws, Z)
    assert abs(estimate.value - stationary_charfn(gauss_spec, Z)) <= N_SE * estimate.std_error


def test_empirical_moments_of_known_sample():
    draws = np.array([np.eye(2), 3.0 * np.eye(2)])
    report = empirical_moments(draws)
    np.testing.assert_allclose(report.mean.entries, 2.0 * np.eye(2))
    assert report.var_vec[0, 0] == pytest.approx(2.0)
    assert report.var_vec[0, 3] == pytest.approx(2.0)
    assert report.provenance == "monte_carlo"
    assert report.n_samples == 2
    with pytest.raises(ParameterError):
        empirical_moments(draws[:1])
    with pytest.raises(DimensionError):
        empirical_moments(np.ones((3, 2)))
    with pytest.raises(DimensionError):
        empirical_moments(draws, {0.5: np.ones((3, 2, 2))})


def test_path_moments_from_grid_path():
    spec = OUProcessSpec(
        DriftOperator([[-1.0]]),
        GaussMixtureCP(rate=2.0, C=[[1.0]], mixing=GammaMixing(2.0, 2.0)),
        options=SimulationOptions(grid_step=0.1),
    )
    path = simulate_path(spec, 2000.0, make_rng(6))
    grid = np.isclose(np.round(path.times / 0.1) * 0.1, path.times, rtol=0.0, atol=1e-9)
    states = path.states[grid][100:]
    report = path_moments(states, 0.1, lags=[0.5], n_batches=20)
    closed = stationary_moments(spec, lags=[0.5])
    assert abs(report.mean.entries[0, 0] - closed.mean.entries[0, 0]) <= N_SE * report.std_errors["mean"][0, 0]
    assert sorted(report.autocov) == [0.0, 0.5]
    with pytest.raises(ParameterError):
        path_moments(states, 0.1, lags=[0.25])
    with pytest.raises(ParameterError):
        path_moments(states[:10], 0.1, n_batches=20)


def test_psd_diagnostics():
    states = np.array([np.eye(2), np.diag([1.0, 0.0]), np.zeros((2, 2))])
    diag = psd_diagnostics(states)
    assert diag.n == 3
    assert diag.min_eigenvalue == 0.0
    assert diag.fraction_positive_definite == pytest.approx(1.0 / 3.0)
    assert diag.rank_histogram == {0: 1, 1: 1, 2: 1}
    assert diag.to_dict()["rank_histogram"] == {"0": 1, "1": 1, "2": 1}
    assert psd_diagnostics(np.eye(3)).n == 1
    with pytest.raises(ParameterError):
        psd_diagnostics(np.zeros((0, 2, 2)))
