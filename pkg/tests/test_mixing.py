import numpy as np
import pytest

from psdOU.errors import ParameterError, UnsupportedModelError
from psdOU.mixing import (
    ConstantMixing,
    GammaMixing,
    GIGMixing,
    InverseGaussianMixing,
    MixingMoments,
    bessel_k,
    gig_mixing_moments,
    gig_moment_by_quadrature,
    log_bessel_k,
    mixing_from_dict,
    mixing_to_dict,
)
from psdOU.utils import make_rng

# K_{1/2}(1) = sqrt(pi / 2) e^{-1}
BESSEL_HALF_AT_ONE = np.sqrt(np.pi / 2.0) * np.exp(-1.0)
N_DRAWS = 200_000
N_SE = 4.0


def test_bessel_half_order_closed_form():
    assert bessel_k(0.5, 1.0) == pytest.approx(BESSEL_HALF_AT_ONE, rel=1e-12)
    assert bessel_k(-0.5, 1.0) == pytest.approx(BESSEL_HALF_AT_ONE, rel=1e-12)
    assert bessel_k(0.5, 1.0) == pytest.approx(0.461068504, abs=1e-9)


def test_bessel_rejects_non_positive_argument():
    with pytest.raises(ParameterError):
        bessel_k(1.0, 0.0)
    with pytest.raises(ParameterError):
        log_bessel_k(1.0, -1.0)


def test_log_bessel_stays_finite_for_large_argument():
    z = 2000.0
    expected = 0.5 * np.log(np.pi / (2.0 * z)) - z
    assert log_bessel_k(0.5, z) == pytest.approx(expected, rel=1e-12)


def test_mixing_moments_consistency():
    m = MixingMoments.from_mean_var(2.0, 3.0)
    assert m.second_moment_eps == 7.0
    with pytest.raises(ParameterError):
        MixingMoments(mean_eps=1.0, var_eps=1.0, second_moment_eps=3.0)
    with pytest.raises(ParameterError):
        MixingMoments.from_mean_var(-1.0, 0.0)


def test_inverse_gaussian_moments():
    m = gig_mixing_moments(-0.5, 2.0, 4.0)
    assert m.mean_eps == 0.5
    assert m.var_eps == 2.0 / 64.0
    assert InverseGaussianMixing(2.0, 4.0).moments() == m


@pytest.mark.parametrize("nu, delta, alpha", [(-0.5, 1.0, 1.0), (1.0, 0.5, 2.0), (-2.5, 3.0, 0.7), (0.3, 1.2, 1.2)])
def test_gig_moments_match_quadrature(nu, delta, alpha):
    m = gig_mixing_moments(nu, delta, alpha)
    first = gig_moment_by_quadrature(nu, delta, alpha, 1)
    second = gig_moment_by_quadrature(nu, delta, alpha, 2)
    assert m.mean_eps == pytest.approx(first, rel=1e-7)
    assert m.second_moment_eps == pytest.approx(second, rel=1e-7)


def test_gig_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        gig_mixing_moments(1.0, 0.0, 1.0)
    with pytest.raises(ParameterError):
        GIGMixing(1.0, 1.0, -1.0)


def test_gig_time_scaled_sampling_only_for_inverse_gaussian():
    rng = make_rng(0)
    assert GIGMixing(1.0, 1.0, 1.0).sample(rng, 5).shape == (5,)
    with pytest.raises(UnsupportedModelError):
        GIGMixing(1.0, 1.0, 1.0).sample(rng, 5, time_scale=0.5)
    with pytest.raises(UnsupportedModelError):
        GIGMixing(1.0, 1.0, 1.0).levy_density(np.array([1.0]))


@pytest.mark.parametrize(
    "law",
    [GammaMixing(2.0, 3.0), InverseGaussianMixing(1.5, 2.0), GIGMixing(0.7, 1.0, 1.5)],
    ids=["gamma", "inverse_gaussian", "gig"],
)
def test_sample_moments_within_band(law):
    draws = law.sample(make_rng(11), N_DRAWS)
    m = law.moments()
    se = np.sqrt(m.var_eps / N_DRAWS)
    assert abs(draws.mean() - m.mean_eps) <= N_SE * se
    assert np.all(draws > 0)


def test_inverse_gaussian_time_scaling_is_additive():
    law = InverseGaussianMixing(1.0, 2.0)
    draws = law.sample(make_rng(5), N_DRAWS, time_scale=0.25)
    # mean of the time-t law is t delta / alpha
    se = np.sqrt(0.25 * law.moments().var_eps / N_DRAWS)
    assert abs(draws.mean() - 0.25 * law.moments().mean_eps) <= N_SE * se


def test_constant_mixing():
    law = ConstantMixing(2.0)
    assert law.is_degenerate
    assert law.moments().var_eps == 0.0
    np.testing.assert_array_equal(law.sample(make_rng(0), 3, time_scale=0.5), [1.0, 1.0, 1.0])
    with pytest.raises(ParameterError):
        ConstantMixing(0.0)
    with pytest.raises(UnsupportedModelError):
        law.pdf(np.array([1.0]))


def test_levy_density_integrates_to_mean():
    from scipy import integrate

    law = InverseGaussianMixing(1.0, 2.0)
    value, _ = integrate.quad(lambda tau: tau * law.levy_density(tau), 0.0, np.inf)
    assert value == pytest.approx(law.moments().mean_eps, rel=1e-6)


@pytest.mark.parametrize(
    "data",
    [
        {"kind": "constant", "value": 1.5},
        {"kind": "gamma", "shape": 2.0, "rate": 0.5},
        {"kind": "gig", "nu": 1.0, "delta": 2.0, "alpha": 3.0},
    ],
)
def test_mixing_dict_round_trip(data):
    assert mixing_to_dict(mixing_from_dict(data)) == data


def test_mixing_from_dict_rejects_schema_violations():
    with pytest.raises(ParameterError):
        mixing_from_dict({"kind": "beta", "a": 1.0})
    with pytest.raises(ParameterError):
        mixing_from_dict({"kind": "gamma", "shape": 1.0})
    law = mixing_from_dict({"kind": "inverse_gaussian", "delta": 1.0, "alpha": 2.0})
    assert law.is_inverse_gaussian
    assert mixing_to_dict(law) == {"kind": "gig", "nu": -0.5, "delta": 1.0, "alpha": 2.0}
