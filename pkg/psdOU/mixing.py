"""
Mixing laws for normal-mixture drivers, their moments, and the modified
Bessel function of the third kind used by the GIG moment formulas.

A mixing law describes the random scale ε in jumps (or increments)
distributed like (εC)^{1/2} X with X standard normal.
"""

import abc
import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special, stats

from .errors import NumericalError, ParameterError, UnsupportedModelError

logger = logging.getLogger(__name__)

NIG_NU: float = -0.5


@dataclass(frozen=True)
class MixingMoments:
    """
    First two moments of ε; second_moment_eps = var_eps + mean_eps^2.
    """

    mean_eps: float
    var_eps: float
    second_moment_eps: float

    def __post_init__(self) -> None:
        if self.mean_eps < 0 or self.var_eps < 0:
            raise ParameterError(f"Mixing moments must be non-negative, got {self}.")
        if not np.isclose(self.second_moment_eps, self.var_eps + self.mean_eps ** 2, rtol=1e-12, atol=0.0):
            raise ParameterError("second_moment_eps must equal var_eps + mean_eps^2.")

    @classmethod
    def from_mean_var(cls, mean: float, var: float) -> "MixingMoments":
        return cls(mean_eps=float(mean), var_eps=float(var), second_moment_eps=float(var + mean * mean))


def bessel_k(nu: float, z: float) -> float:
    """
    K_nu(z) for z > 0. Values that underflow to 0 are reported through the
    log; use log_bessel_k for large z.
    """
    if not z > 0:
        raise ParameterError(f"bessel_k needs z > 0, got {z}.")
    value = float(special.kv(nu, z))
    if value == 0.0:
        logger.warning("K_%g(%g) underflows to 0; use log_bessel_k.", nu, z)
    if not np.isfinite(value):
        raise NumericalError(f"K_{nu}({z}) overflows.")
    return value


def log_bessel_k(nu: float, z: float) -> float:
    """
    log K_nu(z) through the exponentially scaled kve, finite for large z.
    """
    if not z > 0:
        raise ParameterError(f"log_bessel_k needs z > 0, got {z}.")
    scaled = float(special.kve(nu, z))
    if not (np.isfinite(scaled) and scaled > 0):
        raise NumericalError(f"log K_{nu}({z}) is not representable.")
    return float(np.log(scaled) - z)


def gig_mixing_moments(nu: float, delta: float, alpha: float) -> MixingMoments:
    """
    Mean and variance of GIG(nu, delta, alpha), density proportional to
    x^(nu-1) exp(-(delta^2/x + alpha^2 x)/2):

      E(ε)   = delta K_{nu+1}(delta alpha) / (alpha K_nu(delta alpha))
      var(ε) = delta^2 (K_{nu+2} K_nu - K_{nu+1}^2) / (alpha^2 K_nu^2)

    Bessel ratios are taken from the exponentially scaled functions so the
    e^{-z} factors cancel. nu = -1/2 returns delta/alpha and delta/alpha^3.
    """
    if not (delta > 0 and alpha > 0):
        raise ParameterError(f"GIG needs delta > 0 and alpha > 0, got delta={delta}, alpha={alpha}.")
    if nu == NIG_NU:
        return MixingMoments.from_mean_var(delta / alpha, delta / alpha ** 3)
    z = delta * alpha
    k0, k1, k2 = (float(special.kve(nu + s, z)) for s in (0.0, 1.0, 2.0))
    if not all(np.isfinite(k) and k > 0 for k in (k0, k1, k2)):
        raise NumericalError(f"Bessel evaluation failed for GIG(nu={nu}, delta={delta}, alpha={alpha}).")
    r1, r2 = k1 / k0, k2 / k0
    scale = delta / alpha
    mean = scale * r1
    var = scale ** 2 * (r2 - r1 * r1)
    return MixingMoments.from_mean_var(mean, max(var, 0.0))


class MixingLaw(abc.ABC):
    """
    Law of the mixing variable ε on R+.
    """

    kind: str = ""

    @abc.abstractmethod
    def moments(self) -> MixingMoments:
        ...

    def pdf(self, x: np.ndarray) -> np.ndarray:
        raise UnsupportedModelError(f"{self.kind} mixing has no density.")

    def sample(self, rng: np.random.Generator, size: Union[int, Tuple[int, ...]], time_scale: float = 1.0) -> np.ndarray:
        """
        Draws of ε. time_scale > 0 selects the law at time t of the
        subordinator whose time-one law is this one (used for subgrid
        simulation of type-G̅ drivers).
        """
        raise UnsupportedModelError(f"Sampling {self.kind} mixing is not supported.")

    @property
    def is_degenerate(self) -> bool:
        return False


class ConstantMixing(MixingLaw):
    kind = "constant"

    def __init__(self, value: float = 1.0) -> None:
        if not value > 0:
            raise ParameterError(f"Constant mixing needs value > 0, got {value}.")
        self.value: float = float(value)

    def moments(self) -> MixingMoments:
        return MixingMoments.from_mean_var(self.value, 0.0)

    def sample(self, rng, size, time_scale=1.0):
        return np.full(size, self.value * time_scale)

    @property
    def is_degenerate(self) -> bool:
        return True

    def __repr__(self) -> str:
        return f"ConstantMixing(value={self.value})"


class GammaMixing(MixingLaw):
    kind = "gamma"

    def __init__(self, shape: float, rate: float) -> None:
        if not (shape > 0 and rate > 0):
            raise ParameterError(f"Gamma mixing needs shape > 0 and rate > 0, got {shape}, {rate}.")
        self.shape: float = float(shape)
        self.rate: float = float(rate)

    def moments(self) -> MixingMoments:
        return MixingMoments.from_mean_var(self.shape / self.rate, self.shape / self.rate ** 2)

    def pdf(self, x):
        return stats.gamma.pdf(x, a=self.shape, scale=1.0 / self.rate)

    def sample(self, rng, size, time_scale=1.0):
        return rng.gamma(self.shape * time_scale, 1.0 / self.rate, size=size)

    def __repr__(self) -> str:
        return f"GammaMixing(shape={self.shape}, rate={self.rate})"


class GIGMixing(MixingLaw):
    """
    Generalised inverse Gaussian GIG(nu, delta, alpha). Moments and time-one draws for every nu;
    subordinator increments only for nu = -1/2 (inverse Gaussian, the NIG case).
    """

    kind = "gig"

    def __init__(self, nu: float, delta: float, alpha: float) -> None:
        if not (delta > 0 and alpha > 0):
            raise ParameterError(f"GIG needs delta > 0 and alpha > 0, got delta={delta}, alpha={alpha}.")
        self.nu: float = float(nu)
        self.delta: float = float(delta)
        self.alpha: float = float(alpha)

    @property
    def is_inverse_gaussian(self) -> bool:
        return self.nu == NIG_NU

    def moments(self) -> MixingMoments:
        return gig_mixing_moments(self.nu, self.delta, self.alpha)

    def frozen(self):
        return stats.geninvgauss(self.nu, self.delta * self.alpha, scale=self.delta / self.alpha)

    def pdf(self, x):
        return self.frozen().pdf(x)

    def sample(self, rng, size, time_scale=1.0):
        if self.is_inverse_gaussian:
            delta_t = self.delta * time_scale
            return rng.wald(delta_t / self.alpha, delta_t * delta_t, size=size)
        if time_scale != 1.0:
            raise UnsupportedModelError(
                f"GIG mixing with nu={self.nu} is only sampled at time one; "
                "subordinator paths need nu=-1/2 (inverse Gaussian)."
            )
        return self.frozen().rvs(size=size, random_state=rng)

    def levy_density(self, tau: np.ndarray) -> np.ndarray:
        """
        Lévy density of the inverse Gaussian subordinator with time-one law
        GIG(-1/2, delta, alpha): delta (2 pi)^(-1/2) tau^(-3/2) exp(-alpha^2 tau / 2).
        """
        if not self.is_inverse_gaussian:
            raise UnsupportedModelError("Lévy density is only available for the inverse Gaussian case.")
        tau = np.asarray(tau, dtype=float)
        return self.delta / np.sqrt(2.0 * np.pi) * tau ** -1.5 * np.exp(-0.5 * self.alpha ** 2 * tau)

    def __repr__(self) -> str:
        return f"GIGMixing(nu={self.nu}, delta={self.delta}, alpha={self.alpha})"


class InverseGaussianMixing(GIGMixing):
    """
    Inverse Gaussian law, GIG(-1/2, delta, alpha); the NIG mixing.
    """

    kind = "inverse_gaussian"

    def __init__(self, delta: float, alpha: float) -> None:
        super().__init__(NIG_NU, delta, alpha)

    def __repr__(self) -> str:
        return f"InverseGaussianMixing(delta={self.delta}, alpha={self.alpha})"


def mixing_from_dict(data: dict) -> MixingLaw:
    kind = data.get("kind")
    params = {k: v for k, v in data.items() if k != "kind"}
    builders = {
        "constant": (ConstantMixing, {"value"}),
        "gamma": (GammaMixing, {"shape", "rate"}),
        "gig": (GIGMixing, {"nu", "delta", "alpha"}),
        "inverse_gaussian": (InverseGaussianMixing, {"delta", "alpha"}),
    }
    if kind not in builders:
        raise ParameterError(f"Unknown mixing kind {kind!r}; expected one of {sorted(builders)}.")
    builder, keys = builders[kind]
    if set(params) != keys:
        raise ParameterError(f"Mixing {kind!r} needs keys {sorted(keys)}, got {sorted(params)}.")
    return builder(**{k: float(v) for k, v in params.items()})


def mixing_to_dict(mixing: MixingLaw) -> dict:
    if isinstance(mixing, ConstantMixing):
        return {"kind": "constant", "value": mixing.value}
    if isinstance(mixing, GammaMixing):
        return {"kind": "gamma", "shape": mixing.shape, "rate": mixing.rate}
    if isinstance(mixing, GIGMixing):
        return {"kind": "gig", "nu": mixing.nu, "delta": mixing.delta, "alpha": mixing.alpha}
    raise ParameterError(f"Cannot serialise mixing law {mixing!r}.")


def gig_moment_by_quadrature(nu: float, delta: float, alpha: float, order: int) -> float:
    """
    E(ε^order) by integrating the GIG density; an independent check on the
    Bessel-ratio formulas.
    """
    from scipy import integrate

    law = GIGMixing(nu, delta, alpha).frozen()
    value, _ = integrate.quad(lambda x: x ** order * law.pdf(x), 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(value)
