import numpy as np
import pytest

from psdOU.driftop import DriftOperator
from psdOU.mixing import ConstantMixing
from psdOU.simulation import OUProcessSpec, SimulationOptions
from psdOU.subordinators import GaussMixtureCP
from psdOU.utils import make_rng

DRIFT = np.array([[-1.0, 0.2], [0.0, -0.5]])
JUMP_C = np.array([[1.0, 0.3], [0.3, 0.5]])

NONSUB_A = np.array([[-0.1, -1.0 / 3.0], [-1.0 / 3.0, -2.0]])
NONSUB_GAMMA = np.array([[2.0, -2.0 / 3.0], [-2.0 / 3.0, 2.0]])


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def drift():
    return DriftOperator(DRIFT)


@pytest.fixture
def gauss_driver():
    return GaussMixtureCP(rate=1.0, C=JUMP_C, mixing=ConstantMixing(1.0))


@pytest.fixture
def gauss_spec(drift, gauss_driver):
    return OUProcessSpec(drift, gauss_driver, options=SimulationOptions(grid_step=0.1))


@pytest.fixture
def nonsub_matrices():
    return NONSUB_A.copy(), NONSUB_GAMMA.copy()


@pytest.fixture
def gauss_config():
    return {
        "model": {
            "drift": DRIFT.tolist(),
            "driver": {
                "kind": "gauss_mixture_cp",
                "rate": 1.0,
                "C": JUMP_C.tolist(),
                "mixing": {"kind": "constant", "value": 1.0},
            },
        },
        "run": {"horizon": 5.0, "n_samples": 200, "seed": 7, "lags": [0.5]},
    }
