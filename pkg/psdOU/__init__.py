"""
psdOU: simulation and calibration of positive semidefinite Ornstein-Uhlenbeck
processes driven by matrix subordinators.

This package supports:
  • Symmetric-matrix algebra: vec/vech, commutation and duplication matrices, PSD checks.
  • The drift operator X -> AX + XA^T, its semigroup, Lyapunov solves and generator recovery.
  • Matrix subordinators: diagonal compound Poisson, Gaussian-mixture jumps, type-G quadratic variation.
  • Exact and grid simulation, stationary sampling, closed-form moments and characteristic functions.
  • Calibration: driver exponents from target laws, drift conditions and method of moments.
  • JSON/CSV artifacts, acceptance suites and a CLI tool.
"""

from .errors import (
    BranchCutError,
    ConfigError,
    DimensionError,
    NotDoublyNonnegativeError,
    NotPositiveSemidefiniteError,
    NumericalError,
    ParameterError,
    PsdOUError,
    QuadratureError,
    SingularOperatorError,
    UnstableDriftError,
    UnsupportedModelError,
    ValidationFailure,
)
from .symcore import (
    CommutationMatrix,
    HalfVec,
    PsdMat,
    SymMat,
    commutation_matrix,
    duplication_matrix,
    elimination_matrix,
    halfvec_transform,
    matrix_exponential,
    matrix_logarithm,
    psd_check,
    sqrtm_psd,
    symmetric_basis,
    unvech,
    vech,
)
from .driftop import (
    DriftOperator,
    apply_drift,
    extract_generator,
    generator_matrix,
    recover_from_basis_action,
    semigroup_apply,
    semigroup_evaluator,
    solve_drift_equation,
    stability_margin,
)
from .mixing import (
    ConstantMixing,
    GammaMixing,
    GIGMixing,
    InverseGaussianMixing,
    MixingMoments,
    bessel_k,
    gig_mixing_moments,
)
from .subordinators import (
    DiagonalCP,
    DriftOnly,
    GaussMixtureCP,
    TypeGbar,
    build_multivariate_subordinator,
    char_exponent,
    cp_factorize,
    discrete_qv,
    driver_moments,
    mixture_qv_moments,
    sample_increment,
)
from .simulation import OUPath, OUProcessSpec, SimulationOptions, sample_stationary, simulate_path
from .moments import MomentReport, psd_diagnostics, stationary_charfn, stationary_moments
from .calibration import (
    CumulantTransform,
    derive_driver_charfn,
    drift_condition_check,
    mom_fit,
    non_subordinator_scenario,
)
from .serialization import emit_report
from .validation import get_suite, register_suite, run_suites

__version__ = "1.0.0"
