"""Rough-in-time Gaussian fields, singular quadrature and Feynman-Kac
Monte Carlo for the multiplicative-noise heat equation."""

from ._backend import BACKEND_NAME, HAVE_COMPILED
from .kernels import (
    AdmissibilityError,
    HurstParams,
    as_hurst,
    fbm_cov,
    first_diff_kernel,
    indicator_inner,
    interval_inner,
    mollified_cov_kernel,
    mollifier_inner,
    mollifier_inner_limit,
    second_diff_kernel,
)
from .quadrature import (
    QuadratureError,
    QuadratureSpec,
    double_quad,
    singular_quad,
)
from .spatial_kernels import (
    SpatialKernel,
    kernel_from_config,
    make_constant,
    make_fbm_space,
    make_smooth,
    solver_gate,
    verify_q1_q2,
)
from .gaussian_field import (
    FieldSample,
    GridSpec,
    RngSeed,
    field_value,
    mollified_field,
    mollified_rate,
    simulate_field,
    simulate_field_batch,
)
from .stoch_integral import (
    HolderPath,
    constant_path,
    covariance_closed,
    increment_moment,
    linear_path,
    mollified_line_integral,
    mollified_moment,
    variance_closed,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "BACKEND_NAME",
    "FieldSample",
    "GridSpec",
    "HAVE_COMPILED",
    "HolderPath",
    "HurstParams",
    "QuadratureError",
    "QuadratureSpec",
    "RngSeed",
    "SpatialKernel",
    "as_hurst",
    "constant_path",
    "covariance_closed",
    "double_quad",
    "fbm_cov",
    "field_value",
    "first_diff_kernel",
    "increment_moment",
    "indicator_inner",
    "interval_inner",
    "kernel_from_config",
    "linear_path",
    "make_constant",
    "make_fbm_space",
    "make_smooth",
    "mollified_cov_kernel",
    "mollified_field",
    "mollified_line_integral",
    "mollified_moment",
    "mollified_rate",
    "mollifier_inner",
    "mollifier_inner_limit",
    "second_diff_kernel",
    "simulate_field",
    "simulate_field_batch",
    "singular_quad",
    "solver_gate",
    "variance_closed",
    "verify_q1_q2",
]
