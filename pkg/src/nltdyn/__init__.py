"""Generalized quantum dynamics with a separable interaction nonlocal in time.

Closed-form reduced amplitudes, time-domain kernels, a Volterra march, and
contour-integral unitary evolution, with named verification suites over
every identity the model asserts.
"""

__version__ = "0.1.0"

from .model import (ModelParams, Regime, form_factor, loop_integral_I1,
                    loop_integral_I2, loop_integral_I11, kernel_K, overlap_g)
from .amplitude import (BoundaryData, ReducedAmplitude, PoleError,
                        StepFailureError, b1_coefficient, asymptotic_coefficients,
                        asymptotic_seed, t_closed, t_from_anchor,
                        lambda_from_boundary, bound_state_energy,
                        unitarity_residual, hermiticity_residual,
                        riccati_solve, riccati_flow)
from .timedomain import (TimeKernel, TruncationWarning, SeriesDivergenceError,
                         f_tau, ttilde_series, laplace_bridge,
                         bridge_terms_for_tolerance)
from .volterra import InstabilityError, TimeGrid, default_grading, volterra_march
from .evolution import (RadialState, ContourSpec, GridSupportError,
                        ContourTruncationWarning, make_gaussian_packet,
                        make_appendix_d_state, apply_evolution, matrix_element_R,
                        composition_residual, appendix_d_probe, continuity_probe)
from .checks import CHECKS, run_check, worker_count

__all__ = [
    "__version__",
    "ModelParams", "Regime", "form_factor", "loop_integral_I1",
    "loop_integral_I2", "loop_integral_I11", "kernel_K", "overlap_g",
    "BoundaryData", "ReducedAmplitude", "PoleError", "StepFailureError",
    "b1_coefficient", "asymptotic_coefficients", "asymptotic_seed",
    "t_closed", "t_from_anchor", "lambda_from_boundary", "bound_state_energy",
    "unitarity_residual", "hermiticity_residual", "riccati_solve", "riccati_flow",
    "TimeKernel", "TruncationWarning", "SeriesDivergenceError", "f_tau",
    "ttilde_series", "laplace_bridge", "bridge_terms_for_tolerance",
    "InstabilityError", "TimeGrid", "default_grading", "volterra_march",
    "RadialState", "ContourSpec", "GridSupportError", "ContourTruncationWarning",
    "make_gaussian_packet", "make_appendix_d_state", "apply_evolution",
    "matrix_element_R", "composition_residual", "appendix_d_probe",
    "continuity_probe",
    "CHECKS", "run_check", "worker_count",
]
