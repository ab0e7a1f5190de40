"""Complex Ginzburg-Landau equation with dynamic/Wentzell boundary conditions
on radially symmetric domains: solver, energy diagnostics and verification
studies."""

from .diagnostics import EnergyLedger, bound_check, convergence_order, decay_rate_fit, energy_E, energy_F
from .discrete_ops import (boundary_value_norms, dissipativity_residual, laplacian_apply, normal_derivative,
                           norm_lp_interior, norm_v)
from .errors import (Blowup, ConfigError, GlsimError, InsufficientData, InvalidDimension, InvalidRadii,
                     NonConvergence, ParseError, TooCoarse, ValidationError, ZeroPivot)
from .experiments import (ExperimentReport, bump_initial, energy_monotonicity_study, equivalence_study,
                          hump_initial, inviscid_study, linear_suite, manufactured_solution_study,
                          stabilization_study)
from .geometry import RadialGrid, build_grid, geometric_condition_check
from .linsolve import TridiagonalSystem, bordered_solve, thomas_solve
from .model import (FeedbackSpec, ModelParams, assumption_check, compatibility_residual, custom_feedback,
                    feedback_eval, feedback_invert, identity_feedback, nonlinearity, nonlinearity_tangent,
                    saturating_feedback)
from .stepper import Forcing, SchemeConfig, Trajectory, assemble_step_operator, neumann_map, run, step

__version__ = "0.1.0"

__all__ = [
    "Blowup", "ConfigError", "EnergyLedger", "ExperimentReport", "FeedbackSpec", "Forcing", "GlsimError",
    "InsufficientData", "InvalidDimension", "InvalidRadii", "ModelParams", "NonConvergence", "ParseError",
    "RadialGrid", "SchemeConfig", "TooCoarse", "Trajectory", "TridiagonalSystem", "ValidationError", "ZeroPivot",
    "assemble_step_operator", "assumption_check", "bordered_solve", "boundary_value_norms", "bound_check",
    "build_grid", "bump_initial", "compatibility_residual", "convergence_order", "custom_feedback",
    "decay_rate_fit", "dissipativity_residual", "energy_E", "energy_F", "energy_monotonicity_study",
    "equivalence_study", "feedback_eval", "feedback_invert", "geometric_condition_check", "hump_initial",
    "identity_feedback", "inviscid_study", "laplacian_apply", "linear_suite", "manufactured_solution_study",
    "neumann_map", "nonlinearity", "nonlinearity_tangent", "norm_lp_interior", "norm_v", "normal_derivative",
    "run", "saturating_feedback", "stabilization_study", "step", "thomas_solve",
]
