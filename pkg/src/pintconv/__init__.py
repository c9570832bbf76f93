"""Two-level Parareal/MGRIT for linear problems, with exact convergence
bounds: propagator norms, temporal-approximation-property constants, and
eigenvalue bounds, validated against observed convergence on hyperbolic
model problems."""

__version__ = "0.1.0"

from .schemes import (ButcherTableau, RungeKuttaStep, get_scheme, propagator_matrix,
                      scheme_names, scheme_registry, stability_value)
from .model_problems import (SpatialProblem, VelocityField, build_advection_diffusion,
                             build_wave_first_order, forcing, velocity_field,
                             wave_eigensystem)
from .spacetime import (ConvergenceTrace, SpaceTimeSystem, assemble, coarsen,
                        convergence_factors, mgrit_solve, sequential_solve)
from .prop_norms import (PropagatorPair, direct_norm_oracle, error_norm_f,
                         error_norm_fcf, residual_norm_f)
from .tap import (TapScan, tap_denominator_min, single_iteration_tap, sufficient_condition_gap,
                  tap_constant, tap_restricted, tap_value_at)
from .eigbounds import (BoundReport, ModePair, complex_map, eval_bound_limit,
                        mode_pairs, single_it_eig, finite_grid_bounds,
                        weighted_norm_factors)

__all__ = [
    "ButcherTableau", "RungeKuttaStep", "get_scheme", "propagator_matrix",
    "scheme_names", "scheme_registry", "stability_value",
    "SpatialProblem", "VelocityField", "build_advection_diffusion",
    "build_wave_first_order", "forcing", "velocity_field", "wave_eigensystem",
    "ConvergenceTrace", "SpaceTimeSystem", "assemble", "coarsen",
    "convergence_factors", "mgrit_solve", "sequential_solve",
    "PropagatorPair", "direct_norm_oracle", "error_norm_f", "error_norm_fcf",
    "residual_norm_f",
    "TapScan", "tap_denominator_min", "single_iteration_tap", "sufficient_condition_gap",
    "tap_constant", "tap_restricted", "tap_value_at",
    "BoundReport", "ModePair", "complex_map", "eval_bound_limit", "mode_pairs",
    "single_it_eig", "finite_grid_bounds", "weighted_norm_factors",
]
