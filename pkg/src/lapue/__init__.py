"""Late-arrival-penalised user equilibria on stochastic traffic networks."""
from .config import ConfigError, ProblemConfig, load_config, parse_config
from .disutility import (MAX, SMOOTH, DisutilityField, GbprParams, PenaltyConfig, ScenarioSet,
                         gbpr_time, max_penalty, penalty, penalty_deriv, saa_disutility,
                         saa_jacobian)
from .equilibrium import (EquilibriumResult, SolverOptions, complementarity_report,
                          natural_residual, solve, t_continuation)
from .network import (Arc, IncidenceMatrices, Network, ODPair, Path, build_incidence,
                      enumerate_simple_paths, path_to_arc_flows, project_feasible,
                      project_simplex)
from .robustness import (ShiftExperimentConfig, SingularActiveSetError, breakdown_sweep,
                         gif_solve, if_finite_difference, shift_ratio_experiment)
from .stochastics import (EmpiricalDistribution, Normal, PerturbedTail, contaminate,
                          kantorovich_1d, kantorovich_equal_count, sample_scenarios)

__version__ = "0.1.0"
