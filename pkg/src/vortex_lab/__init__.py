"""Volume expansion and chaos of MWU / FTRL learning dynamics in games.

Modules
-------
games     payoff matrices, graphical games, RPS family, triviality gap
dynamics  dual/primal states, MWU and FTRL steps, schedules, trajectories
volume    one-step Jacobians, det(M), eps^2 coefficients, thresholds, ensembles
analysis  boundary time, Lyapunov time, step-size admissibility, RPS and 2x2 forms
cli       ``vortex-lab`` command-line front end
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .errors import NumericError, ValidationError
from .games import (BimatrixGame, GraphicalGame, RpsParams, game_from_dict, game_to_dict,
                    is_trivial, matching_pennies, path_graph_game, rps_game, rps_matrix,
                    triviality_gap, zero_sum_from)
from .dynamics import (DualState, Entropy, QuadraticLog, Regularizer, StepSchedule, Trajectory,
                       Tsallis, ea_forward, ea_inverse, ftrl_response, ftrl_step,
                       kl_divergence, mwu_step, primal_of_dual, simulate, softmax, step_size)
from .volume import (Ensemble, RegionSpec, convex_hull, det, epsilon_threshold_ftrl,
                     epsilon_threshold_graphical, epsilon_threshold_zero_sum, evolve_ensemble,
                     growth_rate_bound, hull_measure, in_region, jacobian_ftrl,
                     jacobian_graphical, jacobian_mwu, quadratic_coefficient,
                     second_order_coeff, second_order_coeff_ftrl,
                     second_order_coeff_graphical)
from .analysis import (boundary_time, diminishing_admissible, divergence_curve, lyapunov_time,
                       rps_second_order, rps_threshold, twobytwo_det, twobytwo_volume_sign)

__all__ = [name for name in dir() if not name.startswith("_")]
