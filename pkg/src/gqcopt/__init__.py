"""Optimistic mirror descent for gradient-quasar-convex minimization and minimax problems."""
from ._backend import BACKEND
from .errors import DomainError, InstanceError, InvariantViolation, OracleNonConvergence, ScheduleError
from .simplex_core import (ProductDistribution, chi_squared, kl_divergence, kl_prox, neg_entropy,
                           regularized_kl_prox, variance_under)
from .oracles import InternalFunction, InternalOperator, check_gqc, check_gqcc, solve_matrix_game
from .omd_min import min_schedule_adaptive, min_schedule_lipschitz, run_min
from .omd_minimax import minimax_schedule, run_minimax
from .mdp import TabularMDP, FiniteHorizonMDP, random_mdp, value_iteration, npg_internal_function
from .markov_game import ZeroSumMarkovGame, random_game, shapley_fixed_point, nash_gap

__version__ = "0.1.0"
