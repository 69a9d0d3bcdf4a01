"""Maximin-profile learning for two-player zero-sum simulation-based games under a GP prior."""

from sbg.complexity import (
    delta_opt,
    delta_T,
    delta_T_eps,
    h_one,
    h_star,
    h_two,
    hardness,
    t_delta_bound,
    t_delta_inf,
)
from sbg.errors import DegenerateGameError, InfeasibleError, NumericError, ParameterError
from sbg.games import (
    FiniteGame,
    FunctionSimulator,
    GameSimulator,
    Simulator,
    arbitrary_discretization_bound,
    best_response,
    brute_force_maximin,
    discretize,
    k_epsilon,
    smoothness_constants,
)
from sbg.gp import GPPosterior, KernelSpec, ProfileGrid, posterior_batch, sample_utility, update_recursive
from sbg.harness import ExperimentConfig, RunRecord, eps_table, run_experiment
from sbg.solvers import SolverResult, gp_se, m_g_lucb, m_gp_lucb, m_lucb, phase_lengths

__version__ = "0.1.0"
