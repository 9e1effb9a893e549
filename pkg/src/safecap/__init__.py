"""Conservative and adaptive penalties for model-based safe RL.

Tabular CMDPs are planned exactly through the occupancy-measure LP;
continuous tasks use constrained cross-entropy planning over a learned
ensemble. A feedback controller tunes the penalty scale online.
"""

from .cmdp import (Cmdp, EvalResult, GapCheck, OccupancyMeasure, Policy, ValidationError, evaluate_policy,
                   occupancy_of_policy, policy_of_occupancy, simulation_gap_check, tv_distance, tv_table)
from .controller import ControllerState, FallbackSignal, exponential_search_init, replay, update
from .kernels import BACKEND
from .planner import (InfeasibleError, PenaltyWeighting, PlanResult, min_cost_fallback, solve_cmdp,
                      solve_conservative)
from .tabular import CountTable, PenaltyTable, certified_penalty, fit_transitions, practical_penalty

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Cmdp", "ControllerState", "CountTable", "EvalResult", "FallbackSignal", "GapCheck",
    "InfeasibleError", "OccupancyMeasure", "PenaltyTable", "PenaltyWeighting", "PlanResult", "Policy",
    "ValidationError", "certified_penalty", "evaluate_policy", "exponential_search_init", "fit_transitions",
    "min_cost_fallback", "occupancy_of_policy", "policy_of_occupancy", "practical_penalty", "replay",
    "simulation_gap_check", "solve_cmdp", "solve_conservative", "tv_distance", "tv_table", "update",
]
