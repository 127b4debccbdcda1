"""Line configuration optimizer: LP core, branch and bound, and oracles."""

from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LpModel, LpResult, lp_solve
from .problems import (
    InitProblem,
    ParetoPoint,
    ReconfigProblem,
    Solution,
    SolveStats,
    Weights,
    build_init_problem,
    build_reconfig_problem,
)
from .solve import solve_init, solve_reconfig, sweep_pareto
from .oracle import brute_force_oracle

__all__ = [
    "INFEASIBLE",
    "OPTIMAL",
    "UNBOUNDED",
    "LpModel",
    "LpResult",
    "lp_solve",
    "Weights",
    "InitProblem",
    "ReconfigProblem",
    "Solution",
    "SolveStats",
    "ParetoPoint",
    "build_init_problem",
    "build_reconfig_problem",
    "solve_init",
    "solve_reconfig",
    "sweep_pareto",
    "brute_force_oracle",
]
