from .bnb import brute_force_oracle, solve, solve_lp
from .model import (EQ, GAP_REACHED, GE, INFEASIBLE, LE, OPTIMAL, TIME_LIMIT, UNBOUNDED,
                    MilpModel, ModelError, Solution)
from .mps import export_mps
from .simplex import simplex

__all__ = [
    "EQ", "GE", "LE", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "GAP_REACHED", "TIME_LIMIT",
    "MilpModel", "ModelError", "Solution", "solve", "solve_lp", "brute_force_oracle",
    "export_mps", "simplex",
]
