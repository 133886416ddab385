"""Self-contained LP/QP/MILP solvers with a uniform problem contract."""

from .milp import solve_lp, solve_milp
from .problems import (DEFAULT_CONFIG, LpProblem, MilpProblem, QpProblem,
                       SolveStatus, SolverConfig, Status, dump_problem,
                       dumps_problem, feasibility_residual, load_problem)
from .qp import solve_qp

__all__ = [
    "DEFAULT_CONFIG", "LpProblem", "MilpProblem", "QpProblem", "SolveStatus",
    "SolverConfig", "Status", "dump_problem", "dumps_problem",
    "feasibility_residual", "load_problem", "solve_lp", "solve_milp",
    "solve_qp",
]
