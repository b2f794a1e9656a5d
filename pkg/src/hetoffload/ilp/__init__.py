"""0/1 integer linear programming: model container, LP relaxation, branch-and-bound."""

from .blp import BinaryLinearProgram, Constraint, IlpResult, Relation, Sense, Status
from .bnb import solve
from .lp import LpResult, solve_lp_relaxation
from .lpformat import dumps_lp, export_lp, parse_lp, read_lp
from .simplex import tableau_simplex

__all__ = [
    "BinaryLinearProgram",
    "Constraint",
    "IlpResult",
    "LpResult",
    "Relation",
    "Sense",
    "Status",
    "dumps_lp",
    "export_lp",
    "parse_lp",
    "read_lp",
    "solve",
    "solve_lp_relaxation",
    "tableau_simplex",
]
