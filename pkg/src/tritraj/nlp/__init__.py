from tritraj.nlp.backends import BACKENDS, solve
from tritraj.nlp.problem import (
    FunctionProblem,
    NLPProblem,
    SolveReport,
    SolverOptions,
    Status,
    check_derivatives,
    constraint_violation,
)

__all__ = [
    "BACKENDS",
    "FunctionProblem",
    "NLPProblem",
    "SolveReport",
    "SolverOptions",
    "Status",
    "check_derivatives",
    "constraint_violation",
    "solve",
]
