from .registry import (
    PROBLEM_NAMES,
    GridSpec,
    PdeProblem,
    build_problem,
    default_grid,
    input_dim,
    relative_error_of_values,
    relative_l2_error,
    value_op,
)

__all__ = [
    "PROBLEM_NAMES",
    "GridSpec",
    "PdeProblem",
    "build_problem",
    "default_grid",
    "input_dim",
    "relative_error_of_values",
    "relative_l2_error",
    "value_op",
]
