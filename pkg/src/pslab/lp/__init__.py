"""Linear programming used by the planner and partition analyses.

The simplex kernel is compiled (Cython) when the extension is built and falls
back to a numpy implementation otherwise; set ``PSLAB_PURE_PYTHON=1`` to force
the fallback.
"""
from .core import (
    DENSE_LIMIT,
    TOLERANCES,
    LpError,
    LpIterationLimit,
    LpNumericalError,
    LpProblem,
    LpSolution,
    available_kernels,
    choose_method,
    feasible,
    set_kernel,
    solve_lp,
    write_lp,
)

__all__ = [
    "DENSE_LIMIT",
    "TOLERANCES",
    "LpError",
    "LpIterationLimit",
    "LpNumericalError",
    "LpProblem",
    "LpSolution",
    "available_kernels",
    "choose_method",
    "feasible",
    "set_kernel",
    "solve_lp",
    "write_lp",
]
