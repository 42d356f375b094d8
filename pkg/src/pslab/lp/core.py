"""Linear programs: problem/solution containers, primal/dual simplex driver, HiGHS fallback."""
from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _simplex_py

log = logging.getLogger(__name__)

try:
    from . import _simplex as _compiled
except ImportError:  # extension not built
    _compiled = None

TOLERANCES = {
    "feasibility": 1e-9,
    "optimality": 1e-9,
    "pivot": 1e-9,
    "tie": 1e-12,
    "duality": 1e-7,
}
# dense tableau entries above which "auto" hands the problem to HiGHS
DENSE_LIMIT = 8_000_000
# consecutive degenerate pivots before pricing falls back to Bland's rule
BLAND_AFTER = 50


class LpError(RuntimeError):
    pass


class LpIterationLimit(LpError):
    """The pivot cap was hit before optimality, infeasibility or unboundedness was proven."""


class LpNumericalError(LpError):
    pass


def available_kernels() -> list[str]:
    return (["cython"] if _compiled is not None else []) + ["python"]


def _default_kernel() -> str:
    if os.environ.get("PSLAB_PURE_PYTHON") or _compiled is None:
        return "python"
    return "cython"


KERNEL = _default_kernel()


def set_kernel(name: str) -> None:
    """Select the simplex kernel ("cython" or "python")."""
    global KERNEL
    if name not in available_kernels():
        raise LpError(f"kernel {name!r} unavailable; have {available_kernels()}")
    KERNEL = name


def _kernel(name: str | None = None):
    name = name or KERNEL
    return _compiled if name == "cython" else _simplex_py


def _as_matrix(a, ncols: int, what: str):
    if a is None:
        return sp.csr_matrix((0, ncols))
    if sp.issparse(a):
        a = sp.csr_matrix(a, dtype=float)
    else:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.size == 0:
            a = a.reshape(0, ncols)
    if a.shape[1] != ncols:
        raise LpError(f"{what} has {a.shape[1]} columns, expected {ncols}")
    return a


def _vec(v, n: int, what: str, default=0.0) -> np.ndarray:
    if v is None:
        return np.full(n, default, dtype=float)
    v = np.asarray(v, dtype=float).ravel()
    if v.size != n:
        raise LpError(f"{what} has length {v.size}, expected {n}")
    return v


@dataclass
class LpProblem:
    """minimize c @ v  s.t.  A_ub v <= b_ub,  A_eq v = b_eq,  v >= lb.

    Constraint matrices may be dense arrays or scipy sparse matrices.
    """

    c: np.ndarray
    A_ub: object = None
    b_ub: np.ndarray | None = None
    A_eq: object = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    names: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub = _as_matrix(self.A_ub, n, "A_ub")
        self.A_eq = _as_matrix(self.A_eq, n, "A_eq")
        self.b_ub = _vec(self.b_ub, self.A_ub.shape[0], "b_ub")
        self.b_eq = _vec(self.b_eq, self.A_eq.shape[0], "b_eq")
        self.lb = _vec(self.lb, n, "lb")
        for name in ("c", "b_ub", "b_eq", "lb"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise LpError(f"{name} has non-finite entries")
        for name in ("A_ub", "A_eq"):
            a = getattr(self, name)
            data = a.data if sp.issparse(a) else a
            if not np.all(np.isfinite(data)):
                raise LpError(f"{name} has non-finite entries")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.A_ub.shape[0] + self.A_eq.shape[0]

    def dense(self, name: str) -> np.ndarray:
        a = getattr(self, name)
        return a.toarray() if sp.issparse(a) else np.asarray(a)

    def residual(self, v: np.ndarray) -> float:
        """Largest violation of any constraint or bound at ``v``."""
        res = 0.0
        if self.A_ub.shape[0]:
            res = max(res, float(np.max(self.A_ub @ v - self.b_ub, initial=0.0)))
        if self.A_eq.shape[0]:
            res = max(res, float(np.max(np.abs(self.A_eq @ v - self.b_eq))))
        return max(res, float(np.max(self.lb - v, initial=0.0)))


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None = None
    x: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    iterations: int = 0
    method: str = ""
    residual: float | None = None
    duality_gap: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def dual(self) -> np.ndarray | None:
        if self.dual_ub is None:
            return None
        return np.concatenate([self.dual_ub, self.dual_eq])


# ------------------------------------------------------------ standard form


@dataclass
class _Standard:
    """Tableau form ``A w (+ slack) = b`` with ``w = v - lb >= 0``.

    ``eq_split`` marks the dual-path layout where every equality appears twice
    (as <= and as >=) so that the all-slack basis is complete.
    """

    T: np.ndarray
    basis: np.ndarray
    A: np.ndarray  # m x N, every column the tableau carries
    b: np.ndarray
    cost: np.ndarray
    sign: np.ndarray
    n: int
    n_real: int  # structural + slack columns
    m_ub: int
    m_eq: int
    eq_split: bool = False


def _tableau(A, b, cost, basis) -> np.ndarray:
    m, N = A.shape
    T = np.zeros((m + 1, N + 1))
    T[:m, :N] = A
    T[:m, N] = b
    T[m, :N] = cost
    return T


def _standard_form(p: LpProblem) -> _Standard:
    """Primal layout: sign-normalized rows, slacks where usable, artificials elsewhere."""
    n = p.num_vars
    A_ub = p.dense("A_ub")
    A_eq = p.dense("A_eq")
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    b = np.concatenate([p.b_ub - A_ub @ p.lb, p.b_eq - A_eq @ p.lb]) if m else np.zeros(0)
    sign = np.where(b < 0, -1.0, 1.0)

    n_real = n + m_ub
    need_art = [i for i in range(m) if i >= m_ub or sign[i] < 0]
    N = n_real + len(need_art)
    A = np.zeros((m, N))
    A[:m_ub, :n] = A_ub
    A[m_ub:, :n] = A_eq
    A[np.arange(m_ub), n + np.arange(m_ub)] = 1.0
    A *= sign[:, None]
    b = b * sign

    basis = np.empty(m, dtype=np.int64)
    basis[:m_ub] = n + np.arange(m_ub)
    for a_col, i in enumerate(need_art):
        A[i, n_real + a_col] = 1.0
        basis[i] = n_real + a_col
    cost = np.zeros(N)
    cost[:n] = p.c
    return _Standard(_tableau(A, b, np.zeros(N), basis), basis, A, b, cost, sign,
                     n, n_real, m_ub, m_eq)


def _dual_form(p: LpProblem, cost: np.ndarray) -> _Standard:
    """All-slack layout for the dual simplex; rows may have negative right-hand sides."""
    n = p.num_vars
    A_ub = p.dense("A_ub")
    A_eq = p.dense("A_eq")
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    A0 = np.vstack([A_ub, A_eq, -A_eq])
    b = np.concatenate([p.b_ub - A_ub @ p.lb, p.b_eq - A_eq @ p.lb, -(p.b_eq - A_eq @ p.lb)])
    m = A0.shape[0]
    A = np.hstack([A0, np.eye(m)])
    basis = n + np.arange(m, dtype=np.int64)
    full_cost = np.concatenate([cost, np.zeros(m)])
    return _Standard(_tableau(A, b, full_cost, basis), basis, A, b, full_cost, np.ones(m),
                     n, n + m, m_ub, m_eq, eq_split=True)


def _max_iter(m: int, N: int) -> int:
    return max(20_000, 50 * (m + N))


def _reinvert(sf: _Standard, cost: np.ndarray) -> None:
    """Rebuild the tableau from the original columns for the current basis."""
    T, m = sf.T, sf.b.size
    if m:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(sf.A[:, sf.basis], check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            return
        if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0.0:
            return
        T[:m, :-1] = scipy.linalg.lu_solve(lu, sf.A, check_finite=False)
        T[:m, -1] = scipy.linalg.lu_solve(lu, sf.b, check_finite=False)
        T[:m, sf.basis] = np.eye(m)
    cb = cost[sf.basis]
    T[m, :-1] = cost - cb @ T[:m, :-1]
    T[m, sf.basis] = 0.0
    T[m, -1] = -(cb @ T[:m, -1])


def _optimize(sf: _Standard, kernel, tol, allowed, cost, target: float = -1.0) -> tuple[str, int]:
    """Drive the tableau to a verified optimum of ``cost``.

    Runs in chunks; between chunks and before accepting an optimum the
    tableau is rebuilt from the original data. The dual kernel is used while
    the basis is dual feasible but primal infeasible, the primal kernel while
    it is primal feasible. Returns (status, pivots).
    """
    T, m = sf.T, sf.b.size
    cap = _max_iter(*T.shape)
    chunk = max(500, 2 * m)
    total = degen = 0
    _reinvert(sf, cost)
    mask = allowed.astype(bool)
    while True:
        if target >= 0.0 and -T[m, -1] <= target:
            return "optimal", total
        primal_ok = not np.any(T[:m, -1] < -tol["feasibility"])
        dual_ok = not np.any(T[m, :-1][mask] < -tol["optimality"])
        if primal_ok and dual_ok:
            return "optimal", total
        if total >= cap:
            raise LpIterationLimit(f"simplex hit the iteration cap after {total} pivots")
        budget = min(chunk, cap - total)
        if primal_ok:
            status, it, degen = kernel.run_simplex(
                T, sf.basis, allowed, budget, tol["optimality"], tol["pivot"], tol["tie"],
                BLAND_AFTER, target, degen)
            if status == 1:
                return "unbounded", total + it
        elif dual_ok:
            status, it, degen = kernel.run_dual_simplex(
                T, sf.basis, allowed, budget, tol["feasibility"], tol["pivot"], tol["tie"],
                BLAND_AFTER, degen)
            if status == 3:
                return "infeasible", total + it
        else:
            raise LpNumericalError("basis lost both primal and dual feasibility")
        total += it
        if status == 0 and it == 0:
            return "optimal", total
        _reinvert(sf, cost)


def _phase1(sf: _Standard, kernel, tol) -> tuple[float, int]:
    N = sf.A.shape[1]
    cost1 = np.zeros(N)
    cost1[sf.n_real:] = 1.0
    allowed = np.ones(N, dtype=np.uint8)
    _, it = _optimize(sf, kernel, tol, allowed, cost1, target=tol["feasibility"])
    return float(-sf.T[-1, -1]), it


def _drive_out_artificials(sf: _Standard, kernel, tol) -> None:
    T = sf.T
    for i in np.flatnonzero(sf.basis >= sf.n_real):
        cand = np.flatnonzero(np.abs(T[i, : sf.n_real]) > tol["pivot"])
        if cand.size:
            j = int(cand[np.argmax(np.abs(T[i, cand]))])
            kernel.pivot(T, sf.basis, int(i), j)
        # otherwise the row is redundant; its artificial stays basic at zero


def _use_dual(p: LpProblem, tol) -> bool:
    return bool(np.all(p.c >= 0.0))


def _simplex_solve(p: LpProblem, kernel_name: str | None, tol) -> LpSolution:
    kernel = _kernel(kernel_name)
    method = f"simplex[{kernel_name or KERNEL}]"
    if _use_dual(p, tol):
        # nonnegative costs: the all-slack basis is dual feasible, no phase 1
        sf = _dual_form(p, p.c)
        method += "/dual"
        allowed = np.ones(sf.A.shape[1], dtype=np.uint8)
        status, iters = _optimize(sf, kernel, tol, allowed, sf.cost)
    else:
        sf = _standard_form(p)
        z1, it1 = _phase1(sf, kernel, tol)
        if z1 > tol["feasibility"]:
            return LpSolution("infeasible", iterations=it1, method=method)
        _drive_out_artificials(sf, kernel, tol)
        allowed = np.zeros(sf.A.shape[1], dtype=np.uint8)
        allowed[: sf.n_real] = 1
        status, it2 = _optimize(sf, kernel, tol, allowed, sf.cost)
        iters = it1 + it2
    if status != "optimal":
        return LpSolution(status, iterations=iters, method=method)

    m = sf.b.size
    T = sf.T
    xb = T[:m, -1].copy()
    try:
        y = np.linalg.solve(sf.A[:, sf.basis].T, sf.cost[sf.basis]) if m else np.zeros(0)
    except np.linalg.LinAlgError:
        y = -T[m, sf.n: sf.n + m] if sf.eq_split else sf.cost[sf.basis] @ T[:m, sf.n_real:]
    w = np.zeros(sf.A.shape[1])
    w[sf.basis] = xb
    w[(w < 0) & (w > -tol["feasibility"])] = 0.0
    v = p.lb + w[: sf.n]
    value = float(p.c @ v)
    dual_value = float(sf.b @ y + p.c @ p.lb)
    y = y * sf.sign
    if sf.eq_split:
        y_ub = y[: sf.m_ub]
        y_eq = y[sf.m_ub: sf.m_ub + sf.m_eq] - y[sf.m_ub + sf.m_eq:]
    else:
        y_ub, y_eq = y[: sf.m_ub], y[sf.m_ub:]
    return _finish(p, LpSolution("optimal", value, v, y_ub, y_eq, iters, method),
                   dual_value, tol)


def _finish(p: LpProblem, sol: LpSolution, dual_value: float, tol) -> LpSolution:
    sol.residual = p.residual(sol.x)
    sol.duality_gap = abs(sol.value - dual_value) / max(1.0, abs(sol.value))
    if sol.duality_gap > tol["duality"]:
        raise LpNumericalError(
            f"duality gap {sol.duality_gap:.3e} exceeds {tol['duality']:.1e} ({sol.method})"
        )
    if sol.residual > 10 * tol["feasibility"]:
        raise LpNumericalError(f"primal residual {sol.residual:.3e} ({sol.method})")
    return sol


def _highs_solve(p: LpProblem, tol, objective: bool = True) -> LpSolution:
    from scipy.optimize import linprog

    opts = {
        "primal_feasibility_tolerance": tol["feasibility"] / 10,
        "dual_feasibility_tolerance": tol["optimality"] / 10,
        "presolve": True,
    }
    c = p.c if objective else np.zeros_like(p.c)
    kwargs = {}
    if p.A_ub.shape[0]:
        kwargs.update(A_ub=sp.csr_matrix(p.A_ub), b_ub=p.b_ub)
    if p.A_eq.shape[0]:
        kwargs.update(A_eq=sp.csr_matrix(p.A_eq), b_eq=p.b_eq)
    bounds = np.column_stack([p.lb, np.full(p.num_vars, np.inf)])
    res = linprog(c, bounds=bounds, method="highs-ds", options=opts, **kwargs)
    method = "highs-ds"
    if res.status == 1:
        raise LpIterationLimit(f"HiGHS iteration limit: {res.message}")
    if res.status == 2:
        return LpSolution("infeasible", iterations=res.nit, method=method)
    if res.status == 3:
        return LpSolution("unbounded", iterations=res.nit, method=method)
    if res.status != 0:
        raise LpNumericalError(f"HiGHS failed: {res.message}")
    y_ub = res.ineqlin.marginals if p.A_ub.shape[0] else np.zeros(0)
    y_eq = res.eqlin.marginals if p.A_eq.shape[0] else np.zeros(0)
    dual_value = float(p.b_ub @ y_ub + p.b_eq @ y_eq + p.lb @ res.lower.marginals)
    sol = LpSolution("optimal", float(c @ res.x), np.asarray(res.x), y_ub, y_eq, res.nit, method)
    return _finish(p, sol, dual_value, tol)


def choose_method(p: LpProblem) -> str:
    m = p.num_rows + p.A_eq.shape[0]
    N = p.num_vars + m
    return "simplex" if (m + 1) * (N + 1) <= DENSE_LIMIT else "highs"


def solve_lp(p: LpProblem, method: str = "auto", kernel: str | None = None,
             tolerances: dict | None = None) -> LpSolution:
    """Solve ``p``.

    ``method`` is "simplex" (dense tableau, deterministic; dual simplex when costs are nonnegative), "highs"
    (scipy's HiGHS dual simplex, for problems too large for a dense tableau) or
    "auto". Optimal solutions are checked for primal residual and duality gap.
    """
    tol = {**TOLERANCES, **(tolerances or {})}
    if method == "auto":
        method = choose_method(p)
    if method == "simplex":
        return _simplex_solve(p, kernel, tol)
    if method == "highs":
        return _highs_solve(p, tol)
    raise LpError(f"unknown method {method!r}")


def feasible(p: LpProblem, method: str = "auto", kernel: str | None = None,
             tolerances: dict | None = None) -> bool:
    """Feasibility of the constraint set.

    With a nonnegative, nonzero objective the simplex route runs the dual
    simplex from the all-slack basis (cost bounded below, so it ends optimal
    or proves infeasibility); otherwise it runs phase 1 and tests the
    artificial optimum against the feasibility tolerance.
    """
    tol = {**TOLERANCES, **(tolerances or {})}
    if method == "auto":
        method = choose_method(p)
    if method == "highs":
        zero = LpProblem(np.zeros(p.num_vars), p.A_ub, p.b_ub, p.A_eq, p.b_eq, p.lb)
        return _highs_solve(zero, tol, objective=False).optimal
    kern = _kernel(kernel)
    if np.all(p.c >= 0.0) and np.any(p.c > 0.0):
        sf = _dual_form(p, p.c)
        allowed = np.ones(sf.A.shape[1], dtype=np.uint8)
        return _optimize(sf, kern, tol, allowed, sf.cost)[0] == "optimal"
    sf = _standard_form(p)
    z1, _ = _phase1(sf, kern, tol)
    return z1 <= tol["feasibility"]


def _fmt_term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    return f"{sign} {abs(coef):.17g} {name}".strip()


def _fmt_row(row: np.ndarray, names) -> str:
    nz = np.flatnonzero(row)
    if not nz.size:
        return f"0 {names[0]}"
    return " ".join(_fmt_term(row[j], names[j], i == 0) for i, j in enumerate(nz))


def write_lp(p: LpProblem, path) -> None:
    """Dump ``p`` in CPLEX LP text format (debug aid)."""
    names = p.names or [f"v{j}" for j in range(p.num_vars)]
    lines = ["Minimize", " obj: " + _fmt_row(p.c, names), "Subject To"]
    A_ub, A_eq = p.dense("A_ub"), p.dense("A_eq")
    for i, row in enumerate(A_ub):
        lines.append(f" ub{i}: {_fmt_row(row, names)} <= {p.b_ub[i]:.17g}")
    for i, row in enumerate(A_eq):
        lines.append(f" eq{i}: {_fmt_row(row, names)} = {p.b_eq[i]:.17g}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lines.append(f" {name} >= {p.lb[j]:.17g}")
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
