"""Pure-numpy tableau-simplex kernels; same contract as the compiled ``_simplex``."""
from __future__ import annotations

import numpy as np


def pivot(T: np.ndarray, basis: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    T[r, j] = 1.0
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.flatnonzero(col)
    if nz.size:
        T[nz] -= col[nz, None] * T[r]
        T[nz, j] = 0.0
    basis[r] = j


def run_simplex(T, basis, allowed, max_iter, tol_opt, tol_piv, tol_tie,
                bland_after=50, target=-1.0, degen=0):
    """Primal simplex, Dantzig pricing with a Bland fallback after ``bland_after`` degenerate pivots."""
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    allowed = np.asarray(allowed, dtype=bool)
    it = 0
    while it < max_iter:
        if target >= 0.0 and -T[m, rhs] <= target:
            return 0, it, degen
        bland = degen >= bland_after
        cand = np.flatnonzero(allowed & (T[m, :rhs] < -tol_opt))
        if cand.size == 0:
            return 0, it, degen
        j = int(cand[0]) if bland else int(cand[np.argmin(T[m, cand])])
        a = T[:m, j]
        rows = np.flatnonzero(a > tol_piv)
        if rows.size == 0:
            return 1, it, degen
        ratios = np.maximum(T[rows, rhs], 0.0) / a[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol_tie * (1.0 + best)]
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            # largest pivot, then smallest basis index
            r = int(min(ties, key=lambda i: (-T[i, j], basis[i])))
        degen = degen + 1 if best <= tol_tie else 0
        pivot(T, basis, r, j)
        it += 1
    return 2, it, degen


def run_dual_simplex(T, basis, allowed, max_iter, tol_feas, tol_piv, tol_tie,
                     bland_after=50, degen=0):
    """Dual simplex from a dual-feasible basis; status 3 means primal infeasible."""
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    allowed = np.asarray(allowed, dtype=bool)
    it = 0
    while it < max_iter:
        bland = degen >= bland_after
        bad = np.flatnonzero(T[:m, rhs] < -tol_feas)
        if bad.size == 0:
            return 0, it, degen
        if bland:
            r = int(bad[np.argmin(basis[bad])])
        else:
            r = int(bad[np.argmin(T[bad, rhs])])
        a = T[r, :rhs]
        cols = np.flatnonzero(allowed & (a < -tol_piv))
        if cols.size == 0:
            return 3, it, degen
        ratios = np.maximum(T[m, cols], 0.0) / -a[cols]
        best = ratios.min()
        ties = cols[ratios <= best + tol_tie * (1.0 + best)]
        if bland:
            j = int(ties[0])
        else:
            # most negative pivot, then lowest column
            j = int(ties[np.argmin(a[ties])])
        degen = degen + 1 if best <= tol_tie else 0
        pivot(T, basis, r, j)
        it += 1
    return 2, it, degen
