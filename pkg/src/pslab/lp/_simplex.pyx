# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tableau-simplex kernels (primal and dual).

Tableau layout: rows 0..m-1 are constraints, row m holds reduced costs; the
last column is the right-hand side (row m, last column = -objective).

Pricing follows Dantzig's rule until ``bland_after`` consecutive degenerate
pivots, then Bland's rule until the next nondegenerate pivot; the hybrid
cannot cycle. The degenerate-run counter is passed in and returned so a
driver can split a run into chunks without losing the guarantee.

Semantics match ``_simplex_py`` exactly, including tie handling, so both
kernels produce identical pivot sequences.
"""


cdef void _pivot(double[:, ::1] T, long long[::1] basis, Py_ssize_t r, Py_ssize_t j) nogil:
    cdef Py_ssize_t i, k
    cdef Py_ssize_t nrows = T.shape[0], ncols = T.shape[1]
    cdef double piv = T[r, j], f
    for k in range(ncols):
        T[r, k] = T[r, k] / piv
    T[r, j] = 1.0
    for i in range(nrows):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for k in range(ncols):
                T[i, k] = T[i, k] - f * T[r, k]
            T[i, j] = 0.0
    basis[r] = j


def pivot(double[:, ::1] T, long long[::1] basis, Py_ssize_t r, Py_ssize_t j):
    with nogil:
        _pivot(T, basis, r, j)


cdef int _primal_entering(double[:, ::1] T, const unsigned char[::1] allowed,
                          Py_ssize_t m, Py_ssize_t ncols, double tol_opt, int bland) nogil:
    cdef Py_ssize_t j
    cdef int best_j = -1
    cdef double best = 0.0
    for j in range(ncols):
        if allowed[j] and T[m, j] < -tol_opt:
            if bland:
                return <int>j
            if best_j < 0 or T[m, j] < best:
                best = T[m, j]
                best_j = <int>j
    return best_j


cdef int _primal_leaving(double[:, ::1] T, const long long[::1] basis, Py_ssize_t m,
                         Py_ssize_t j, Py_ssize_t rhs, double tol_piv, double tol_tie,
                         int bland, double* step) nogil:
    # min ratio; ties go to the smallest basis index under Bland, else to the
    # largest pivot element (then smallest basis index)
    cdef Py_ssize_t i
    cdef double a, b, ratio, best = 0.0
    cdef int found = 0, r = -1
    for i in range(m):
        a = T[i, j]
        if a > tol_piv:
            b = T[i, rhs]
            if b < 0.0:
                b = 0.0
            ratio = b / a
            if not found or ratio < best:
                best = ratio
                found = 1
    if not found:
        return -1
    step[0] = best
    for i in range(m):
        a = T[i, j]
        if a > tol_piv:
            b = T[i, rhs]
            if b < 0.0:
                b = 0.0
            if b / a <= best + tol_tie * (1.0 + best):
                if r < 0:
                    r = <int>i
                elif bland:
                    if basis[i] < basis[r]:
                        r = <int>i
                elif a > T[r, j] or (a == T[r, j] and basis[i] < basis[r]):
                    r = <int>i
    return r


def run_simplex(double[:, ::1] T, long long[::1] basis, const unsigned char[::1] allowed,
                long max_iter, double tol_opt, double tol_piv, double tol_tie,
                long bland_after=50, double target=-1.0, long degen=0):
    """Primal simplex. Returns (status, iterations, degenerate run length).

    status: 0 optimal, 1 unbounded, 2 iteration limit. A nonnegative
    ``target`` also stops the run (status 0) once the objective is at or
    below it; phase 1 uses this to quit at zero infeasibility.
    """
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef long it = 0
    cdef int j, r, bland, status = 2
    cdef double step = 0.0
    with nogil:
        while it < max_iter:
            if target >= 0.0 and -T[m, rhs] <= target:
                status = 0
                break
            bland = degen >= bland_after
            j = _primal_entering(T, allowed, m, rhs, tol_opt, bland)
            if j < 0:
                status = 0
                break
            r = _primal_leaving(T, basis, m, j, rhs, tol_piv, tol_tie, bland, &step)
            if r < 0:
                status = 1
                break
            if step <= tol_tie:
                degen += 1
            else:
                degen = 0
            _pivot(T, basis, r, j)
            it += 1
    return status, it, degen


cdef int _dual_leaving(double[:, ::1] T, const long long[::1] basis, Py_ssize_t m,
                       Py_ssize_t rhs, double tol_feas, int bland) nogil:
    cdef Py_ssize_t i
    cdef int r = -1
    for i in range(m):
        if T[i, rhs] < -tol_feas:
            if r < 0:
                r = <int>i
            elif bland:
                if basis[i] < basis[r]:
                    r = <int>i
            elif T[i, rhs] < T[r, rhs]:
                r = <int>i
    return r


cdef int _dual_entering(double[:, ::1] T, const unsigned char[::1] allowed, Py_ssize_t m,
                        Py_ssize_t r, Py_ssize_t ncols, double tol_piv, double tol_tie,
                        int bland, double* step) nogil:
    # min d_j / -a_rj over a_rj < 0; ties go to the lowest column under Bland,
    # else to the most negative a_rj (then lowest column)
    cdef Py_ssize_t j
    cdef double a, d, ratio, best = 0.0
    cdef int found = 0, q = -1
    for j in range(ncols):
        a = T[r, j]
        if allowed[j] and a < -tol_piv:
            d = T[m, j]
            if d < 0.0:
                d = 0.0
            ratio = d / -a
            if not found or ratio < best:
                best = ratio
                found = 1
    if not found:
        return -1
    step[0] = best
    for j in range(ncols):
        a = T[r, j]
        if allowed[j] and a < -tol_piv:
            d = T[m, j]
            if d < 0.0:
                d = 0.0
            if d / -a <= best + tol_tie * (1.0 + best):
                if q < 0:
                    q = <int>j
                    if bland:
                        break
                elif a < T[r, q]:
                    q = <int>j
    return q


def run_dual_simplex(double[:, ::1] T, long long[::1] basis, const unsigned char[::1] allowed,
                     long max_iter, double tol_feas, double tol_piv, double tol_tie,
                     long bland_after=50, long degen=0):
    """Dual simplex from a dual-feasible basis. Returns (status, iterations, degenerate run length).

    status: 0 optimal, 2 iteration limit, 3 primal infeasible.
    """
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef long it = 0
    cdef int j, r, bland, status = 2
    cdef double step = 0.0
    with nogil:
        while it < max_iter:
            bland = degen >= bland_after
            r = _dual_leaving(T, basis, m, rhs, tol_feas, bland)
            if r < 0:
                status = 0
                break
            j = _dual_entering(T, allowed, m, r, rhs, tol_piv, tol_tie, bland, &step)
            if j < 0:
                status = 3
                break
            if step <= tol_tie:
                degen += 1
            else:
                degen = 0
            _pivot(T, basis, r, j)
            it += 1
    return status, it, degen
