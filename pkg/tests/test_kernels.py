"""The compiled and numpy simplex kernels must take identical pivot paths."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pslab.lp import _simplex_py, available_kernels
from pslab.lp import core

compiled = pytest.importorskip("pslab.lp._simplex") if "cython" in available_kernels() else None
needs_cython = pytest.mark.skipif(compiled is None, reason="compiled kernel not built")

TOLS = (1e-9, 1e-9, 1e-12)


def primal_tableau(rng, m, n, degenerate):
    A = rng.normal(size=(m, n))
    b = np.zeros(m) if degenerate else rng.uniform(0, 1, size=m)
    c = rng.normal(size=n)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = c
    return T, np.arange(n, n + m, dtype=np.int64)


def dual_tableau(rng, m, n):
    T, basis = primal_tableau(rng, m, n, False)
    T[:m, -1] = rng.normal(size=m)
    T[m, :n] = rng.uniform(0, 1, size=n)
    return T, basis


def run_both(fn_name, T, basis, **kw):
    out = []
    for mod in (compiled, _simplex_py):
        T2, b2 = T.copy(), basis.copy()
        allowed = np.ones(T.shape[1] - 1, dtype=np.uint8)
        res = getattr(mod, fn_name)(T2, b2, allowed, 500, *TOLS, **kw)
        out.append((tuple(res), T2, b2))
    return out


@needs_cython
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 8), st.integers(2, 10), st.booleans(),
       st.sampled_from([0, 3, 50]))
def test_primal_identical(seed, m, n, degenerate, bland_after):
    rng = np.random.default_rng(seed)
    T, basis = primal_tableau(rng, m, n, degenerate)
    (ra, Ta, ba), (rb, Tb, bb) = run_both("run_simplex", T, basis, bland_after=bland_after)
    assert ra == rb
    assert np.array_equal(ba, bb)
    assert Ta.tobytes() == Tb.tobytes()


@needs_cython
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 8), st.integers(2, 10), st.sampled_from([0, 3, 50]))
def test_dual_identical(seed, m, n, bland_after):
    rng = np.random.default_rng(seed)
    T, basis = dual_tableau(rng, m, n)
    (ra, Ta, ba), (rb, Tb, bb) = run_both("run_dual_simplex", T, basis, bland_after=bland_after)
    assert ra == rb
    assert np.array_equal(ba, bb)
    assert Ta.tobytes() == Tb.tobytes()


@needs_cython
def test_target_stop_identical():
    rng = np.random.default_rng(11)
    T, basis = primal_tableau(rng, 5, 6, False)
    (ra, _, _), (rb, _, _) = run_both("run_simplex", T, basis, target=0.5)
    assert ra == rb


@needs_cython
def test_pivot_identical():
    rng = np.random.default_rng(5)
    T = rng.normal(size=(6, 9))
    outs = []
    for mod in (compiled, _simplex_py):
        T2, b2 = T.copy(), np.arange(5, dtype=np.int64)
        mod.pivot(T2, b2, 2, 4)
        outs.append((T2.tobytes(), b2.tolist()))
    assert outs[0] == outs[1]


@needs_cython
def test_planner_solutions_identical():
    from pslab import corpus
    from pslab.planner import build_planner_lp
    from pslab.lp import solve_lp

    scen = corpus.scenario("diamond4").with_partition((0.5, 0.5))
    p = build_planner_lp(scen).problem
    a = solve_lp(p, method="simplex", kernel="cython")
    b = solve_lp(p, method="simplex", kernel="python")
    assert a.x.tobytes() == b.x.tobytes()
    assert a.iterations == b.iterations


def test_fallback_selected_by_env():
    env = dict(os.environ, PSLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from pslab.lp import core; print(core.KERNEL)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_bland_counter_carried():
    # a fully degenerate problem reports its degenerate run length back to the caller
    rng = np.random.default_rng(2)
    T, basis = primal_tableau(rng, 4, 6, True)
    allowed = np.ones(T.shape[1] - 1, dtype=np.uint8)
    status, it, degen = _simplex_py.run_simplex(T, basis, allowed, 500, *TOLS)
    assert status in (0, 1)
    assert degen == it


def test_set_kernel_rejects_unknown():
    with pytest.raises(core.LpError):
        core.set_kernel("fortran")
