"""Compare the compiled and pure-Python simplex kernels on planner LPs.

    python3 benchmarks/bench_simplex.py [--repeat 3]

Both kernels follow the same pivot sequence, so iteration counts and optimal
values must match; only wall time differs.
"""
import argparse
import time

from pslab import corpus
from pslab.lp import available_kernels, solve_lp
from pslab.planner import build_planner_lp

CASES = [
    ("pigou2", 1, 10),
    ("pigou2", 2, 5),
    ("diamond4", 1, 5),
    ("diamond4", 2, 3),
    ("constant", 2, 5),
    ("pigou2", 3, 10),
    ("diamond4", 2, 4),
    ("diamond4", 3, 2),
]


def bench(problem, kernel, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        sol = solve_lp(problem, method="simplex", kernel=kernel)
        best = min(best, time.perf_counter() - t0)
    return best, sol


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    kernels = available_kernels()
    print(f"kernels: {kernels}")
    print(f"{'case':<22}{'vars':>7}{'rows':>7}" + "".join(f"{k + ' ms':>14}" for k in kernels)
          + f"{'iters':>8}{'speedup':>9}")
    for name, K, m in CASES:
        scen = corpus.scenario(name).with_partition(tuple([1.0 / K] * K)).with_grid(m)
        prob = build_planner_lp(scen).problem
        times, sols = {}, {}
        for k in kernels:
            times[k], sols[k] = bench(prob, k, args.repeat)
        vals = {s.value for s in sols.values()}
        iters = {s.iterations for s in sols.values()}
        assert len(vals) == 1 and len(iters) == 1, "kernels disagree"
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        rows = prob.A_ub.shape[0] + prob.A_eq.shape[0]
        print(f"{name + f' K={K} m={m}':<22}{prob.num_vars:>7}{rows:>7}"
              + "".join(f"{times[k] * 1e3:>14.1f}" for k in kernels)
              + f"{iters.pop():>8}{speed:>9.1f}")


if __name__ == "__main__":
    main()
