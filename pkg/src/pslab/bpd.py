"""Attainable flows, residue ranges, partition-disparity budgets and implementing partitions."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .costs import profile_table
from .lp import LpProblem, feasible, solve_lp
from .mechanism import RecommendationRule, Scenario
from .planner import DEFAULT_VARIABLE_CAP, _check_cap, obedience_matrix, partition_grid, threads

LOAD_TOL = 1e-7


class BpdError(ValueError):
    pass


def expected_edge_load(rule: RecommendationRule, scen: Scenario) -> np.ndarray:
    """Prior- and rule-averaged edge loads."""
    from .costs import atom_flow

    net = scen.network
    out = np.zeros(net.num_edges)
    for s, prof, w in rule.iter_atoms():
        out += net.prior[s] * w * (atom_flow(prof, scen) @ net.incidence.T)
    return out


def attainable_flow_polytope(load, scen: Scenario, lower=None) -> LpProblem:
    """Route flows ``f >= lower`` carrying the demand and inducing edge loads ``load``.

    The objective is zero; callers swap in their own.
    """
    net = scen.network
    load = np.asarray(load, dtype=float)
    if load.shape != (net.num_edges,):
        raise BpdError(f"load target needs {net.num_edges} entries")
    A_eq = np.vstack([net.incidence, np.ones((1, net.num_routes))])
    b_eq = np.concatenate([load, [scen.demand]])
    return LpProblem(np.zeros(net.num_routes), A_eq=A_eq, b_eq=b_eq, lb=lower)


def residue_range(load, other_flows, r: int, scen: Scenario) -> tuple[float, float]:
    """Range of the route-``r`` flow left for a pair of groups.

    ``other_flows`` is the summed route flow of every group outside the pair
    (zeros when K = 2). The pair's combined flow ``g`` must be nonnegative
    and complete ``other_flows`` to an attainable flow for ``load``.
    """
    net = scen.network
    other = np.zeros(net.num_routes) if other_flows is None else np.asarray(other_flows, dtype=float)
    # variables are the total flows f = g + other, so g >= 0 becomes f >= other
    base = attainable_flow_polytope(load, scen, lower=other)
    ends = []
    for sign in (1.0, -1.0):
        c = np.zeros(net.num_routes)
        c[r] = sign
        sol = solve_lp(LpProblem(c, A_eq=base.A_eq, b_eq=base.b_eq, lb=base.lb), method="simplex")
        if sol.status == "infeasible":
            raise BpdError("no residue completes f^{-kj}")
        ends.append(sign * sol.value - other[r])
    return ends[0], ends[1]


def _range_sum(load, other, scen) -> float | None:
    """Sum over routes of (max - min) residue flow, or None if infeasible."""
    net = scen.network
    base = attainable_flow_polytope(load, scen, lower=other)
    if not feasible(base, method="simplex"):
        return None
    total = 0.0
    for r in range(net.num_routes):
        lo, hi = residue_range(load, other, r, scen)
        total += hi - lo
    return total


def gamma(load, x_rest, scen: Scenario) -> float:
    """Disparity budget for a group pair given the factors ``x_rest`` of the other groups.

    For more than two groups the minimum over the other groups' flows is taken
    over their grid policies.
    """
    x_rest = np.asarray(x_rest, dtype=float).ravel()
    D = scen.demand
    grid = scen.grid()
    best = None
    if x_rest.size == 0:
        best = _range_sum(load, None, scen)
    else:
        for idx in itertools.product(range(len(grid)), repeat=x_rest.size):
            other = np.zeros(scen.network.num_routes)
            for x_m, g in zip(x_rest, idx):
                other += (x_m * D) * grid.policies[g]
            total = _range_sum(load, other, scen)
            if total is not None and (best is None or total < best):
                best = total
    if best is None:
        raise BpdError("no residue completes f^{-kj}")
    return float((1.0 - x_rest.sum()) - best / D)


@dataclass
class PairSlack:
    k: int
    j: int
    gamma: float
    disparity: float

    @property
    def slack(self) -> float:
        return self.gamma - self.disparity


def check_bpd(x, load, scen: Scenario, _cache: dict | None = None) -> tuple[bool, list[PairSlack]]:
    """Bounded partition disparity: ``|x^k - x^j| <= Gamma`` for every pair."""
    x = tuple(float(v) for v in x)
    table = []
    for k, j in itertools.combinations(range(len(x)), 2):
        rest = tuple(x[m] for m in range(len(x)) if m not in (k, j))
        if _cache is not None and rest in _cache:
            gam = _cache[rest]
        else:
            gam = gamma(load, rest, scen)
            if _cache is not None:
                _cache[rest] = gam
        table.append(PairSlack(k, j, gam, abs(x[k] - x[j])))
    return all(p.slack >= 0 for p in table), table


def implementing_lp(x, load, scen: Scenario, tol: float = LOAD_TOL,
                    cap: int = DEFAULT_VARIABLE_CAP) -> LpProblem:
    """Obedient rules under partition ``x`` whose expected edge loads match ``load``.

    Only feasibility matters; the planner objective is attached because it
    lets the solver start from a dual-feasible basis.
    """
    sc = scen.with_partition(x)
    net = sc.network
    S = net.num_states
    _check_cap(len(sc.grid()) ** sc.K * S, cap)
    table = profile_table(sc)
    P = table.num_profiles
    obed = obedience_matrix(sc, table)
    # expected load rows: sum_s p(s) sum_y sigma(y|s) l_e(y, x)
    L = np.hstack([net.prior[s] * table.loads.T for s in range(S)])
    load = np.asarray(load, dtype=float)
    A_ub = sp.vstack([obed, sp.csr_matrix(L), sp.csr_matrix(-L)], format="csr")
    b_ub = np.concatenate([np.zeros(obed.shape[0]), load + tol, -(load - tol)])
    A_eq = sp.kron(sp.identity(S, format="csr"), np.ones((1, P)), format="csr")
    c = np.concatenate([net.prior[s] * table.objective[s] for s in range(S)])
    return LpProblem(c, A_ub, b_ub, A_eq, np.ones(S))


def implements_edge_load(x, load, scen: Scenario, tol: float = LOAD_TOL) -> bool:
    return feasible(implementing_lp(x, load, scen, tol))


@dataclass
class Theorem2Cell:
    x: tuple[float, ...]
    in_ip: bool
    in_bpd: bool
    slack: float
    boundary: bool = False


@dataclass
class Theorem2Report:
    cells: list[Theorem2Cell]
    step: float

    @property
    def ip_set(self):
        return [c.x for c in self.cells if c.in_ip]

    @property
    def bpd_set(self):
        return [c.x for c in self.cells if c.in_bpd]

    @property
    def mismatches(self):
        return [c for c in self.cells if c.in_ip != c.in_bpd]

    @property
    def agree_exactly(self) -> bool:
        return not self.mismatches

    @property
    def boundary_only(self) -> bool:
        return all(c.boundary for c in self.mismatches)


def _neighbors(x, step):
    K = len(x)
    for a, b in itertools.permutations(range(K), 2):
        y = list(x)
        y[a] = round(y[a] + step, 12)
        y[b] = round(y[b] - step, 12)
        if y[b] >= step - 1e-12:
            yield tuple(y)


def verify_theorem2(scen: Scenario, K: int, load, step: float = 0.05) -> Theorem2Report:
    """Compare implementing partitions with BPD partitions on the ``step`` partition grid.

    A mismatch is ``boundary`` when some neighbouring cell (one step of mass
    moved between two groups) has the opposite BPD verdict.
    """
    cells = partition_grid(K, step)
    gcache: dict = {}
    bpd = {}
    for x in cells:
        ok, table = check_bpd(x, load, scen, gcache)
        bpd[x] = (ok, min((p.slack for p in table), default=np.inf))

    def ip(x):
        return implements_edge_load(x, load, scen)

    n_threads = threads()
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            in_ip = list(pool.map(ip, cells))
    else:
        in_ip = [ip(x) for x in cells]

    out = []
    for x, inside in zip(cells, in_ip):
        ok, slack = bpd[x]
        cell = Theorem2Cell(x, inside, ok, float(slack))
        if cell.in_ip != cell.in_bpd:
            cell.boundary = any(
                nb in bpd and bpd[nb][0] != ok for nb in _neighbors(x, step)
            )
        out.append(cell)
    return Theorem2Report(out, step)
