"""The planner's optimal-mechanism LP, its baselines, and related reductions."""
from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .costs import ProfileTable, profile_table
from .lp import LpError, LpProblem, LpSolution, solve_lp
from .mechanism import RecommendationRule, Scenario, ScenarioError
from .model import objective_fn

DEFAULT_VARIABLE_CAP = 1_000_000
WEIGHT_FLOOR = 1e-13
WARDROP_EPS = 1e-7


class PlannerCapError(ValueError):
    pass


class PlannerInfeasible(LpError):
    pass


def threads() -> int:
    try:
        return max(1, int(os.environ.get("PSLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class PlannerLp:
    problem: LpProblem
    table: ProfileTable
    num_states: int

    def var(self, s: int, p: int) -> int:
        return s * self.table.num_profiles + p

    def obedience_row(self, k: int, g: int, r_hat: int) -> int:
        R = self.table.flows.shape[1]
        return (k * len(self.table.grid) + g) * R + r_hat


def _check_cap(num_vars: int, cap: int) -> None:
    if num_vars > cap:
        raise PlannerCapError(
            f"planner LP would have {num_vars} variables (|grid|^K * |S|), cap is {cap}"
        )


def obedience_matrix(scen: Scenario, table: ProfileTable | None = None) -> sp.csr_matrix:
    """Obedience rows ``(k, g, r_hat)`` over variables ``(s, profile)``.

    Row value <= 0 means a group-k traveler told ``g`` does not gain by switching
    to pure route ``r_hat``; pure deviations suffice because the nonatomic
    expected cost is linear in the deviation.
    """
    table = table or profile_table(scen)
    net = scen.network
    S, P, R = net.num_states, table.num_profiles, net.num_routes
    G = len(table.grid)
    rows, cols, data = [], [], []
    base_cols = np.arange(P)
    for k in range(scen.K):
        rec = table.grid.policies[table.profiles[:, k]]  # (P, R)
        base_rows = (k * G + table.profiles[:, k]) * R
        for s in range(S):
            rc = table.route_costs[s]
            follow = np.sum(rec * rc, axis=1)
            for r_hat in range(R):
                rows.append(base_rows + r_hat)
                cols.append(s * P + base_cols)
                data.append(net.prior[s] * (follow - rc[:, r_hat]))
    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(scen.K * G * R, S * P),
    ).tocsr()
    A.eliminate_zeros()
    return A


def build_planner_lp(scen: Scenario, cap: int = DEFAULT_VARIABLE_CAP) -> PlannerLp:
    if scen.is_atomic:
        raise ScenarioError("build_planner_lp needs a nonatomic scenario")
    net = scen.network
    G = len(scen.grid())
    S = net.num_states
    _check_cap(G**scen.K * S, cap)
    table = profile_table(scen)
    P = table.num_profiles
    c = (net.prior[:, None] * table.objective).ravel()
    A_eq = sp.kron(sp.identity(S, format="csr"), np.ones((1, P)), format="csr")
    A_ub = obedience_matrix(scen, table)
    prob = LpProblem(c, A_ub, np.zeros(A_ub.shape[0]), A_eq, np.ones(S))
    return PlannerLp(prob, table, S)


@dataclass
class MechanismSolution:
    rule: RecommendationRule
    value: float
    lp: LpSolution
    planner_lp: PlannerLp


def rule_from_lp(plp: PlannerLp, x: np.ndarray, grid_m: int) -> RecommendationRule:
    """Clean an LP primal into a rule: clip round-off negatives, drop dust, renormalize."""
    w = np.asarray(x).reshape(plp.num_states, plp.table.num_profiles).copy()
    w[w < WEIGHT_FLOOR] = 0.0
    w /= w.sum(axis=1, keepdims=True)
    return RecommendationRule.from_weights(w, plp.table.profiles, grid_m)


def solve_optimal_mechanism(scen: Scenario, method: str = "auto",
                            cap: int = DEFAULT_VARIABLE_CAP) -> MechanismSolution:
    plp = build_planner_lp(scen, cap)
    sol = solve_lp(plp.problem, method=method)
    if sol.status == "infeasible":
        raise PlannerInfeasible(
            f"no obedient rule on the 1/{scen.grid_m} grid for K={scen.K}, "
            f"x={tuple(float(v) for v in scen.x)}"
        )
    if sol.status != "optimal":
        raise LpError(f"planner LP is {sol.status}")
    return MechanismSolution(rule_from_lp(plp, sol.x, scen.grid_m), sol.value, sol, plp)


# ------------------------------------------------------------------ baselines


def baseline_full_information(scen: Scenario) -> float:
    """Per-state minimum of the objective over grid-induced flows, averaged by the prior."""
    table = profile_table(scen)
    return float(scen.network.prior @ table.objective.min(axis=1))


@dataclass
class NoInfoBaseline:
    flow: np.ndarray
    grid_index: int
    value: float
    violation: float


def baseline_no_information(scen: Scenario, eps: float = WARDROP_EPS) -> NoInfoBaseline:
    """Wardrop flow on the grid under prior-averaged costs.

    Among grid flows whose used routes are within ``eps`` of the cheapest
    prior-averaged route cost, the lexicographically smallest flow is chosen;
    if none qualifies, the flow with the smallest violation is returned.
    """
    net = scen.network
    grid = scen.grid()
    flows = scen.demand * grid.policies
    loads = flows @ net.incidence.T
    avg = sum(net.prior[s] * (scen.costs.edge_costs(loads, s) @ net.incidence) for s in range(net.num_states))
    used = flows > 0
    worst_used = np.where(used, avg, -np.inf).max(axis=1)
    violation = worst_used - avg.min(axis=1)
    ok = np.flatnonzero(violation <= eps)
    if ok.size:
        # grid order is descending-lexicographic, so the last qualifying row is smallest
        idx = int(ok[-1])
    else:
        idx = int(np.argmin(violation))
    obj = objective_fn(scen.objective)
    value = float(sum(net.prior[s] * obj(flows[idx], s, net, scen.costs) for s in range(net.num_states)))
    return NoInfoBaseline(flows[idx].copy(), idx, value, float(max(violation[idx], 0.0)))


def no_information_rule(scen: Scenario) -> RecommendationRule:
    """State-independent point mass recommending the no-information Wardrop split to every group."""
    g = baseline_no_information(scen).grid_index
    return RecommendationRule.point_mass((g,) * scen.K, scen.network.num_states, scen.grid_m)


# --------------------------------------------------------------------- MP-BCWE


def build_mp_bcwe_lp(scen: Scenario, cap: int = DEFAULT_VARIABLE_CAP) -> LpProblem:
    """LP over multi-population rules with fixed population demands ``x^k D``.

    Population k is recommended an absolute route-flow vector on the
    ``x^k D``-scaled grid; obedience is conditioned on that vector, with the
    per-traveler policy being the vector divided by the population demand.
    """
    net = scen.network
    grid = scen.grid()
    G, S, R, K = len(grid), net.num_states, net.num_routes, scen.K
    _check_cap(G**K * S, cap)
    gamma = scen.x * scen.demand
    pops = [gamma[k] * grid.policies for k in range(K)]  # absolute flows per population
    idx = np.array(list(itertools.product(range(G), repeat=K)), dtype=np.int64).reshape(-1, K)
    P = idx.shape[0]
    flows = np.zeros((P, R))
    for k in range(K):
        flows += pops[k][idx[:, k]]
    loads = flows @ net.incidence.T
    obj = objective_fn(scen.objective)
    c = np.concatenate([net.prior[s] * obj(flows, s, net, scen.costs) for s in range(S)])
    rows, cols, data = [], [], []
    for s in range(S):
        rc = scen.costs.edge_costs(loads, s) @ net.incidence
        for k in range(K):
            share = pops[k][idx[:, k]] / gamma[k]
            stay = np.einsum("pr,pr->p", share, rc)
            for r_hat in range(R):
                rows.append((k * G + idx[:, k]) * R + r_hat)
                cols.append(s * P + np.arange(P))
                data.append(net.prior[s] * (stay - rc[:, r_hat]))
    A_ub = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(K * G * R, S * P),
    )
    A_ub.eliminate_zeros()
    A_eq = sp.kron(sp.identity(S, format="csr"), np.ones((1, P)), format="csr")
    return LpProblem(c, A_ub, np.zeros(A_ub.shape[0]), A_eq, np.ones(S))


def mp_bcwe_value(scen: Scenario, method: str = "auto", cap: int = DEFAULT_VARIABLE_CAP) -> float:
    sol = solve_lp(build_mp_bcwe_lp(scen, cap), method=method)
    if not sol.optimal:
        raise PlannerInfeasible(f"MP-BCWE LP is {sol.status}")
    return sol.value


# ------------------------------------------------------------ partition sweep


def partition_grid(K: int, step: float) -> list[tuple[float, ...]]:
    """Partitions with every factor a positive multiple of ``step``, ascending lexicographic."""
    units = round(1.0 / step)
    if abs(units * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1")
    if K > units:
        return []

    def comps(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(1, total - parts + 2):
            for rest in comps(total - first, parts - 1):
                yield (first,) + rest

    return [tuple(c / units for c in comp) for comp in comps(units, K)]


@dataclass
class SweepRow:
    x: tuple[float, ...]
    value: float | None
    status: str
    solve_ms: float


def _sweep_cell(scen: Scenario, x, method: str) -> SweepRow:
    t0 = time.perf_counter()
    try:
        value = solve_optimal_mechanism(scen.with_partition(x), method=method).value
        status = "optimal"
    except PlannerInfeasible:
        value, status = None, "infeasible"
    except PlannerCapError:
        value, status = None, "cap"
    return SweepRow(tuple(x), value, status, (time.perf_counter() - t0) * 1e3)


def sweep_partitions(scen: Scenario, K: int, step: float = 0.05,
                     method: str = "auto") -> tuple[list[SweepRow], SweepRow | None]:
    """Optimal value for each partition on the ``step`` grid; returns (rows, argmin row)."""
    cells = partition_grid(K, step) if K > 1 else [(1.0,)]
    if threads() > 1 and len(cells) > 1:
        with ThreadPoolExecutor(threads()) as pool:
            rows = list(pool.map(lambda x: _sweep_cell(scen, x, method), cells))
    else:
        rows = [_sweep_cell(scen, x, method) for x in cells]
    rows.sort(key=lambda r: r.x)
    solved = [r for r in rows if r.value is not None]
    best = min(solved, key=lambda r: (r.value, r.x)) if solved else None
    return rows, best


def lift_rule(rule: RecommendationRule, k: int) -> RecommendationRule:
    """Split group ``k`` in two: a new last group receives exactly what group ``k`` receives."""
    if not 0 <= k < rule.K:
        raise ScenarioError(f"invalid group index {k}")
    atoms = tuple(
        tuple((prof + (prof[k],), w) for prof, w in state_atoms) for state_atoms in rule.atoms
    )
    return RecommendationRule(rule.grid_m, rule.K + 1, atoms)


def split_partition(x, k: int, frac: float) -> tuple[float, ...]:
    """Partition matching ``lift_rule``: group k keeps ``frac`` of its share."""
    x = list(x)
    moved = x[k] * (1 - frac)
    x[k] -= moved
    return tuple(x) + (moved,)


# ------------------------------------------------------------ reductions


def bcwe_obedience_matrix(scen: Scenario) -> np.ndarray:
    """Mixed-strategy BCWE obedience rows for a single public recommendation.

    Written directly from the single-group expected cost: loads are
    ``D * incidence @ y`` and the group's own policy is the whole profile.
    Rows are ``(y, r_hat)``; columns ``(s, y)``.
    """
    net = scen.network
    grid = scen.grid()
    G, S, R = len(grid), net.num_states, net.num_routes
    out = np.zeros((G * R, S * G))
    for s in range(S):
        for gi in range(G):
            y = grid.policies[gi]
            rc = scen.costs.edge_costs((scen.demand * y) @ net.incidence.T, s) @ net.incidence
            # elementwise sum, not a dot product, so rounding matches the profile table
            follow = np.sum(y * rc)
            for r_hat in range(R):
                out[gi * R + r_hat, s * G + gi] = net.prior[s] * (follow - rc[r_hat])
    return out


def build_atomic_planner_lp(scen: Scenario, cap: int = DEFAULT_VARIABLE_CAP) -> LpProblem:
    """Planner LP for a finite population.

    One obedience row per traveler ``i``, recommended grid policy ``g`` and
    deviation ``y_hat`` on the grid; the deviant's weight moves with it, so
    the expected cost is not linear in ``y_hat`` and every grid deviation is kept.
    """
    pub = scen.atomic
    if pub is None:
        raise ScenarioError("scenario is not atomic")
    net = scen.network
    grid = scen.grid()
    G, S, R, K = len(grid), net.num_states, net.num_routes, pub.K
    _check_cap(G**K * S, cap)
    prof = np.indices((G,) * K).reshape(K, -1).T
    P = prof.shape[0]
    gw = pub.group_weights()
    base = np.zeros((P, R))
    for k in range(K):
        base += gw[k] * grid.policies[prof[:, k]]
    obj = objective_fn(scen.objective)
    c = np.concatenate([net.prior[s] * obj(base, s, net, scen.costs) for s in range(S)])
    A_ub = np.zeros((pub.n * G * G, S * P))
    for i in range(pub.n):
        k, w_i = pub.group_of[i], pub.weights[i]
        rec = grid.policies[prof[:, k]]
        for s in range(S):
            own = None
            for d in range(G):
                dev = grid.policies[d]
                flows = base + w_i * (dev - rec)
                rc = scen.costs.edge_costs(flows @ net.incidence.T, s) @ net.incidence
                cost_dev = w_i * (rc @ dev)
                if own is None:
                    rc0 = scen.costs.edge_costs(base @ net.incidence.T, s) @ net.incidence
                    own = w_i * np.sum(rec * rc0, axis=1)
                rows = (i * G + prof[:, k]) * G + d
                A_ub[rows, s * P + np.arange(P)] = net.prior[s] * (own - cost_dev)
    A_eq = np.kron(np.eye(S), np.ones((1, P)))
    return LpProblem(c, A_ub, np.zeros(A_ub.shape[0]), A_eq, np.ones(S))


def bce_obedience_matrix(scen: Scenario) -> np.ndarray:
    """Bayes correlated equilibrium swap constraints by direct enumeration.

    Every traveler is its own group and is recommended a pure route. Row
    ``(i, r_i, r_hat)``, column ``(s, r_1..r_n)``; entries are
    ``p(s) * w_i * (C_{r_i}(l(r)) - C_{r_hat}(l(r_hat, r_-i)))``.
    """
    pub = scen.atomic
    net = scen.network
    n, R, S = pub.n, net.num_routes, net.num_states
    if scen.K != n:
        raise ScenarioError("BCE reduction needs one traveler per group")
    tuples = list(itertools.product(range(R), repeat=n))
    out = np.zeros((n * R * R, S * len(tuples)))

    def cost_on(route, choice, s):
        loads = np.zeros(net.num_edges)
        for j, r in enumerate(choice):
            for e in net.routes[r]:
                loads[e] += pub.weights[j]
        ec = scen.costs.edge_costs(loads, s)
        return sum(ec[e] for e in net.routes[route])

    for s in range(S):
        for col, choice in enumerate(tuples):
            for i in range(n):
                r_i = choice[i]
                stay = cost_on(r_i, choice, s)
                for r_hat in range(R):
                    moved = choice[:i] + (r_hat,) + choice[i + 1:]
                    val = pub.weights[i] * (stay - cost_on(r_hat, moved, s))
                    out[(i * R + r_i) * R + r_hat, s * len(tuples) + col] = net.prior[s] * val
    return out
