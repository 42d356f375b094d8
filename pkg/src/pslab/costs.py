"""Expected travel costs under a recommendation rule, and the planner objective.

Expected costs are *unnormalized*: they are sums over the atoms on which the
traveler's group receives the given recommendation, weighted by prior times
rule mass, without dividing by the probability of that recommendation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mechanism import RecommendationRule, Scenario, ScenarioError, marginal_support
from .model import objective_fn
from .policy import PolicyGrid, check_policy

DEFAULT_PROFILE_CAP = 2 * 10**6


class EmptyConditioningError(ValueError):
    """The recommendation has zero probability, so the conditional cost is vacuous."""


class ProfileCapError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileTable:
    """Every K-tuple of grid policies with its induced flows, costs and objective.

    Profiles are ordered lexicographically by grid index, group 0 most significant.
    """

    grid: PolicyGrid
    profiles: np.ndarray  # (P, K) grid indices
    flows: np.ndarray  # (P, R)
    loads: np.ndarray  # (P, E)
    route_costs: np.ndarray  # (S, P, R)
    objective: np.ndarray  # (S, P)

    @property
    def num_profiles(self) -> int:
        return self.profiles.shape[0]

    def index(self, profile) -> int:
        n = len(self.grid)
        idx = 0
        for g in profile:
            idx = idx * n + int(g)
        return idx


def _profiles(num_policies: int, K: int) -> np.ndarray:
    grids = np.indices((num_policies,) * K).reshape(K, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def profile_table(scen: Scenario, cap: int = DEFAULT_PROFILE_CAP) -> ProfileTable:
    return _profile_table(scen, cap)


@lru_cache(maxsize=32)
def _profile_table(scen: Scenario, cap: int) -> ProfileTable:
    grid = scen.grid()
    count = len(grid) ** scen.K
    if count > cap:
        raise ProfileCapError(
            f"{len(grid)}^{scen.K} = {count} recommendation profiles exceeds cap {cap}; "
            "reduce grid_m or K"
        )
    net = scen.network
    prof = _profiles(len(grid), scen.K)
    flows = np.zeros((count, net.num_routes))
    for k, x_k in enumerate(scen.x):
        flows += (x_k * scen.demand) * grid.policies[prof[:, k]]
    loads = flows @ net.incidence.T
    rc = np.stack([scen.costs.edge_costs(loads, s) @ net.incidence for s in range(net.num_states)])
    obj_fn = objective_fn(scen.objective)
    obj = np.stack([obj_fn(flows, s, net, scen.costs) for s in range(net.num_states)])
    for arr in (prof, flows, loads, rc, obj):
        arr.setflags(write=False)
    return ProfileTable(grid, prof, flows, loads, rc, obj)


def atom_flow(profile, scen: Scenario) -> np.ndarray:
    """Nonatomic route flow of one recommendation profile (grid indices)."""
    pol = scen.grid().policies
    flow = np.zeros(scen.network.num_routes)
    # same accumulation order as profile_table, so both agree bit for bit
    for k, x_k in enumerate(scen.x):
        flow += (x_k * scen.demand) * pol[profile[k]]
    return flow


def atom_route_costs(profile, s: int, scen: Scenario) -> np.ndarray:
    net = scen.network
    loads = atom_flow(profile, scen) @ net.incidence.T
    return scen.costs.edge_costs(loads, s) @ net.incidence


def conditional_cost_vectors(rule: RecommendationRule, scen: Scenario, k: int) -> dict[int, np.ndarray]:
    """For each grid policy ``g`` group ``k`` may receive, the unnormalized route-cost vector

        B_g[r] = sum_s p(s) sum_{atoms with y^k = g} sigma(y|s) C_r(l(y, x), s).

    Nonatomic expected cost of deviating to ``y_hat`` is then ``y_hat @ B_g``.
    """
    if not 0 <= k < rule.K:
        raise ScenarioError(f"invalid group index {k}")
    prior = scen.network.prior
    out: dict[int, np.ndarray] = {}
    for s, prof, w in rule.iter_atoms():
        if w <= 0:
            continue
        g = prof[k]
        vec = prior[s] * w * atom_route_costs(prof, s, scen)
        out[g] = out[g] + vec if g in out else vec
    return out


def _support_check(rule, k, g):
    if g not in marginal_support(rule, k):
        raise EmptyConditioningError(
            f"group {k} never receives policy {g}: empty conditioning event"
        )


def expected_cost_nonatomic(rule: RecommendationRule, scen: Scenario, k: int, rec: int, dev) -> float:
    """Expected cost of a group-``k`` traveler told grid policy ``rec`` who plays ``dev``.

    The deviator has measure zero, so loads are those of the recommended profile.
    """
    _support_check(rule, k, rec)
    dev = check_policy(dev, scen.network.num_routes)
    return float(dev @ conditional_cost_vectors(rule, scen, k)[rec])


def atomic_deviation_costs(rule: RecommendationRule, scen: Scenario, i: int, rec: int,
                           devs: np.ndarray) -> np.ndarray:
    """Atomic expected costs of traveler ``i`` for each row of ``devs``.

    The deviant's own weight is moved onto ``dev``, so loads change with the deviation.
    """
    pub = scen.atomic
    if pub is None:
        raise ScenarioError("scenario is not atomic")
    if not 0 <= i < pub.n:
        raise ScenarioError(f"unknown traveler {i}")
    k = pub.group_of[i]
    _support_check(rule, k, rec)
    net = scen.network
    grid = scen.grid()
    devs = np.atleast_2d(np.asarray(devs, dtype=float))
    w_i = pub.weights[i]
    gw = pub.group_weights()
    shift = w_i * (devs - grid.policies[rec])
    out = np.zeros(devs.shape[0])
    for s, prof, w in rule.iter_atoms():
        if w <= 0 or prof[k] != rec:
            continue
        base = gw @ grid.policies[list(prof)]
        loads = (base + shift) @ net.incidence.T
        rc = scen.costs.edge_costs(loads, s) @ net.incidence
        out += net.prior[s] * w * w_i * np.sum(devs * rc, axis=1)
    return out


def expected_cost_atomic(rule: RecommendationRule, scen: Scenario, i: int, rec: int, dev) -> float:
    dev = check_policy(dev, scen.network.num_routes)
    return float(atomic_deviation_costs(rule, scen, i, rec, dev[None, :])[0])


def planner_value(rule: RecommendationRule, scen: Scenario) -> float:
    """Expected planner objective over states and recommendation profiles."""
    obj = objective_fn(scen.objective)
    net = scen.network
    total = 0.0
    for s, prof, w in rule.iter_atoms():
        if w == 0:
            continue
        total += net.prior[s] * w * float(obj(atom_flow(prof, scen), s, net, scen.costs))
    return total


def marginal_mass(rule: RecommendationRule, scen: Scenario, k: int, rec: int) -> float:
    """Prior probability that group ``k`` is told ``rec``."""
    return float(sum(scen.network.prior[s] * w for s, prof, w in rule.iter_atoms() if prof[k] == rec))
