"""Cost losses along recommendation switches, their accumulated infimum (ACL) and the
path-based obedience characterization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import EmptyConditioningError, conditional_cost_vectors
from .mechanism import RecommendationRule, Scenario, marginal_support
from .obedience import DEFAULT_EPS, verify_ps_bcwe
from .policy import PolicyError, check_policy

DEFAULT_MAX_T = 33
TAU_ACL = 1e-5
# nested breakpoint grids used for refinement studies
REFINEMENT_T = (2, 5, 9, 17, 33)


def intermediate(z, y, delta: float) -> np.ndarray:
    """Point ``z + delta (y - z)`` on the segment between two policies."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if delta == 0.0:
        return z.copy()
    if delta == 1.0:
        return y.copy()
    return z + delta * (y - z)


def _as_index(v, scen: Scenario) -> int:
    if isinstance(v, (int, np.integer)):
        return int(v)
    return scen.grid().index_of(check_policy(v, scen.network.num_routes))


class _Losses:
    """Cached conditional cost vectors for one group."""

    def __init__(self, rule: RecommendationRule, scen: Scenario, k: int):
        self.k = k
        self.scen = scen
        self.grid = scen.grid()
        self.B = conditional_cost_vectors(rule, scen, k)

    def ec(self, dev: int, rec: int) -> float:
        if rec not in self.B:
            raise EmptyConditioningError(
                f"group {self.k} never receives policy {rec}: empty conditioning event")
        return float(self.grid.policies[dev] @ self.B[rec])

    def loss(self, z: int, y: int) -> float:
        # traveler playing z: cost when told z minus cost when told y
        return self.ec(z, z) - self.ec(z, y)

    def acl(self, z: int, y: int, max_T: int) -> float:
        if z == y:
            return 0.0
        if max_T < 2:
            raise ValueError("paths need at least two breakpoints")
        pz = self.grid.counts[z].astype(float)
        py = self.grid.counts[y].astype(float)
        nodes = [z]
        for t in range(1, max_T - 1):
            d = t / (max_T - 1)
            try:
                g = self.grid.index_of(((pz + d * (py - pz)) / self.grid.m))
            except PolicyError:
                continue
            if g in self.B and g != nodes[-1]:
                nodes.append(g)
        nodes.append(y)
        dist = [0.0] + [np.inf] * (len(nodes) - 1)
        for b in range(1, len(nodes)):
            dist[b] = min(dist[a] + self.loss(nodes[a], nodes[b]) for a in range(b))
        return float(dist[-1])


def loss_L(z, y, k: int, rule: RecommendationRule, scen: Scenario) -> float:
    """Change in a group-``k`` traveler's expected cost under policy ``z`` when the
    recommendation moves from ``y`` to ``z``."""
    return _Losses(rule, scen, k).loss(_as_index(z, scen), _as_index(y, scen))


def acl_value(z, y, k: int, rule: RecommendationRule, scen: Scenario,
              max_T: int = DEFAULT_MAX_T) -> float:
    """Least accumulated loss over monotone paths from ``z`` to ``y``.

    Breakpoints come from the uniform grid of ``max_T`` points on [0, 1]; interior
    points that are not support atoms of group ``k`` are skipped. The shortest
    path over the resulting DAG is exact for that grid.
    """
    return _Losses(rule, scen, k).acl(_as_index(z, scen), _as_index(y, scen), max_T)


@dataclass
class PairCheck:
    group: int
    z: int
    y: int
    acl_zy: float
    acl_yz: float
    target: float  # EC(y) - EC(z)

    @property
    def cycle(self) -> float:
        return self.acl_zy + self.acl_yz

    @property
    def residual(self) -> float:
        return abs(self.acl_zy - self.target)


@dataclass
class Prop1Report:
    condition_i_pass: bool
    condition_ii_max_residual: float
    passed: bool
    direct_pass: bool
    max_T: int
    tau: float
    pairs: list[PairCheck] = field(default_factory=list, repr=False)

    @property
    def agrees_with_direct(self) -> bool:
        return self.passed == self.direct_pass

    def worst_pairs(self, n: int = 5) -> list[PairCheck]:
        return sorted(self.pairs, key=lambda p: (-p.residual, p.group, p.z, p.y))[:n]

    def to_dict(self, grid=None) -> dict:
        def pol(g):
            return grid.policies[g].tolist() if grid is not None else g

        return {
            "condition_i_pass": self.condition_i_pass,
            "condition_ii_max_residual": self.condition_ii_max_residual,
            "pass": self.passed,
            "direct_pass": self.direct_pass,
            "agrees_with_direct": self.agrees_with_direct,
            "max_T": self.max_T,
            "tau": self.tau,
            "pairs_checked": len(self.pairs),
            "worst_pairs": [
                {"group": p.group, "z": pol(p.z), "y": pol(p.y), "acl_zy": p.acl_zy,
                 "acl_yz": p.acl_yz, "target": p.target, "residual": p.residual}
                for p in self.worst_pairs()
            ],
        }


def check_proposition1(rule: RecommendationRule, scen: Scenario, max_T: int = DEFAULT_MAX_T,
                       tau: float = TAU_ACL, eps: float = DEFAULT_EPS) -> Prop1Report:
    """Evaluate the two path conditions over ordered pairs of support atoms and
    compare the verdict with the direct obedience check."""
    pairs = []
    cond_i = True
    worst = 0.0
    for k in range(rule.K):
        L = _Losses(rule, scen, k)
        supp = marginal_support(rule, k)
        for z in supp:
            for y in supp:
                if z == y:
                    continue
                a_zy = L.acl(z, y, max_T)
                a_yz = L.acl(y, z, max_T)
                pc = PairCheck(k, z, y, a_zy, a_yz, L.ec(y, y) - L.ec(z, z))
                pairs.append(pc)
                cond_i &= pc.cycle >= -tau
                worst = max(worst, pc.residual)
    passed = cond_i and worst <= tau
    direct = verify_ps_bcwe(rule, scen, eps).passed
    return Prop1Report(cond_i, worst, passed, direct, max_T, tau, pairs)
