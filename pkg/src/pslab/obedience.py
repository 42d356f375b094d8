"""Obedience checks: nonatomic (PS-BCWE), atomic (PS-BCE) and complete-information CE."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .costs import atomic_deviation_costs, conditional_cost_vectors
from .mechanism import RecommendationRule, Scenario, ScenarioError, marginal_support, validate

DEFAULT_EPS = 1e-7


class InvalidRuleError(ValueError):
    pass


@dataclass
class Witness:
    group: int
    recommended: list[float]
    deviation: list[float]
    traveler: int | None = None
    state: int | None = None


@dataclass
class ObedienceReport:
    max_gain: float
    passed: bool
    eps: float
    worst: Witness | None = None
    checks: int = 0
    gains: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "max_gain": self.max_gain,
            "eps": self.eps,
            "checks": self.checks,
            "worst": asdict(self.worst) if self.worst else None,
        }


def _require_valid(rule, scen):
    rep = validate(rule, scen)
    if not rep.ok:
        raise InvalidRuleError("; ".join(rep.issues))


def best_deviation(k: int, rec: int, rule: RecommendationRule, scen: Scenario) -> tuple[int, float]:
    """Cheapest pure route for a group-``k`` traveler told ``rec``, and the gain from taking it.

    Ties go to the lowest route index.
    """
    from .costs import EmptyConditioningError

    table = conditional_cost_vectors(rule, scen, k)
    if rec not in table:
        raise EmptyConditioningError(f"group {k} never receives policy {rec}: empty conditioning event")
    b = table[rec]
    y = scen.grid().policies[rec]
    r_hat = int(np.argmin(b))
    return r_hat, float(y @ b - b[r_hat])


def verify_ps_bcwe(rule: RecommendationRule, scen: Scenario, eps: float = DEFAULT_EPS) -> ObedienceReport:
    _require_valid(rule, scen)
    grid = scen.grid()
    best = -np.inf
    worst = None
    gains = []
    for k in range(rule.K):
        for g, b in sorted(conditional_cost_vectors(rule, scen, k).items()):
            y = grid.policies[g]
            r_hat = int(np.argmin(b))
            gain = float(y @ b - b[r_hat])
            gains.append((k, g, r_hat, gain))
            if gain > best:
                best = gain
                dev = np.zeros(scen.network.num_routes)
                dev[r_hat] = 1.0
                worst = Witness(k, y.tolist(), dev.tolist())
    best = float(max(best, 0.0)) if gains else 0.0
    return ObedienceReport(best, best <= eps, eps, worst, len(gains), gains)


def _atomic_report(rule, scen, eps, per_state: bool) -> ObedienceReport:
    pub = scen.atomic
    grid = scen.grid()
    devs = grid.policies
    best, worst, checks = -np.inf, None, 0
    # travelers sharing group and weight face identical problems
    reps = {}
    for i in range(pub.n):
        reps.setdefault((pub.group_of[i], pub.weights[i]), i)
    rules = [(None, rule)]
    if per_state:
        rules = []
        for s in range(rule.num_states):
            atoms = tuple(a if t == s else () for t, a in enumerate(rule.atoms))
            rules.append((s, RecommendationRule(rule.grid_m, rule.K, atoms)))
    for s, sub in rules:
        if s is not None and scen.network.prior[s] == 0:
            continue
        for (k, _), i in sorted(reps.items()):
            for g in marginal_support(sub, k):
                costs = atomic_deviation_costs(sub, scen, i, g, devs)
                stay = atomic_deviation_costs(sub, scen, i, g, grid.policies[g][None, :])[0]
                d = int(np.argmin(costs))
                gain = float(stay - costs[d])
                if s is not None:
                    gain /= scen.network.prior[s]
                checks += 1
                if gain > best:
                    best = gain
                    worst = Witness(k, grid.policies[g].tolist(), devs[d].tolist(), traveler=i, state=s)
    best = float(max(best, 0.0)) if checks else 0.0
    return ObedienceReport(best, best <= eps, eps, worst, checks)


def verify_ps_bce_atomic(rule: RecommendationRule, scen: Scenario, eps: float = DEFAULT_EPS) -> ObedienceReport:
    """Atomic obedience: each traveler against every grid deviation (costs are not linear in it)."""
    if scen.atomic is None:
        raise ScenarioError("scenario is not atomic")
    _require_valid(rule, scen)
    return _atomic_report(rule, scen, eps, per_state=False)


def verify_complete_info_ce(rule: RecommendationRule, scen: Scenario, eps: float = DEFAULT_EPS) -> ObedienceReport:
    """Correlated-equilibrium check state by state: no averaging over the prior.

    Each state's atoms are checked as if that state were known; costs are the
    atomic ones, weighted by the state's prior mass.
    """
    if scen.atomic is None:
        raise ScenarioError("scenario is not atomic")
    _require_valid(rule, scen)
    return _atomic_report(rule, scen, eps, per_state=True)
