"""Finite weighted populations: sampling realizations, exact obedience gaps, and
the gap-versus-population-size study."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .mechanism import RecommendationRule, Scenario, ScenarioError, marginal_support
from .obedience import DEFAULT_EPS, InvalidRuleError, verify_ps_bce_atomic, verify_ps_bcwe
from .planner import threads
from .policy import AtomicPublicness, PolicyError

# (support atoms) x (distinct travelers) x (grid deviations) evaluated per gap
DEFAULT_GAP_CAP = 5_000_000


class GapCapError(ValueError):
    pass


class AdmissibleNError(ValueError):
    pass


# ---------------------------------------------------------------- sampling


def _atom_tables(rule: RecommendationRule):
    tables = []
    for atoms in rule.atoms:
        profs = [p for p, _ in atoms]
        w = np.array([w for _, w in atoms], dtype=float)
        tables.append((profs, np.cumsum(w) / w.sum() if w.size else w))
    return tables


def sample_realizations(rule: RecommendationRule, scen: Scenario, seed: int, count: int):
    """``count`` draws of (state, recommendation profile).

    Each draw consumes two doubles from a Philox stream keyed by ``seed``:
    the first picks the state by inverse CDF of the prior, the second picks
    the atom by inverse CDF of that state's weights (in stored atom order).
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    u = gen.random((count, 2))
    prior_cdf = np.cumsum(scen.network.prior)
    prior_cdf /= prior_cdf[-1]
    tables = _atom_tables(rule)
    states = np.minimum(np.searchsorted(prior_cdf, u[:, 0], side="right"), len(prior_cdf) - 1)
    out = []
    for s, v in zip(states, u[:, 1]):
        profs, cdf = tables[s]
        j = min(int(np.searchsorted(cdf, v, side="right")), len(profs) - 1)
        out.append((int(s), tuple(profs[j])))
    return out


def sample_realization(rule: RecommendationRule, scen: Scenario, seed: int):
    """First draw of the stream for ``seed``: (state, recommendation profile)."""
    return sample_realizations(rule, scen, seed, 1)[0]


# ---------------------------------------------------------------- exact gaps


@dataclass
class GapResult:
    max_gap: float
    traveler: int | None
    group: int | None
    recommended: list | None
    deviation: list | None

    @property
    def witness_route(self) -> int | None:
        """Route receiving the most extra mass under the witness deviation."""
        if self.deviation is None:
            return None
        return int(np.argmax(np.asarray(self.deviation) - np.asarray(self.recommended)))


def _work(rule: RecommendationRule, scen: Scenario) -> int:
    pub = scen.atomic
    distinct = len({(pub.group_of[i], pub.weights[i]) for i in range(pub.n)})
    supp = max(len(marginal_support(rule, k)) for k in range(rule.K))
    return sum(len(a) for a in rule.atoms) * distinct * supp * len(scen.grid())


def atomic_obedience_gap(rule: RecommendationRule, scen: Scenario,
                         cap: int = DEFAULT_GAP_CAP) -> GapResult:
    """Largest expected-cost saving any traveler gets from a grid deviation.

    Exact enumeration over support atoms, distinct travelers and grid policies.
    """
    if scen.atomic is None:
        raise ScenarioError("scenario is not atomic")
    work = _work(rule, scen)
    if work > cap:
        raise GapCapError(
            f"gap evaluation needs about {work} cost evaluations (cap {cap}); reduce m or K")
    rep = verify_ps_bce_atomic(rule, scen, eps=np.inf)
    w = rep.worst
    if w is None:
        return GapResult(rep.max_gain, None, None, None, None)
    return GapResult(rep.max_gain, w.traveler, w.group, w.recommended, w.deviation)


# ---------------------------------------------------------------- convergence


@dataclass
class ConvergenceRow:
    n: int
    max_gap: float
    witness_traveler: int | None
    witness_route: int | None
    eval_ms: float | None = None


def admissible_n(x, upto: int) -> list[int]:
    """Population sizes in 1..upto that split into groups of sizes ``x * n``."""
    out = []
    for n in range(1, upto + 1):
        sizes = [x_k * n for x_k in x]
        if all(abs(s - round(s)) <= 1e-9 and round(s) >= 1 for s in sizes):
            out.append(n)
    return out


def equal_weight_scenario(scen: Scenario, n: int) -> Scenario:
    """Atomic copy of ``scen`` with ``n`` travelers of weight D/n, split by its partition."""
    x = tuple(float(v) for v in scen.x)
    try:
        pub = AtomicPublicness.equal_weights(x, n, scen.demand)
    except PolicyError:
        adm = admissible_n(x, max(64, 4 * n))
        raise AdmissibleNError(
            f"n={n} is incompatible with partition {x}; admissible n up to {adm[-1] if adm else 0}: "
            f"{adm[:20]}{' ...' if len(adm) > 20 else ''}") from None
    return scen.with_atomic(pub)


def convergence_experiment(rule: RecommendationRule, scen: Scenario, n_list,
                           eps: float = DEFAULT_EPS, timing: bool = False,
                           cap: int = DEFAULT_GAP_CAP) -> list[ConvergenceRow]:
    """Atomic gap of ``rule`` for equal-weight populations of each size in ``n_list``.

    The rule must be obedient for the nonatomic scenario first.
    """
    rep = verify_ps_bcwe(rule, scen, eps)
    if not rep.passed:
        raise InvalidRuleError(
            f"rule is not obedient for the nonatomic scenario (max gain {rep.max_gain:.3g})")
    scens = [equal_weight_scenario(scen, int(n)) for n in n_list]

    def row(pair):
        n, sc = pair
        t0 = time.perf_counter()
        g = atomic_obedience_gap(rule, sc, cap)
        ms = (time.perf_counter() - t0) * 1e3 if timing else None
        return ConvergenceRow(int(n), g.max_gap, g.traveler, g.witness_route, ms)

    n_threads = threads()
    pairs = list(zip(n_list, scens))
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            return list(pool.map(row, pairs))
    return [row(p) for p in pairs]


@dataclass
class LogLogFit:
    slope: float
    intercept: float
    r2: float


def loglog_fit(ns, gaps) -> LogLogFit:
    """Least-squares line through (log n, log gap); gaps must be positive."""
    gaps = np.asarray(gaps, dtype=float)
    if not np.all(gaps > 0):
        raise ValueError("log-log fit needs positive gaps")
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(gaps)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return LogLogFit(float(slope), float(intercept), r2)
