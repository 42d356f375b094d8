import warnings

import numpy as np
import pytest

from pslab import corpus
from pslab.mechanism import RecommendationRule, scenario_from_dict
from pslab.model import CostRegularityWarning


def make_scenario(edges, routes, states, prior, costs, demand=1.0, grid_m=10, **extra):
    """Scenario from compact arguments; ``costs`` maps edge -> list of per-state coefficients."""
    data = {
        "edges": list(edges),
        "routes": [list(r) for r in routes],
        "states": list(states),
        "prior": list(prior),
        "demand": demand,
        "costs": {e: dict(zip(states, costs[e])) for e in edges},
        "grid_m": grid_m,
    }
    data.update(extra)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CostRegularityWarning)
        return scenario_from_dict(data)


def pigou_state2(grid_m=2, slope=2.0, **extra):
    """Pigou net with a single state: e1 costs 1, e2 costs ``slope * l``."""
    return make_scenario(["e1", "e2"], [[0], [1]], ["s2"], [1.0],
                         {"e1": [[1.0]], "e2": [[0.0, slope]]}, grid_m=grid_m, **extra)


def rule_of(grid_m, K, per_state):
    """Rule from ``[[(profile, weight), ...] per state]``."""
    return RecommendationRule(grid_m, K, tuple(tuple((tuple(p), w) for p, w in atoms)
                                               for atoms in per_state))


@pytest.fixture
def pigou():
    return corpus.scenario("pigou2")


@pytest.fixture
def diamond():
    return corpus.scenario("diamond4")


@pytest.fixture
def constant():
    return corpus.scenario("constant")


@pytest.fixture
def full_revelation(pigou):
    return corpus.rule("pigou2_full_revelation", pigou)


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
