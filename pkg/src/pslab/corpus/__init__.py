"""Bundled scenarios: ``pigou2``, ``diamond4``, ``constant``; plus ``pigou2_full_revelation`` rule."""
from __future__ import annotations

from importlib import resources

from ..mechanism import RecommendationRule, Scenario, load_rule, load_scenario

SCENARIOS = ("pigou2", "diamond4", "constant")


def path(name: str):
    return resources.files(__name__) / f"{name}.json"


def scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        raise KeyError(f"unknown corpus scenario {name!r}; have {SCENARIOS}")
    return load_scenario(path(name))


def rule(name: str, scen: Scenario) -> RecommendationRule:
    return load_rule(path(name), scen.network.states)
