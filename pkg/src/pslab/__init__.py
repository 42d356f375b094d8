"""pslab: optimal publicness-specific recommendation mechanisms for routing games.

Scenarios pair a single-origin network with state-dependent polynomial costs
and a partition of travelers into groups; each group receives one shared
recommendation drawn from a state-conditional rule. The planner LP finds the
cheapest obedient rule on a policy grid.
"""
from .mechanism import (
    RecommendationRule,
    Scenario,
    load_rule,
    load_scenario,
    save_rule,
    save_scenario,
    validate,
)
from .model import CostModel, Network
from .obedience import verify_ps_bce_atomic, verify_ps_bcwe
from .planner import (
    baseline_full_information,
    baseline_no_information,
    solve_optimal_mechanism,
    sweep_partitions,
)

__version__ = "0.1.0"

__all__ = [
    "CostModel",
    "Network",
    "RecommendationRule",
    "Scenario",
    "baseline_full_information",
    "baseline_no_information",
    "load_rule",
    "load_scenario",
    "save_rule",
    "save_scenario",
    "solve_optimal_mechanism",
    "sweep_partitions",
    "validate",
    "verify_ps_bce_atomic",
    "verify_ps_bcwe",
]
