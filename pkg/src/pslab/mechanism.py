"""Scenarios, finite-support recommendation rules, validation and JSON I/O."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import OBJECTIVES, CostModel, CostRegularityWarning, ModelError, Network
from .policy import (
    AtomicPublicness,
    PartitionProfile,
    PolicyError,
    PolicyGrid,
    enumerate_policy_grid,
)

SCHEMA_VERSION = 1
RULE_MASS_TOL = 1e-9
ATOMIC_PARTITION_TOL = 1e-9


class FormatError(ValueError):
    """Malformed scenario or rule file."""


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    network: Network
    costs: CostModel
    partition: PartitionProfile | None = None
    atomic: AtomicPublicness | None = None
    grid_m: int = 10
    objective: str = "total_cost"
    name: str = ""

    def __post_init__(self):
        self.costs.check_against(self.network)
        if self.partition is None and self.atomic is None:
            object.__setattr__(self, "partition", PartitionProfile((1.0,)))
        if self.atomic is not None:
            derived = self.atomic.partition()
            if self.partition is None:
                object.__setattr__(self, "partition", derived)
            elif self.partition.K != derived.K or not np.allclose(
                self.partition.x, derived.x, atol=ATOMIC_PARTITION_TOL, rtol=0
            ):
                raise ScenarioError(
                    f"partition {self.partition.x} disagrees with atomic groups {derived.x}"
                )
        if int(self.grid_m) < 1:
            raise ScenarioError("grid_m must be >= 1")
        object.__setattr__(self, "grid_m", int(self.grid_m))
        if self.objective not in OBJECTIVES:
            raise ScenarioError(f"unknown objective {self.objective!r}")

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def x(self) -> np.ndarray:
        return self.partition.as_array()

    @property
    def is_atomic(self) -> bool:
        return self.atomic is not None

    @property
    def demand(self) -> float:
        return self.network.demand

    def grid(self) -> PolicyGrid:
        return _grid(self.network.num_routes, self.grid_m)

    def with_partition(self, x) -> "Scenario":
        """Nonatomic copy of this scenario with partition ``x`` (any K)."""
        return replace(self, partition=PartitionProfile(tuple(x)), atomic=None)

    def with_grid(self, m: int) -> "Scenario":
        return replace(self, grid_m=int(m))

    def with_atomic(self, pub: AtomicPublicness) -> "Scenario":
        return replace(self, partition=None, atomic=pub)


_GRID_CACHE: dict = {}


def _grid(num_routes: int, m: int) -> PolicyGrid:
    key = (num_routes, m)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = enumerate_policy_grid(num_routes, m)
    return _GRID_CACHE[key]


@dataclass(frozen=True)
class RecommendationRule:
    """Per state, a finite list of ``(profile, weight)`` atoms.

    A profile is a K-tuple of grid-policy indices.
    """

    grid_m: int
    K: int
    atoms: tuple[tuple[tuple[tuple[int, ...], float], ...], ...]

    def __post_init__(self):
        atoms = tuple(
            tuple((tuple(int(i) for i in prof), float(w)) for prof, w in state_atoms)
            for state_atoms in self.atoms
        )
        object.__setattr__(self, "atoms", atoms)

    @property
    def num_states(self) -> int:
        return len(self.atoms)

    def iter_atoms(self):
        for s, state_atoms in enumerate(self.atoms):
            for prof, w in state_atoms:
                yield s, prof, w

    @classmethod
    def point_mass(cls, profile, num_states: int, grid_m: int) -> "RecommendationRule":
        prof = tuple(profile)
        return cls(grid_m, len(prof), tuple(((prof, 1.0),) for _ in range(num_states)))

    @classmethod
    def from_weights(cls, weights: np.ndarray, profiles: np.ndarray, grid_m: int,
                     threshold: float = 0.0) -> "RecommendationRule":
        """Build from a dense (num_states, num_profiles) weight matrix."""
        atoms = []
        for row in np.asarray(weights):
            keep = np.flatnonzero(row > threshold)
            atoms.append(tuple((tuple(profiles[j]), float(row[j])) for j in keep))
        return cls(grid_m, profiles.shape[1], tuple(atoms))

    def dense(self, num_profiles: int, profile_index) -> np.ndarray:
        out = np.zeros((self.num_states, num_profiles))
        for s, prof, w in self.iter_atoms():
            out[s, profile_index(prof)] += w
        return out

    def mixture(self, other: "RecommendationRule", alpha: float) -> "RecommendationRule":
        """``(1 - alpha) * self + alpha * other``, atoms merged per state."""
        if (self.grid_m, self.K, self.num_states) != (other.grid_m, other.K, other.num_states):
            raise ScenarioError("rules are not comparable")
        atoms = []
        for a, b in zip(self.atoms, other.atoms):
            merged: dict = {}
            for prof, w in a:
                merged[prof] = merged.get(prof, 0.0) + (1 - alpha) * w
            for prof, w in b:
                merged[prof] = merged.get(prof, 0.0) + alpha * w
            atoms.append(tuple((p, w) for p, w in sorted(merged.items()) if w > 0))
        return RecommendationRule(self.grid_m, self.K, tuple(atoms))


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def __bool__(self):
        return self.ok


def validate(rule: RecommendationRule, scen: Scenario) -> ValidationReport:
    rep = ValidationReport()
    names = scen.network.states
    if rule.grid_m != scen.grid_m:
        rep.issues.append(f"rule grid_m {rule.grid_m} != scenario grid_m {scen.grid_m}")
    if rule.K != scen.K:
        rep.issues.append(f"rule K {rule.K} != scenario K {scen.K}")
    if rule.num_states != scen.network.num_states:
        rep.issues.append(f"rule covers {rule.num_states} states, scenario has {len(names)}")
        return rep
    size = len(_grid(scen.network.num_routes, rule.grid_m))
    for s, state_atoms in enumerate(rule.atoms):
        label = names[s]
        total = 0.0
        seen = set()
        for j, (prof, w) in enumerate(state_atoms):
            if not math.isfinite(w):
                rep.issues.append(f"state {label}, atom {j}: non-finite mass")
                continue
            if w < 0:
                rep.issues.append(f"state {label}, atom {j}: negative mass")
            total += w
            if len(prof) != rule.K:
                rep.issues.append(f"state {label}, atom {j}: profile has {len(prof)} entries")
            elif any(not 0 <= i < size for i in prof):
                rep.issues.append(f"state {label}, atom {j}: policy index outside grid")
            if prof in seen:
                rep.issues.append(f"state {label}, atom {j}: duplicate profile")
            seen.add(prof)
        if abs(total - 1.0) > RULE_MASS_TOL:
            rep.issues.append(f"state {label}: mass {total:.12g}")
    return rep


def marginal_support(rule: RecommendationRule, k: int) -> list[int]:
    """Sorted grid indices group ``k`` receives with positive probability in some state."""
    if not 0 <= k < rule.K:
        raise ScenarioError(f"invalid group index {k}")
    return sorted({prof[k] for _, prof, w in rule.iter_atoms() if w > 0})


# ---------------------------------------------------------------- file formats


def _require(obj: dict, key: str, where: str = ""):
    if key not in obj:
        raise FormatError(f"missing field {where + key!r}")
    return obj[key]


def _read_json(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise FormatError(f"{path}: top level must be an object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise FormatError(f"{path}: schema_version {version} unsupported (expected {SCHEMA_VERSION})")
    return data


def _write_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def scenario_from_dict(data: dict) -> Scenario:
    edges = _require(data, "edges")
    routes = _require(data, "routes")
    states = _require(data, "states")
    prior = _require(data, "prior")
    demand = _require(data, "demand")
    cost_spec = _require(data, "costs")
    if not isinstance(edges, list) or not isinstance(states, list):
        raise FormatError("'edges' and 'states' must be lists")
    if not isinstance(prior, list) or len(prior) != len(states):
        raise FormatError(f"'prior' must list one probability per state ({len(states)})")
    total = sum(float(p) for p in prior)
    if abs(total - 1.0) > 1e-12:
        raise ScenarioError(f"prior sums to {total:.12g}")

    table = []
    degree = 0
    for e in edges:
        per_state = _require(cost_spec, str(e), "costs.")
        row = []
        for s in states:
            coeffs = _require(per_state, str(s), f"costs.{e}.")
            if not isinstance(coeffs, list) or not coeffs:
                raise FormatError(f"field 'costs.{e}.{s}' must be a nonempty coefficient list")
            row.append([float(c) for c in coeffs])
            degree = max(degree, len(coeffs))
        table.append(row)
    coeffs = np.zeros((len(edges), len(states), degree))
    for i, row in enumerate(table):
        for j, c in enumerate(row):
            coeffs[i, j, : len(c)] = c

    try:
        net = Network(tuple(edges), tuple(tuple(r) for r in routes), tuple(states), prior, demand)
        with warnings.catch_warnings():
            if data.get("quiet_regularity", True):
                warnings.simplefilter("ignore", CostRegularityWarning)
            costs = CostModel(coeffs)
        partition = atomic = None
        if "atomic" in data:
            a = data["atomic"]
            weights = _require(a, "weights", "atomic.")
            group_of = _require(a, "group_of", "atomic.")
            if "n" in a and int(a["n"]) != len(weights):
                raise FormatError("atomic.n does not match the number of weights")
            atomic = AtomicPublicness(tuple(weights), tuple(group_of))
        if "partition" in data:
            partition = PartitionProfile(tuple(data["partition"]))
        K = data.get("K")
        if partition is None and atomic is None and K is not None:
            partition = PartitionProfile(tuple([1.0 / int(K)] * int(K)))
        scen = Scenario(
            net,
            costs,
            partition=partition,
            atomic=atomic,
            grid_m=int(data.get("grid_m", 10)),
            objective=data.get("objective", "total_cost"),
            name=str(data.get("name", "")),
        )
    except (ModelError, PolicyError) as exc:
        raise ScenarioError(str(exc)) from None
    if K is not None and int(K) != scen.K:
        raise ScenarioError(f"K={K} but the publicness model has {scen.K} groups")
    return scen


def scenario_to_dict(scen: Scenario) -> dict:
    net = scen.network
    a = scen.costs.coeffs
    costs = {}
    for e, ename in enumerate(net.edges):
        costs[ename] = {}
        for s, sname in enumerate(net.states):
            c = list(a[e, s])
            while len(c) > 1 and c[-1] == 0:
                c.pop()
            costs[ename][sname] = c
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": scen.name,
        "edges": list(net.edges),
        "routes": [list(r) for r in net.routes],
        "states": list(net.states),
        "prior": [float(p) for p in net.prior],
        "demand": net.demand,
        "costs": costs,
        "K": scen.K,
        "grid_m": scen.grid_m,
        "objective": scen.objective,
    }
    if scen.atomic is not None:
        out["atomic"] = {
            "n": scen.atomic.n,
            "weights": list(scen.atomic.weights),
            "group_of": list(scen.atomic.group_of),
        }
    else:
        out["partition"] = list(scen.partition.x)
    return out


def load_scenario(path) -> Scenario:
    return scenario_from_dict(_read_json(path))


def save_scenario(scen: Scenario, path) -> None:
    _write_json(scenario_to_dict(scen), path)


def rule_to_dict(rule: RecommendationRule, state_names) -> dict:
    states = {}
    for name, state_atoms in zip(state_names, rule.atoms):
        # repr(float) is the shortest string that round-trips exactly
        states[name] = [{"profile": list(p), "weight": repr(w)} for p, w in state_atoms]
    return {"schema_version": SCHEMA_VERSION, "grid_m": rule.grid_m, "K": rule.K, "states": states}


def rule_from_dict(data: dict, state_names=None) -> RecommendationRule:
    grid_m = int(_require(data, "grid_m"))
    K = int(_require(data, "K"))
    states = _require(data, "states")
    if not isinstance(states, dict):
        raise FormatError("'states' must map state names to atom lists")
    names = list(states) if state_names is None else list(state_names)
    missing = [n for n in names if n not in states]
    if missing:
        raise FormatError(f"missing field 'states.{missing[0]}'")
    atoms = []
    for name in names:
        state_atoms = []
        for j, atom in enumerate(states[name]):
            where = f"states.{name}[{j}]."
            prof = _require(atom, "profile", where)
            w = _require(atom, "weight", where)
            try:
                weight = float(w)
            except (TypeError, ValueError):
                raise FormatError(f"field {where + 'weight'!r}: not a decimal number: {w!r}") from None
            state_atoms.append((tuple(int(i) for i in prof), weight))
        atoms.append(tuple(state_atoms))
    return RecommendationRule(grid_m, K, tuple(atoms))


def save_rule(rule: RecommendationRule, path, state_names) -> None:
    _write_json(rule_to_dict(rule, state_names), path)


def load_rule(path, state_names=None) -> RecommendationRule:
    return rule_from_dict(_read_json(path), state_names)
