"""Network, state-dependent polynomial edge costs and the flow -> load -> cost maps."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

PRIOR_TOL = 1e-12
DEMAND_TOL = 1e-9


class ModelError(ValueError):
    pass


class CostRegularityWarning(UserWarning):
    """An edge cost is nonnegative/nondecreasing but not strictly positive/increasing."""


@dataclass(frozen=True)
class Network:
    """Single origin-destination network.

    ``routes`` holds, per route, the tuple of edge indices it traverses.
    """

    edges: tuple[str, ...]
    routes: tuple[tuple[int, ...], ...]
    states: tuple[str, ...]
    prior: np.ndarray
    demand: float
    incidence: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = tuple(str(e) for e in self.edges)
        routes = tuple(tuple(int(e) for e in r) for r in self.routes)
        states = tuple(str(s) for s in self.states)
        prior = np.array(self.prior, dtype=float)
        prior.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "routes", routes)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "demand", float(self.demand))

        if not edges:
            raise ModelError("network has no edges")
        if not routes:
            raise ModelError("network has no routes")
        for i, r in enumerate(routes):
            if not r:
                raise ModelError(f"route {i} is empty")
            if len(set(r)) != len(r):
                raise ModelError(f"route {i} repeats an edge")
            bad = [e for e in r if not 0 <= e < len(edges)]
            if bad:
                raise ModelError(f"route {i} references unknown edge index {bad[0]}")
        if prior.shape != (len(states),):
            raise ModelError(f"prior has {prior.size} entries for {len(states)} states")
        if np.any(prior < 0):
            raise ModelError("prior has a negative entry")
        total = float(prior.sum())
        if abs(total - 1.0) > PRIOR_TOL:
            raise ModelError(f"prior sums to {total:.12g}")
        if not self.demand > 0:
            raise ModelError("demand must be positive")

        inc = np.zeros((len(edges), len(routes)))
        for r, path in enumerate(routes):
            inc[list(path), r] = 1.0
        inc.setflags(write=False)
        object.__setattr__(self, "incidence", inc)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_routes(self) -> int:
        return len(self.routes)

    @property
    def num_states(self) -> int:
        return len(self.states)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.edges == other.edges
            and self.routes == other.routes
            and self.states == other.states
            and np.array_equal(self.prior, other.prior)
            and self.demand == other.demand
        )

    def __hash__(self):
        return hash((self.edges, self.routes, self.states, self.prior.tobytes(), self.demand))


@dataclass(frozen=True)
class CostModel:
    """Polynomial edge costs ``C_e(l, s) = sum_d a[e, s, d] * l**d``.

    ``coeffs`` has shape (num_edges, num_states, degree + 1), ascending powers.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float)
        if a.ndim != 3 or a.shape[2] == 0:
            raise ModelError("cost coefficients must have shape (edges, states, degree+1)")
        if not np.all(np.isfinite(a)):
            raise ModelError("cost coefficients must be finite")
        if np.any(a < 0):
            e, s, d = np.argwhere(a < 0)[0]
            raise ModelError(f"negative cost coefficient a{d} on edge {e}, state {s}")
        for e, s in np.ndindex(a.shape[:2]):
            if not np.any(a[e, s] > 0):
                raise ModelError(f"edge {e}, state {s}: cost polynomial is identically zero")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

        weak = [
            (e, s)
            for e, s in np.ndindex(a.shape[:2])
            if a[e, s, 0] == 0 or not np.any(a[e, s, 1:] > 0)
        ]
        if weak:
            warnings.warn(
                f"{len(weak)} edge cost(s) are not strictly positive and increasing "
                f"(first: edge {weak[0][0]}, state {weak[0][1]})",
                CostRegularityWarning,
                stacklevel=3,
            )

    @property
    def degree(self) -> int:
        return self.coeffs.shape[2] - 1

    def check_against(self, net: Network) -> None:
        if self.coeffs.shape[:2] != (net.num_edges, net.num_states):
            raise ModelError(
                f"cost table is {self.coeffs.shape[:2]}, network needs "
                f"({net.num_edges}, {net.num_states})"
            )

    def edge_costs(self, loads: np.ndarray, s: int) -> np.ndarray:
        """Evaluate every edge cost at ``loads`` (shape (..., num_edges)) in state ``s``."""
        if not 0 <= s < self.coeffs.shape[1]:
            raise ModelError(f"invalid state index {s}")
        a = self.coeffs[:, s, :]
        loads = np.asarray(loads, dtype=float)
        # Horner, highest power first
        out = np.broadcast_to(a[:, -1], loads.shape).copy()
        for d in range(a.shape[1] - 2, -1, -1):
            out *= loads
            out += a[:, d]
        return out

    def scaled(self, factor: float) -> "CostModel":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CostRegularityWarning)
            return CostModel(self.coeffs * factor)

    def __eq__(self, other):
        if not isinstance(other, CostModel):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())


def _check_flow(f, net: Network) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != net.num_routes:
        raise ModelError(f"flow has {f.shape[-1]} routes, network has {net.num_routes}")
    return f


def validate_flow(f, net: Network, demand: float | None = None) -> np.ndarray:
    """Check nonnegativity and that the flow carries the full demand."""
    f = _check_flow(f, net)
    if np.any(f < 0):
        raise ModelError("flow has a negative route entry")
    d = net.demand if demand is None else demand
    total = float(f.sum())
    if abs(total - d) > DEMAND_TOL:
        raise ModelError(f"flow carries {total:.12g}, demand is {d:.12g}")
    return f


def edge_load_from_flow(f, net: Network) -> np.ndarray:
    """Edge loads induced by route flows; works on stacked flows (..., num_routes)."""
    f = _check_flow(f, net)
    return f @ net.incidence.T


def route_cost(f, s: int, net: Network, costs: CostModel) -> np.ndarray:
    f = _check_flow(f, net)
    return costs.edge_costs(f @ net.incidence.T, s) @ net.incidence


def total_cost(f, s: int, net: Network, costs: CostModel) -> float | np.ndarray:
    f = _check_flow(f, net)
    return np.sum(f * route_cost(f, s, net, costs), axis=-1)


def route_cost_sum(f, s: int, net: Network, costs: CostModel) -> float | np.ndarray:
    """Unweighted sum of route costs, the literal per-route objective variant."""
    return np.sum(route_cost(f, s, net, costs), axis=-1)


OBJECTIVES = {
    "total_cost": total_cost,
    "route_cost_sum": route_cost_sum,
}


def objective_fn(name: str):
    try:
        return OBJECTIVES[name]
    except KeyError:
        raise ModelError(
            f"unknown objective {name!r}; expected one of {sorted(OBJECTIVES)}"
        ) from None
