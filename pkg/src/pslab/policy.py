"""Mixed routing policies, their uniform grid, and publicness structures."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

SIMPLEX_TOL = 1e-12
DEFAULT_GRID_CAP = 10**6


class PolicyError(ValueError):
    pass


def check_policy(y, num_routes: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or (num_routes is not None and y.size != num_routes):
        raise PolicyError(f"policy must be a vector over {num_routes} routes")
    if np.any(y < -SIMPLEX_TOL) or abs(y.sum() - 1.0) > SIMPLEX_TOL:
        raise PolicyError(f"policy {y.tolist()} is not in the routing simplex")
    return y


def _compositions(total: int, parts: int):
    # descending lexicographic order of the count vectors
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class PolicyGrid:
    """All policies whose entries are multiples of ``1/m``.

    ``counts[i]`` is the integer numerator vector of policy ``i``; ``policies``
    holds the float values. Ordering is descending-lexicographic in the counts,
    so the first pure route comes first and the last pure route last.
    """

    num_routes: int
    m: int
    counts: np.ndarray = field(repr=False, compare=False)
    policies: np.ndarray = field(repr=False, compare=False)
    _index: dict = field(repr=False, compare=False)

    def __len__(self):
        return self.counts.shape[0]

    def index_of(self, y) -> int:
        """Grid index of a policy given either as counts or as floats."""
        arr = np.asarray(y)
        if np.issubdtype(arr.dtype, np.integer):
            key = tuple(int(v) for v in arr)
        else:
            scaled = np.asarray(y, dtype=float) * self.m
            key = tuple(int(v) for v in np.rint(scaled))
            if not np.allclose(scaled, key, atol=1e-9, rtol=0):
                raise PolicyError(f"policy {arr.tolist()} is not on the 1/{self.m} grid")
        try:
            return self._index[key]
        except KeyError:
            raise PolicyError(f"policy {arr.tolist()} is not on the grid") from None

    def pure_indices(self) -> list[int]:
        """Grid index of each pure route, in route order."""
        out = []
        for r in range(self.num_routes):
            c = [0] * self.num_routes
            c[r] = self.m
            out.append(self._index[tuple(c)])
        return out

    def nearest(self, y) -> int:
        """Index of a grid point within L1 distance num_routes/m of ``y`` (floor + largest remainders)."""
        y = check_policy(y, self.num_routes)
        scaled = y * self.m
        base = np.floor(scaled).astype(int)
        short = self.m - int(base.sum())
        order = np.argsort(-(scaled - base), kind="stable")
        base[order[:short]] += 1
        return self._index[tuple(int(v) for v in base)]


def grid_size(num_routes: int, m: int) -> int:
    return comb(m + num_routes - 1, num_routes - 1)


def enumerate_policy_grid(num_routes: int, m: int, cap: int = DEFAULT_GRID_CAP) -> PolicyGrid:
    if num_routes < 1:
        raise PolicyError("num_routes must be >= 1")
    if m < 1:
        raise PolicyError("grid resolution m must be >= 1")
    size = grid_size(num_routes, m)
    if size > cap:
        raise PolicyError(f"policy grid would have {size} points, cap is {cap}")
    counts = np.array(list(_compositions(m, num_routes)), dtype=np.int64).reshape(size, num_routes)
    policies = counts / m
    counts.setflags(write=False)
    policies.setflags(write=False)
    index = {tuple(int(v) for v in row): i for i, row in enumerate(counts)}
    return PolicyGrid(num_routes, m, counts, policies, index)


@dataclass(frozen=True)
class PartitionProfile:
    x: tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        object.__setattr__(self, "x", x)
        if not x:
            raise PolicyError("partition profile is empty")
        if any(not v > 0 for v in x):
            raise PolicyError("partition factors must be positive")
        if abs(sum(x) - 1.0) > SIMPLEX_TOL:
            raise PolicyError(f"partition factors sum to {sum(x):.12g}")

    @property
    def K(self) -> int:
        return len(self.x)

    def as_array(self) -> np.ndarray:
        return np.array(self.x)


@dataclass(frozen=True)
class AtomicPublicness:
    """Finite population: traveler weights and their group assignment."""

    weights: tuple[float, ...]
    group_of: tuple[int, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        g = tuple(int(v) for v in self.group_of)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "group_of", g)
        if not w:
            raise PolicyError("atomic population is empty")
        if len(w) != len(g):
            raise PolicyError("weights and group_of have different lengths")
        if any(not v > 0 for v in w):
            raise PolicyError("traveler weights must be positive")
        K = max(g) + 1
        if min(g) < 0 or len(set(g)) != K:
            raise PolicyError("groups must be numbered 0..K-1 and all nonempty")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def K(self) -> int:
        return max(self.group_of) + 1

    @property
    def demand(self) -> float:
        return float(sum(self.weights))

    def members(self, k: int) -> list[int]:
        return [i for i, g in enumerate(self.group_of) if g == k]

    def group_weights(self) -> np.ndarray:
        out = np.zeros(self.K)
        for w, g in zip(self.weights, self.group_of):
            out[g] += w
        return out

    def partition(self) -> PartitionProfile:
        sizes = np.bincount(self.group_of, minlength=self.K)
        return PartitionProfile(tuple(sizes / self.n))

    @classmethod
    def equal_weights(cls, x, n: int, demand: float) -> "AtomicPublicness":
        """``n`` travelers of weight ``demand/n`` with ``x[k]*n`` of them in group k."""
        sizes = [x_k * n for x_k in x]
        rounded = [int(round(s)) for s in sizes]
        if any(abs(s - r) > 1e-9 for s, r in zip(sizes, rounded)) or sum(rounded) != n:
            raise PolicyError(f"n={n} does not split into groups of sizes x*n for x={tuple(x)}")
        group_of = [k for k, size in enumerate(rounded) for _ in range(size)]
        return cls(tuple([demand / n] * n), tuple(group_of))


def flow_from_recommendation(y_profile, x, demand: float) -> np.ndarray:
    """Route flows when group k (share ``x[k]`` of ``demand``) follows ``y_profile[k]``."""
    y = np.asarray(y_profile, dtype=float)
    x = np.asarray(x.x if isinstance(x, PartitionProfile) else x, dtype=float)
    if y.ndim != 2 or y.shape[0] != x.size:
        raise PolicyError(f"{y.shape[0] if y.ndim == 2 else '?'} policies for {x.size} groups")
    return demand * (x @ y)


def atomic_flow(y_profile, pub: AtomicPublicness, deviant=None) -> np.ndarray:
    y = np.asarray(y_profile, dtype=float)
    if y.ndim != 2 or y.shape[0] != pub.K:
        raise PolicyError(f"expected {pub.K} group policies")
    f = pub.group_weights() @ y
    if deviant is not None:
        i, y_hat = deviant
        if not 0 <= i < pub.n:
            raise PolicyError(f"unknown traveler {i}")
        y_hat = check_policy(y_hat, y.shape[1])
        w = pub.weights[i]
        f = f + w * (y_hat - y[pub.group_of[i]])
    return f
