"""Peel neighborhoods and the constructions built from them.

The peel neighborhood of a basepoint ``x`` is the smallest closed ball around
``x`` whose peel no longer contains ``x``.  Balls are grown through the
distinct distances from ``x``; points at equal distance enter together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import WeightedGraph
from .metric import MetricKind, PointCloud, _dist_block, distance_rows, paired_distances, validate_distance_matrix
from .parallel import pmap
from .peel import PeelDistribution, PeelError, peel

# above this size an unthresholded scan must be requested explicitly
UNBOUNDED_GUARD = 2000


class NeighborIndex:
    """Exact nearest-neighbor queries over a point cloud or a distance matrix.

    Queries are answered by brute force over full distance rows, so the
    returned neighbor lists are always exact.
    """

    def __init__(self, source, metric_kind=None):
        if isinstance(source, NeighborIndex):
            source = source.cloud if source.cloud is not None else source.matrix
        if isinstance(source, PointCloud):
            self.cloud, self.matrix = source, None
        else:
            self.cloud = PointCloud(np.asarray(source, dtype=float), metric_kind or MetricKind.EUCLIDEAN)
            self.matrix = None
        self.n = (self.cloud.n if self.cloud is not None else self.matrix.shape[0])

    @classmethod
    def from_matrix(cls, d) -> "NeighborIndex":
        self = cls.__new__(cls)
        self.cloud = None
        self.matrix = validate_distance_matrix(d)
        self.n = self.matrix.shape[0]
        return self

    @property
    def coords(self):
        return None if self.cloud is None else self.cloud.coords

    def row(self, i: int) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix[i]
        return distance_rows(self.cloud, [i])[0]

    def rows(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        if self.matrix is not None:
            return self.matrix[idx]
        return distance_rows(self.cloud, idx)

    def sorted_neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """All other points ordered by distance from ``i`` (ties by index)."""
        r = self.row(i)
        order = np.argsort(r, kind="stable")
        order = order[order != i]
        return order, r[order]

    def knn(self, i: int, k: int) -> tuple[np.ndarray, np.ndarray]:
        order, dist = self.sorted_neighbors(i)
        return order[:k], dist[:k]

    def kth_distances(self, k: int, block: int = 512) -> np.ndarray:
        """Distance from every point to its k-th nearest neighbor (self excluded)."""
        out = np.empty(self.n)
        for s in range(0, self.n, block):
            idx = np.arange(s, min(self.n, s + block))
            r = self.rows(idx).copy()
            r[np.arange(idx.size), idx] = np.inf
            out[idx] = np.partition(r, k - 1, axis=1)[:, k - 1]
        return out

    def submatrix(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        if self.matrix is not None:
            return self.matrix[np.ix_(idx, idx)]
        x = self.cloud.coords[idx]
        d = _dist_block(x, x, self.cloud.metric_kind)
        np.fill_diagonal(d, 0.0)
        return d

    def distance(self, i: int, j: int) -> float:
        if self.matrix is not None:
            return float(self.matrix[i, j])
        return float(self.submatrix([i, j])[0, 1])


def _as_index(source) -> NeighborIndex:
    return source if isinstance(source, NeighborIndex) else NeighborIndex(source)


def default_radial_threshold(index) -> float:
    """Twice the median distance to the k-th nearest neighbor, k = ceil(log2 N)."""
    index = _as_index(index)
    n = index.n
    if n < 2:
        raise ValueError("threshold needs at least two points")
    k = min(max(1, math.ceil(math.log2(n))), n - 1)
    return 2.0 * float(np.median(index.kth_distances(k)))


@dataclass(frozen=True)
class ThresholdPolicy:
    radial_cap: float | None = None
    cardinality_cap: int | None = None

    def __post_init__(self):
        if self.radial_cap is not None and not self.radial_cap > 0:
            raise ValueError("radial cap must be positive")
        if self.cardinality_cap is not None and not self.cardinality_cap > 0:
            raise ValueError("cardinality cap must be positive")

    @property
    def bounded(self) -> bool:
        return self.radial_cap is not None or self.cardinality_cap is not None

    @classmethod
    def default(cls, index) -> "ThresholdPolicy":
        return cls(radial_cap=default_radial_threshold(index))

    @classmethod
    def parse(cls, spec: str, index=None) -> "ThresholdPolicy":
        """Parse ``default``, ``radius:X``, ``card:K`` or ``none``."""
        spec = (spec or "default").strip().lower()
        if spec == "none":
            return cls()
        if spec == "default":
            if index is None:
                raise ValueError("default threshold needs the data")
            return cls.default(index)
        kind, _, val = spec.partition(":")
        if kind in ("radius", "r"):
            return cls(radial_cap=float(val))
        if kind in ("card", "cardinality", "k"):
            return cls(cardinality_cap=int(val))
        raise ValueError(f"unknown threshold spec {spec!r}")


@dataclass(frozen=True)
class PeelNeighborhood:
    basepoint: int
    rho: float
    members: np.ndarray
    saturated: bool = False
    saturation_reason: str = "none"  # none | radius | cardinality | exhausted

    @property
    def size(self) -> int:
        return int(self.members.size)

    def to_json(self) -> dict:
        return {"index": int(self.basepoint), "rho": float(self.rho), "saturated": bool(self.saturated),
                "reason": self.saturation_reason, "members": [int(i) for i in self.members]}


class NeighborhoodError(RuntimeError):
    def __init__(self, failures: dict):
        self.failures = failures
        shown = ", ".join(f"{k}: {v}" for k, v in list(failures.items())[:5])
        super().__init__(f"{len(failures)} neighborhood(s) failed ({shown})")


def peel_neighborhood(x: int, index, policy: ThresholdPolicy | None = None) -> PeelNeighborhood:
    """Grow closed balls around ``x`` until ``x`` drops out of their peel.

    A radial cap stops the scan before any radius exceeding it, and a
    cardinality cap before any ball larger than it; the neighborhood is then
    reported as saturated.  With no caps and ``x`` never leaving the peel,
    the neighborhood is the whole space with ``rho = inf``.
    """
    index = _as_index(index)
    policy = policy or ThresholdPolicy()
    order, dist = index.sorted_neighbors(x)
    n_other = order.size
    # distinct radii: group ends are the last position holding each value
    if n_other:
        ends = np.flatnonzero(np.diff(dist) != 0) + 1
        ends = np.append(ends, n_other)
    else:
        ends = np.empty(0, dtype=int)
    cap_r, cap_k = policy.radial_cap, policy.cardinality_cap

    members_all = np.concatenate([[x], order]).astype(int)
    cached = np.zeros((0, 0))
    last_r = 0.0
    last_end = 0
    for end in ends:
        r = float(dist[end - 1])
        if cap_r is not None and r > cap_r:
            return PeelNeighborhood(x, float(cap_r), members_all[: last_end + 1], True, "radius")
        if cap_k is not None and end + 1 > cap_k:
            return PeelNeighborhood(x, last_r, members_all[: last_end + 1], True, "cardinality")
        size = end + 1
        if cached.shape[0] < size:
            grow = min(members_all.size, max(size, 2 * cached.shape[0], 16))
            cached = index.submatrix(members_all[:grow])
        p = peel(cached[:size, :size])
        last_r, last_end = r, end
        if p.p[0] == 0.0:
            return PeelNeighborhood(x, r, members_all[:size], False, "none")
    members = members_all[: last_end + 1]
    if cap_r is not None:
        return PeelNeighborhood(x, float(cap_r), members, True, "radius")
    if cap_k is not None:
        return PeelNeighborhood(x, last_r, members, True, "cardinality")
    return PeelNeighborhood(x, math.inf, members, True, "exhausted")


def _neighborhood_task(state, x):
    try:
        return peel_neighborhood(x, state["index"], state["policy"])
    except PeelError as exc:
        return exc


def all_neighborhoods(index, policy: ThresholdPolicy | None = None, *, points=None,
                      workers: int | None = None, allow_unbounded: bool = False) -> list[PeelNeighborhood]:
    """Peel neighborhoods of every point (or of ``points``).

    Unthresholded scans over more than 2000 points must be requested with
    ``allow_unbounded``.  Failures are collected and raised together as a
    :class:`NeighborhoodError` keyed by point index.
    """
    index = _as_index(index)
    if policy is None:
        policy = ThresholdPolicy.default(index)
    if not policy.bounded and index.n > UNBOUNDED_GUARD and not allow_unbounded:
        raise ValueError(f"unthresholded neighborhoods on {index.n} points; set a cap or allow_unbounded")
    pts = range(index.n) if points is None else [int(p) for p in points]
    results = pmap(_neighborhood_task, pts, {"index": index, "policy": policy}, workers=workers)
    failures = {x: str(r) for x, r in zip(pts, results) if isinstance(r, Exception)}
    if failures:
        raise NeighborhoodError(failures)
    return results


def iterated_neighborhood(x: int, level: int, neighborhoods) -> np.ndarray:
    """nu_0 = {x}, nu_1 = nu(x), nu_j = union of nu(y) over y in nu_{j-1}(x)."""
    current = np.array([x], dtype=int)
    for _ in range(level):
        current = np.unique(np.concatenate([neighborhoods[int(y)].members for y in current]))
    return current


def neighborhood_graph(neighborhoods, index, exclude_saturated: bool = False) -> WeightedGraph:
    """Undirected graph with j-k whenever k is in nu(j) or j is in nu(k), weighted by distance."""
    index = _as_index(index)
    pairs = []
    for nb in neighborhoods:
        if exclude_saturated and nb.saturated:
            continue
        others = nb.members[nb.members != nb.basepoint]
        pairs.extend((nb.basepoint, int(k)) for k in others)
    if not pairs:
        return WeightedGraph(index.n, np.zeros((0, 2), dtype=int), np.zeros(0))
    pairs = np.array(pairs, dtype=int)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    pairs = np.unique(np.column_stack([lo, hi]), axis=0)
    if index.matrix is not None:
        w = index.matrix[pairs[:, 0], pairs[:, 1]]
    else:
        w = paired_distances(index.coords[pairs[:, 0]], index.coords[pairs[:, 1]], index.cloud.metric_kind)
    return WeightedGraph(index.n, pairs, w)


@dataclass
class PeelApproximation:
    distribution: PeelDistribution
    saturated: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def approximate_peel(index, neighborhoods=None, policy: ThresholdPolicy | None = None) -> PeelApproximation:
    """Peel of the metric restricted to radius-saturated points, lifted to all N points."""
    index = _as_index(index)
    if neighborhoods is None:
        policy = policy or ThresholdPolicy.default(index)
        if policy.radial_cap is None:
            raise ValueError("approximate peel needs a finite radial cap")
        neighborhoods = all_neighborhoods(index, policy)
    sat = np.array([nb.basepoint for nb in neighborhoods if nb.saturation_reason == "radius"], dtype=int)
    if sat.size < 2:
        raise ValueError(f"only {sat.size} radius-saturated point(s); need at least 2")
    sub = peel(index.submatrix(sat))
    return PeelApproximation(sub.embed(sat, index.n), sat)


def hole_proxy(coords, neighborhoods) -> float:
    """min over x of |x| - rho(x), using the thresholded radii."""
    coords = np.asarray(coords, dtype=float)
    norms = np.linalg.norm(coords, axis=1)
    rho = np.array([nb.rho for nb in neighborhoods])
    base = np.array([nb.basepoint for nb in neighborhoods])
    return float(np.min(norms[base] - rho))


def radii(neighborhoods) -> np.ndarray:
    return np.array([nb.rho for nb in neighborhoods])


def cardinalities(neighborhoods) -> np.ndarray:
    return np.array([nb.size for nb in neighborhoods])
