"""Distance-weighted graphs and their efficiency metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.csgraph import dijkstra


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on ``range(n)`` with positive edge weights.

    ``edges`` holds each edge once as a row ``(j, k)`` with ``j < k``,
    sorted lexicographically.
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if e.shape[0] != w.shape[0]:
            raise ValueError("edges and weights differ in length")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        if np.any(w <= 0):
            raise ValueError("edge weights must be positive")
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("edge endpoint out of range")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        key = lo.astype(np.int64) * self.n + hi
        key, first = np.unique(key, return_index=True)
        object.__setattr__(self, "edges", np.column_stack([lo[first], hi[first]]).astype(int))
        object.__setattr__(self, "weights", w[first])

    @classmethod
    def from_pairs(cls, n: int, pairs, d) -> "WeightedGraph":
        """Graph with an edge for each pair, weighted by the distance matrix ``d``."""
        pairs = np.asarray(list(pairs), dtype=int).reshape(-1, 2)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        d = np.asarray(d)
        return cls(n, pairs, d[pairs[:, 0], pairs[:, 1]])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def adjacency(self, weighted: bool = True) -> csr_matrix:
        vals = self.weights if weighted else np.ones(self.n_edges)
        i, j = self.edges[:, 0], self.edges[:, 1]
        a = coo_matrix((np.concatenate([vals, vals]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                       shape=(self.n, self.n))
        return a.tocsr()

    def has_edge(self, j: int, k: int) -> bool:
        lo, hi = min(j, k), max(j, k)
        return bool(np.any((self.edges[:, 0] == lo) & (self.edges[:, 1] == hi)))

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges}


def radial_graph(d, r: float) -> WeightedGraph:
    """Edges between all pairs at distance at most ``r``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    d = np.asarray(d, dtype=float)
    j, k = np.nonzero(np.triu(d <= r, 1))
    return WeightedGraph(d.shape[0], np.column_stack([j, k]), d[j, k])


def knn_graph(d, k: int) -> WeightedGraph:
    """Symmetrized k-nearest-neighbor graph; ties at the k-th distance are all kept."""
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must lie in [1, N-1], got {k}")
    masked = d.copy()
    np.fill_diagonal(masked, np.inf)
    kth = np.partition(masked, k - 1, axis=1)[:, k - 1]
    j, kk = np.nonzero(masked <= kth[:, None])
    return WeightedGraph.from_pairs(n, np.column_stack([j, kk]), d)


def shortest_paths(G: WeightedGraph) -> np.ndarray:
    return dijkstra(G.adjacency(weighted=True), directed=False)


def efficiency(G: WeightedGraph) -> float:
    """Mean inverse shortest-path length over ordered pairs; unreachable pairs count 0."""
    n = G.n
    if n < 2:
        raise ValueError("efficiency needs at least two vertices")
    if G.n_edges == 0:
        return 0.0
    sp = shortest_paths(G)
    np.fill_diagonal(sp, np.inf)
    return float(np.sum(1.0 / sp) / (n * (n - 1)))


def efficiency_per_edge(G: WeightedGraph) -> float:
    total = 2.0 * G.n_edges
    return efficiency(G) / total if total else 0.0


def efficiency_per_length(G: WeightedGraph) -> float:
    total = 2.0 * float(np.sum(G.weights))
    return efficiency(G) / total if total else 0.0


def connected_components(G: WeightedGraph) -> tuple[int, np.ndarray]:
    """Component count and labels; each label is the smallest vertex index in its component."""
    count, raw = _cc(G.adjacency(weighted=False), directed=False)
    rep = np.full(count, G.n, dtype=int)
    np.minimum.at(rep, raw, np.arange(G.n))
    return int(count), rep[raw]


def graph_metrics(G: WeightedGraph) -> dict:
    count, _ = connected_components(G)
    eff = efficiency(G) if G.n >= 2 else 0.0
    return {
        "n_vertices": G.n,
        "n_edges": G.n_edges,
        "components": count,
        "efficiency": eff,
        "efficiency_per_edge": eff / (2.0 * G.n_edges) if G.n_edges else 0.0,
        "efficiency_per_length": eff / (2.0 * float(np.sum(G.weights))) if G.n_edges else 0.0,
    }


def wasserstein1_hist(h1: dict, h2: dict) -> float:
    """1-Wasserstein distance between two integer-valued count histograms."""
    t1 = sum(h1.values())
    t2 = sum(h2.values())
    if t1 <= 0 or t2 <= 0:
        raise ValueError("histograms must have positive total count")
    keys = set(h1) | set(h2)
    lo, hi = min(keys), max(keys)
    grid = np.arange(lo, hi + 1)
    c1 = np.cumsum([h1.get(int(k), 0) for k in grid]) / t1
    c2 = np.cumsum([h2.get(int(k), 0) for k in grid]) / t2
    return float(np.sum(np.abs(c1 - c2)))
