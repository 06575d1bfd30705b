"""Point clouds, distance matrices and metric utilities.

Everything downstream (peels, neighborhoods, dimension estimates) consumes a
dense symmetric distance matrix.  This module builds those matrices for the
four supported metric kinds and provides the spectral negative-type check,
classical MDS, a planar convex hull and the operator norm.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import eigh


class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    FLAT_TORUS = "flat_torus"
    ANGULAR_SPHERE = "angular_sphere"
    HYPERBOLIC_POINCARE = "hyperbolic_poincare"

    @classmethod
    def parse(cls, value: "str | MetricKind") -> "MetricKind":
        if isinstance(value, cls):
            return value
        aliases = {"torus": cls.FLAT_TORUS, "angular": cls.ANGULAR_SPHERE,
                   "sphere": cls.ANGULAR_SPHERE, "hyperbolic": cls.HYPERBOLIC_POINCARE,
                   "poincare": cls.HYPERBOLIC_POINCARE}
        value = str(value).lower()
        if value in aliases:
            return aliases[value]
        return cls(value)


class MetricError(ValueError):
    """Raised when coordinates or matrices violate a metric precondition."""


@dataclass(frozen=True)
class PointCloud:
    """N points in m ambient coordinates with a declared metric.

    Flat-torus coordinates are reduced modulo 1 on construction.  Angular
    coordinates are normalized to the unit sphere unless ``strict`` is set,
    in which case non-unit rows raise.
    """

    coords: np.ndarray
    metric_kind: MetricKind = MetricKind.EUCLIDEAN
    strict: bool = False

    def __post_init__(self):
        kind = MetricKind.parse(self.metric_kind)
        x = np.array(self.coords, dtype=float, copy=True)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise MetricError(f"coords must be an N x m array with N, m >= 1, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise MetricError("coords must be finite")
        if kind is MetricKind.FLAT_TORUS:
            x = np.mod(x, 1.0)
            x[x >= 1.0] = 0.0
        elif kind is MetricKind.ANGULAR_SPHERE:
            norms = np.linalg.norm(x, axis=1)
            if np.any(norms == 0):
                raise MetricError("angular metric needs nonzero vectors")
            if self.strict:
                if np.any(np.abs(norms - 1.0) > 1e-9):
                    raise MetricError("angular metric (strict) needs unit vectors")
            else:
                x = x / norms[:, None]
        elif kind is MetricKind.HYPERBOLIC_POINCARE:
            if np.any(np.sum(x * x, axis=1) >= 1.0):
                raise MetricError("Poincare points must lie in the open unit ball")
        object.__setattr__(self, "coords", x)
        object.__setattr__(self, "metric_kind", kind)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def subset(self, idx) -> "PointCloud":
        return PointCloud(self.coords[np.asarray(idx)], self.metric_kind)


def _as_cloud(cloud, metric_kind=None) -> PointCloud:
    if isinstance(cloud, PointCloud):
        return cloud
    return PointCloud(np.asarray(cloud, dtype=float), metric_kind or MetricKind.EUCLIDEAN)


def _finish(diff: np.ndarray, a: np.ndarray, b: np.ndarray, kind: MetricKind) -> np.ndarray:
    if kind is MetricKind.ANGULAR_SPHERE:
        # 2 asin(chord / 2) equals arccos(<u, v>) for unit vectors, without the
        # cancellation arccos suffers near 0.
        chord = np.sqrt(np.sum(diff * diff, axis=-1))
        return 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
    if kind is MetricKind.FLAT_TORUS:
        diff = np.abs(diff)
        diff = np.minimum(diff, 1.0 - diff)
    sq = np.sum(diff * diff, axis=-1)
    if kind is MetricKind.HYPERBOLIC_POINCARE:
        # cosh d = 1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2)), rewritten via sinh(d/2).
        na = 1.0 - np.sum(a * a, axis=-1)
        nb = 1.0 - np.sum(b * b, axis=-1)
        return 2.0 * np.arcsinh(np.sqrt(sq / (na * nb)))
    return np.sqrt(sq)


def _dist_block(a: np.ndarray, b: np.ndarray, kind: MetricKind) -> np.ndarray:
    """Distances between every row of ``a`` (shape (p, m)) and every row of ``b``."""
    return _finish(a[:, None, :] - b[None, :, :], a[:, None, :], b[None, :, :], kind)


def paired_distances(a: np.ndarray, b: np.ndarray, kind: MetricKind) -> np.ndarray:
    """Distances between corresponding rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _finish(a - b, a, b, MetricKind.parse(kind))


def distance_rows(cloud: PointCloud, rows, block: int = 256) -> np.ndarray:
    """Distances from the points ``rows`` to every point of ``cloud``."""
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    x = cloud.coords
    out = np.empty((rows.size, cloud.n))
    step = max(1, block * 64 // max(1, cloud.dim))
    for s in range(0, rows.size, step):
        r = rows[s:s + step]
        out[s:s + step] = _dist_block(x[r], x, cloud.metric_kind)
    # exact zeros on the diagonal regardless of roundoff
    out[np.arange(rows.size), rows] = 0.0
    return out


def pairwise_distances(cloud, metric_kind=None) -> np.ndarray:
    """Full N x N distance matrix of a point cloud.

    Parameters
    ----------
    cloud : PointCloud or array_like
        Points; a bare array is treated as Euclidean unless ``metric_kind``
        is given.

    Returns
    -------
    numpy.ndarray
        Symmetric matrix with an exactly zero diagonal.
    """
    cloud = _as_cloud(cloud, metric_kind)
    d = distance_rows(cloud, np.arange(cloud.n))
    # enforce bitwise symmetry (row blocks are already symmetric up to summation order)
    iu = np.triu_indices(cloud.n, 1)
    d[(iu[1], iu[0])] = d[iu]
    return d


def validate_distance_matrix(d, *, check_triangle: bool = False, allow_duplicates: bool = True) -> np.ndarray:
    """Check the distance-matrix invariants and return ``d`` as a float array."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MetricError(f"distance matrix must be square, got shape {d.shape}")
    if d.shape[0] == 0:
        raise MetricError("distance matrix is empty")
    if not np.all(np.isfinite(d)):
        raise MetricError("distance matrix has non-finite entries")
    scale = max(float(np.max(np.abs(d))), 1e-300)
    if np.max(np.abs(d - d.T)) > 1e-12 * scale:
        raise MetricError("distance matrix is not symmetric")
    if np.any(np.diag(d) != 0):
        raise MetricError("distance matrix diagonal must be exactly zero")
    if np.any(d < 0):
        raise MetricError("distance matrix has negative entries")
    if not allow_duplicates and has_duplicates(d):
        raise MetricError("distance matrix has duplicated points (zero off-diagonal entries)")
    if check_triangle:
        worst = triangle_violation(d)
        if worst > 1e-9 * scale:
            raise MetricError(f"triangle inequality violated by {worst:.3g}")
    return d


def has_duplicates(d) -> bool:
    d = np.asarray(d)
    off = ~np.eye(d.shape[0], dtype=bool)
    return bool(np.any(d[off] == 0))


def triangle_violation(d) -> float:
    """Largest value of d[i,k] - d[i,j] - d[j,k] over all triples (0 if none)."""
    d = np.asarray(d, dtype=float)
    worst = 0.0
    for j in range(d.shape[0]):
        via = d[:, j][:, None] + d[j, :][None, :]
        worst = max(worst, float(np.max(d - via)))
    return worst


@dataclass(frozen=True)
class SntCertificate:
    is_snt: bool
    worst_rayleigh: float
    gamma: float


def is_strict_negative_type(d, tol: float | None = None) -> SntCertificate:
    """Spectral test for strict negative type.

    The quadratic form of ``d`` is restricted to the hyperplane orthogonal to
    the all-ones vector; its largest eigenvalue is the worst Rayleigh
    quotient.  ``tol`` defaults to ``1e-10 * max(d)``.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if n == 1:
        return SntCertificate(True, -np.inf, np.inf)
    if tol is None:
        tol = 1e-10 * float(np.max(d))
    # orthonormal basis of {x : 1^T x = 0} from the Householder reflection
    # that maps e_1 to 1/sqrt(n)
    v = np.ones(n) / np.sqrt(n)
    v[0] -= 1.0
    nv = v @ v
    H = np.eye(n) - 2.0 * np.outer(v, v) / nv
    Q = H[:, 1:]
    restricted = Q.T @ d @ Q
    restricted = 0.5 * (restricted + restricted.T)
    worst = float(eigh(restricted, eigvals_only=True)[-1])
    return SntCertificate(worst < -tol, worst, -worst)


def classical_mds(d, k: int) -> np.ndarray:
    """Classical (Torgerson) MDS embedding into ``k`` dimensions.

    Negative eigenvalues of the double-centered Gram matrix are clipped at
    zero, so rank-deficient inputs give trailing zero coordinates.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if k < 1 or k > max(1, n - 1):
        raise ValueError(f"k must lie in [1, N-1], got k={k} for N={n}")
    sq = d * d
    row = sq.mean(axis=0)
    B = -0.5 * (sq - row[None, :] - row[:, None] + row.mean())
    B = 0.5 * (B + B.T)
    evals, evecs = eigh(B)
    order = np.argsort(evals)[::-1][:k]
    evals = np.clip(evals[order], 0.0, None)
    return evecs[:, order] * np.sqrt(evals)[None, :]


def convex_hull_2d(points) -> np.ndarray:
    """Indices of the vertices of the planar convex hull (Andrew's monotone chain).

    Collinear boundary points are not vertices.  Returned in counterclockwise
    order starting from the lexicographically smallest point.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    order = sorted(range(n), key=lambda i: (pts[i, 0], pts[i, 1]))
    # drop exact duplicates, keeping the first index
    uniq = []
    for i in order:
        if not uniq or not np.array_equal(pts[i], pts[uniq[-1]]):
            uniq.append(i)
    if len(uniq) <= 2:
        return np.array(uniq, dtype=int)

    def cross(o, a, b):
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - (pts[a, 1] - pts[o, 1]) * (pts[b, 0] - pts[o, 0])

    lower: list[int] = []
    for i in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(i)
    upper: list[int] = []
    for i in reversed(uniq):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(i)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=int)


def operator_norm(M) -> float:
    """Spectral norm (largest singular value)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))
