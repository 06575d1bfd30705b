"""Seeded samplers for the experimental geometries.

Every sampler takes a ``seed`` (anything accepted by
``numpy.random.default_rng``) and is deterministic given it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import gamma, gammaln

from .metric import MetricKind, PointCloud


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_gaussian(m: int, n: int, seed=None) -> np.ndarray:
    return _rng(seed).standard_normal((n, m))


def sample_sphere(m: int, n: int, seed=None) -> np.ndarray:
    """Uniform points on the unit sphere S^m in R^{m+1}."""
    x = _rng(seed).standard_normal((n, m + 1))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sample_ball(m: int, n: int, seed=None) -> np.ndarray:
    """Uniform points in the unit ball of R^m."""
    rng = _rng(seed)
    g = rng.standard_normal((n, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.random(n) ** (1.0 / m)
    return g * r[:, None]


def sample_torus(m: int, n: int, seed=None) -> np.ndarray:
    """Uniform points on the flat torus [0, 1)^m."""
    return _rng(seed).random((n, m))


def sample_annulus(inner: float, outer: float, n: int, seed=None) -> np.ndarray:
    """Area-uniform points in the planar annulus inner <= |x| <= outer."""
    if not 0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    rng = _rng(seed)
    r = np.sqrt(inner ** 2 + rng.random(n) * (outer ** 2 - inner ** 2))
    t = rng.random(n) * 2 * np.pi
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


@dataclass(frozen=True)
class NoiseSpec:
    """Isotropic Gaussian noise, given either by its per-axis std or its expected norm."""

    mode: str
    value: float
    target_dim: int

    def __post_init__(self):
        if self.mode not in ("std_dev", "expected_norm"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.value < 0:
            raise ValueError("noise value must be nonnegative")
        if self.target_dim < 1:
            raise ValueError("target_dim must be positive")

    def per_axis_std(self) -> float:
        if self.mode == "std_dev":
            return float(self.value)
        D = self.target_dim
        # E|z| for z ~ N(0, s^2 I_D) is s * sqrt(2) * Gamma((D+1)/2) / Gamma(D/2)
        chi_mean = np.sqrt(2.0) * np.exp(gammaln((D + 1) / 2.0) - gammaln(D / 2.0))
        return float(self.value / chi_mean)


def embed_with_noise(points, spec: NoiseSpec, seed=None) -> np.ndarray:
    """Zero-pad to ``spec.target_dim`` coordinates and add isotropic Gaussian noise."""
    x = np.asarray(points, dtype=float)
    if x.shape[1] > spec.target_dim:
        raise ValueError("target_dim is smaller than the input dimension")
    out = np.zeros((x.shape[0], spec.target_dim))
    out[:, : x.shape[1]] = x
    s = spec.per_axis_std()
    if s > 0:
        out += s * _rng(seed).standard_normal(out.shape)
    return out


def sample_pinched_torus(n: int, seed=None, R: float = 2.0) -> np.ndarray:
    """Torus of revolution whose tube radius sin(theta/2) vanishes at theta = 0."""
    rng = _rng(seed)
    theta = rng.random(n) * 2 * np.pi
    phi = rng.random(n) * 2 * np.pi
    return pinched_torus_point(theta, phi, R)


def pinched_torus_point(theta, phi, R: float = 2.0) -> np.ndarray:
    tube = np.sin(np.asarray(theta) / 2.0)
    ring = R + tube * np.cos(phi)
    return np.column_stack([ring * np.cos(theta), ring * np.sin(theta), tube * np.sin(phi)])


def weibull_mean_spacing(m: int, n: int) -> float:
    """Approximate mean nearest-neighbor angular spacing of n uniform points on S^{m-1}."""
    if m < 2 or n < 2:
        raise ValueError("need m >= 2 and n >= 2")
    scale = ((m - 1) / (n - 1) * beta_fn((m - 1) / 2.0, 0.5)) ** (1.0 / (m - 1))
    return float(gamma(m / (m - 1.0)) * scale)


@dataclass(frozen=True)
class HairBallSpec:
    m: int
    n: int
    n_interval: int
    attach: bool = False
    match: bool = False

    def __post_init__(self):
        if self.m < 2 or self.n < 10 or self.n_interval < 1:
            raise ValueError("hair ball needs m >= 2, N >= 10, N' >= 1")

    @property
    def length(self) -> float:
        if self.match:
            return (self.n_interval + 1) * weibull_mean_spacing(self.m + 1, self.n)
        return 1.0


# stratum labels shared by the composite samplers
SPHERE, INTERVAL, ATTACHMENT = 0, 1, 2


def sample_hair_ball(spec: HairBallSpec, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Sphere S^m plus an interval sticking out along +e_1 from (1, 0, ..., 0).

    Returns points in R^{m+1} and labels (0 sphere, 1 interval, 2 attachment
    point).  Rows are ordered sphere, interval (by distance from the sphere),
    then the attachment point when ``spec.attach`` is set.
    """
    rng = _rng(seed)
    sphere = sample_sphere(spec.m, spec.n, rng)
    t = np.sort(rng.random(spec.n_interval)) * spec.length
    t[t == 0] = np.finfo(float).tiny
    interval = np.zeros((spec.n_interval, spec.m + 1))
    interval[:, 0] = 1.0 + t
    parts = [sphere, interval]
    labels = [np.full(spec.n, SPHERE), np.full(spec.n_interval, INTERVAL)]
    if spec.attach:
        a = np.zeros((1, spec.m + 1))
        a[0, 0] = 1.0
        parts.append(a)
        labels.append(np.array([ATTACHMENT]))
    return np.vstack(parts), np.concatenate(labels)


def sample_stratified_cdb(n1: int, n2: int, n3: int, seed=None, spacing: float = 3.0) -> tuple[np.ndarray, np.ndarray]:
    """Unit circle, unit disk and unit 3-ball with centers 0, 3, 6 along the x-axis.

    The circle and disk lie in the xy-plane.  Labels are the stratum
    dimensions 1, 2 and 3.
    """
    if min(n1, n2, n3) < 1:
        raise ValueError("stratum sizes must be positive")
    rng = _rng(seed)
    t = rng.random(n1) * 2 * np.pi
    circle = np.column_stack([np.cos(t), np.sin(t), np.zeros(n1)])
    disk = np.column_stack([sample_ball(2, n2, rng), np.zeros(n2)])
    disk[:, 0] += spacing
    ball = sample_ball(3, n3, rng)
    ball[:, 0] += 2 * spacing
    pts = np.vstack([circle, disk, ball])
    labels = np.concatenate([np.full(n1, 1), np.full(n2, 2), np.full(n3, 3)])
    return pts, labels


def sample_strand(m: int = 10, n: int = 1000, n_extra: int = 3, offset: float = 0.1, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Sphere S^m plus a short strand of points just outside it along +e_1.

    The extra points sit at radii 1 + offset * (1, 2, ...) and are labeled 1
    (sphere points are labeled 0).
    """
    rng = _rng(seed)
    sphere = sample_sphere(m, n, rng)
    extra = np.zeros((n_extra, m + 1))
    extra[:, 0] = 1.0 + offset * np.arange(1, n_extra + 1)
    return np.vstack([sphere, extra]), np.concatenate([np.zeros(n, dtype=int), np.ones(n_extra, dtype=int)])


def sample_sphere_with_cluster(n: int = 1000, n_cluster: int = 11, offset: float = 0.5, length: float = 1.0,
                               seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Uniform S^2 sample plus equispaced points on a segment just left of the sphere.

    The segment is parallel to the z-axis at x = -(1 + offset).  Labels: 0
    sphere, 1 segment.
    """
    sphere = sample_sphere(2, n, seed)
    z = np.linspace(-length / 2, length / 2, n_cluster)
    seg = np.column_stack([np.full(n_cluster, -(1.0 + offset)), np.zeros(n_cluster), z])
    return np.vstack([sphere, seg]), np.concatenate([np.zeros(n, dtype=int), np.ones(n_cluster, dtype=int)])


def cloud(points, kind=MetricKind.EUCLIDEAN) -> PointCloud:
    return PointCloud(points, kind)
