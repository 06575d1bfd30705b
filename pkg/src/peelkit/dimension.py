"""Local intrinsic dimension and singularity scores.

Dimension estimates come from the pairwise-angle skewness statistic (ESSa,
simplex size one) inverted through its isotropic expectation curve, and from
the slope of the volume growth transform.  The gradient-norm score measures
how fast a local dimension summary changes across peel neighborhoods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import kendalltau, rankdata

from .metric import MetricKind, classical_mds
from .neighborhoods import NeighborIndex, _as_index, iterated_neighborhood
from .parallel import pmap
from .peel import peel

MAX_PAIRS = 10_000
M_MAX = 1e4


class DimensionError(ValueError):
    pass


def essa_statistic(local_points, center=None, *, max_pairs: int = MAX_PAIRS, seed=None) -> float:
    """Mean |sin| of the angle between pairs of centered vectors.

    Parameters
    ----------
    local_points : array_like, shape (n, m)
    center : array_like, optional
        Point subtracted before taking angles; the centroid when omitted.
    max_pairs : int
        Above this many unordered pairs, ``max_pairs`` pairs are drawn
        uniformly (with replacement) using ``seed``.
    """
    x = np.asarray(local_points, dtype=float)
    c = x.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    v = x - c
    norms = np.linalg.norm(v, axis=1)
    scale = max(float(norms.max(initial=0.0)), 1e-300)
    keep = norms > 1e-12 * scale
    v = v[keep] / norms[keep, None]
    n = v.shape[0]
    if n < 2:
        raise DimensionError("fewer than two points differ from the center")
    n_pairs = n * (n - 1) // 2
    if n_pairs <= max_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        i = rng.integers(0, n, max_pairs)
        j = (i + rng.integers(1, n, max_pairs)) % n
    cos = np.einsum("ij,ij->i", v[i], v[j])
    return float(np.mean(np.sqrt(np.clip(1.0 - cos * cos, 0.0, 1.0))))


def ess_expectation(m) -> np.ndarray | float:
    """E|sin(theta)| for two independent isotropic directions in R^m (real m >= 1).

    The angle has density proportional to sin^(m-2), giving
    Gamma(m/2)^2 / (Gamma((m-1)/2) Gamma((m+1)/2)).
    """
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < 1) or np.any(~np.isfinite(m_arr)):
        raise DimensionError("dimension must be a finite real >= 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.exp(2 * gammaln(m_arr / 2) - gammaln((m_arr - 1) / 2) - gammaln((m_arr + 1) / 2))
    t = np.where(m_arr == 1, 0.0, t)
    return float(t) if t.ndim == 0 else t


def essa_dimension_from_statistic(stat: float, tol: float = 1e-6) -> float:
    """Invert the expectation curve by bisection on [1, 1e4]."""
    if not np.isfinite(stat):
        return math.nan
    lo, hi = 1.0, M_MAX
    if stat <= 0:
        return lo
    if stat >= ess_expectation(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ess_expectation(mid) < stat:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def essa_dimension(local_points, center=None, *, max_pairs: int = MAX_PAIRS, seed=None) -> float:
    return essa_dimension_from_statistic(essa_statistic(local_points, center, max_pairs=max_pairs, seed=seed))


def _fit_line(x, y, w=None):
    if w is None:
        w = np.ones_like(x)
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if not sxx > 0:
        raise DimensionError("degenerate regressor")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    return slope, ym - slope * xm


def vgt_dimension(sorted_radii, window=None, robust: bool = True, *, c: float = 4.685,
                  max_iter: int = 25, tol: float = 1e-8) -> float:
    """Slope of log(count) against log(radius) over a window of neighbor radii.

    ``sorted_radii[i - 1]`` is the radius enclosing ``i`` neighbors.  ``window``
    is an inclusive pair of 1-based counts; the default is
    ``(ceil(k / 4), k)`` for ``k = len(sorted_radii)``.  Robust mode
    reweights by Tukey's bisquare with scale MAD / 0.6745.
    """
    r = np.asarray(sorted_radii, dtype=float)
    k = r.size
    lo, hi = window if window is not None else (max(1, math.ceil(k / 4)), k)
    if not (1 <= lo and hi <= k and hi - lo + 1 >= 3):
        raise DimensionError(f"window {lo}..{hi} invalid for {k} radii")
    counts = np.arange(lo, hi + 1, dtype=float)
    rw = r[lo - 1:hi]
    if np.any(rw <= 0):
        raise DimensionError("zero radius in window")
    if np.any(np.diff(rw) < 0):
        raise DimensionError("radii must be ascending")
    x, y = np.log(rw), np.log(counts)
    slope, icpt = _fit_line(x, y)
    if not robust:
        return float(slope)
    for _ in range(max_iter):
        res = y - (slope * x + icpt)
        s = np.median(np.abs(res - np.median(res))) / 0.6745
        if s <= 1e-12 * max(1.0, np.abs(y).max()):
            break
        u = res / (c * s)
        w = np.where(np.abs(u) < 1, (1 - u * u) ** 2, 0.0)
        if np.count_nonzero(w) < 2:
            break
        new_slope, icpt = _fit_line(x, y, w)
        done = abs(new_slope - slope) < tol
        slope = new_slope
        if done:
            break
    return float(slope)


@dataclass(frozen=True)
class NeighborhoodFamily:
    """Which local neighborhood to gather: ``knn``, ``peel``, ``iterated_peel`` or ``double_radius``."""

    kind: str
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("knn", "peel", "iterated_peel", "double_radius"):
            raise ValueError(f"unknown neighborhood family {self.kind!r}")
        if self.kind == "knn" and (self.k is None or self.k < 3):
            raise ValueError("knn family needs k >= 3")

    @property
    def tag(self) -> str:
        return f"knn{self.k}" if self.kind == "knn" else self.kind

    @classmethod
    def parse(cls, text: str) -> "NeighborhoodFamily":
        text = text.strip().lower()
        if text.startswith("knn"):
            k = text[3:].lstrip(":=")
            return cls("knn", int(k) if k else 7)
        return cls(text.replace("-", "_"))

    def members(self, x: int, index: NeighborIndex, neighborhoods=None) -> np.ndarray:
        if self.kind == "knn":
            nb, _ = index.knn(x, self.k)
            return np.concatenate([[x], nb]).astype(int)
        if neighborhoods is None:
            raise ValueError(f"{self.kind} family needs peel neighborhoods")
        if self.kind == "peel":
            return neighborhoods[x].members
        if self.kind == "iterated_peel":
            return iterated_neighborhood(x, 2, neighborhoods)
        row = index.row(x)
        return np.flatnonzero(row <= 2.0 * neighborhoods[x].rho)


@dataclass
class DimensionField:
    values: np.ndarray
    family: str
    errors: dict = field(default_factory=dict)

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)


def _local_coords(index: NeighborIndex, members: np.ndarray, use_mds: bool) -> np.ndarray:
    if use_mds:
        return classical_mds(index.submatrix(members), members.size - 1)
    return index.coords[members]


def _dimension_task(state, x):
    members = state["family"].members(x, state["index"], state["neighborhoods"])
    if members.size < 3:
        return math.nan
    pts = _local_coords(state["index"], members, state["use_mds"])
    center = pts[np.flatnonzero(members == x)[0]] if state["centering"] == "basepoint" else None
    try:
        return essa_dimension(pts, center, max_pairs=state["max_pairs"],
                              seed=np.random.default_rng([state["seed"], x]))
    except DimensionError as exc:
        return exc


def local_dimension_field(index, family: NeighborhoodFamily, use_mds: bool | None = None, *,
                          neighborhoods=None, centering: str = "centroid", seed: int = 0,
                          max_pairs: int = MAX_PAIRS, workers: int | None = None) -> DimensionField:
    """ESSa dimension estimate over each point's neighborhood.

    Non-Euclidean data (or a bare distance matrix) must go through classical
    MDS; ``use_mds=None`` picks that automatically.  Points whose
    neighborhood has fewer than three points, or whose estimate fails, get
    NaN; failures are listed in ``errors``.
    """
    index = _as_index(index)
    euclid = index.cloud is not None and index.cloud.metric_kind is MetricKind.EUCLIDEAN
    if use_mds is None:
        use_mds = not euclid
    elif not use_mds and not euclid:
        raise ValueError("non-Euclidean data needs use_mds=True")
    if centering not in ("centroid", "basepoint"):
        raise ValueError("centering must be 'centroid' or 'basepoint'")
    state = {"index": index, "family": family, "neighborhoods": neighborhoods, "use_mds": use_mds,
             "centering": centering, "seed": int(seed), "max_pairs": max_pairs}
    res = pmap(_dimension_task, range(index.n), state, workers=workers)
    errors = {x: str(r) for x, r in enumerate(res) if isinstance(r, Exception)}
    vals = np.array([math.nan if isinstance(r, Exception) else r for r in res], dtype=float)
    return DimensionField(vals, family.tag, errors)


def gradient_estimate(f, x: int, lam, index) -> np.ndarray:
    """Peel-weighted discrete gradient of ``f`` at ``x`` over the point set ``lam``.

    Sums p(x') (f(x') - f(x)) / |x' - x| * (x' - x) / |x' - x| over the
    members x' != x of ``lam``, with p the peel of ``lam`` (not renormalized
    after dropping ``x``).
    """
    index = _as_index(index)
    if index.coords is None or index.cloud.metric_kind is not MetricKind.EUCLIDEAN:
        raise ValueError("gradient estimate needs Euclidean coordinates")
    f = np.asarray(f, dtype=float)
    lam = np.asarray(lam, dtype=int)
    if x not in lam:
        lam = np.concatenate([[x], lam])
    if lam.size < 2:
        raise ValueError("neighborhood needs at least two points")
    d = index.submatrix(lam)
    p = peel(d).p
    others = lam != x
    diff = index.coords[lam[others]] - index.coords[x]
    r = np.linalg.norm(diff, axis=1)
    if np.any(r == 0):
        raise ValueError("duplicate coordinates inside the neighborhood")
    coef = p[others] * (f[lam[others]] - f[x]) / r ** 2
    return coef @ diff


@dataclass
class ScoreField:
    values: np.ndarray
    level: int
    alpha: str

    def quantiles(self) -> np.ndarray:
        return score_quantiles(self.values)


_SUMMARIES = {"median": np.median, "mean": np.mean, "max": np.max}


def gradient_norm_score(index, j: int, dim_field: DimensionField, neighborhoods, alpha: str = "median",
                        use_log: bool = True) -> ScoreField:
    """s_j(x) = |gradient over nu_j(x) of log alpha(m_j over nu_j(.))|.

    NaN dimensions anywhere in a summary make that summary NaN, and NaN
    summaries anywhere in nu_j(x) make s_j(x) NaN.
    """
    if j not in (1, 2):
        raise ValueError("level must be 1 or 2")
    if alpha not in _SUMMARIES:
        raise ValueError(f"alpha must be one of {sorted(_SUMMARIES)}")
    index = _as_index(index)
    summary = _SUMMARIES[alpha]
    nu = [iterated_neighborhood(x, j, neighborhoods) for x in range(index.n)]
    m = dim_field.values
    g = np.array([summary(m[v]) for v in nu])
    if use_log:
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.log(g)
    s = np.empty(index.n)
    for x in range(index.n):
        if not np.all(np.isfinite(g[nu[x]])):
            s[x] = math.nan
            continue
        s[x] = np.linalg.norm(gradient_estimate(g, x, nu[x], index))
    return ScoreField(s, j, alpha)


def score_quantiles(values) -> np.ndarray:
    """Empirical CDF value of each score among the defined scores (NaN stays NaN)."""
    v = np.asarray(values, dtype=float)
    out = np.full(v.shape, math.nan)
    ok = np.isfinite(v)
    if ok.any():
        out[ok] = rankdata(v[ok], method="max") / ok.sum()
    return out


def kendall_tau_b(a, b) -> float:
    """Kendall tau-b with tie corrections.

    Positions where either value is NaN are dropped.  Returns NaN when either
    remaining sequence is constant.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equal-length sequences of length >= 2")
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    if a.size < 2:
        return math.nan
    if np.all(a == a[0]) or np.all(b == b[0]):
        return math.nan
    return float(kendalltau(a, b, variant="b").statistic)


def vgt_field(index, k: int, window=None, robust: bool = True) -> np.ndarray:
    """VGT estimate at every point from its k nearest-neighbor radii."""
    index = _as_index(index)
    out = np.empty(index.n)
    for x in range(index.n):
        _, r = index.knn(x, k)
        try:
            out[x] = vgt_dimension(r, window, robust)
        except DimensionError:
            out[x] = math.nan
    return out
