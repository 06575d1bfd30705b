"""Weightings, diversity, quadratic entropy and the peel.

The peel of a strict-negative-type distance matrix ``d`` is the support of
the maximizer of the quadratic entropy ``p^T d p`` over the probability
simplex.  :func:`peel` computes that maximizer by repeatedly solving
``d_J w = 1`` and discarding indices with negative weight.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import dsysv

# relative size below which a solved weight is treated as exactly zero
ZERO_TOL = 1e-12


class PeelError(ValueError):
    """A restricted distance matrix could not be solved.

    This signals a matrix that is not of strict negative type, usually
    because two points coincide.
    """

    def __init__(self, message: str, support=None):
        super().__init__(message)
        self.support = None if support is None else [int(i) for i in support]


@dataclass(frozen=True)
class PeelDistribution:
    p: np.ndarray
    support: np.ndarray

    def quadratic_entropy(self, d) -> float:
        return quadratic_entropy(d, self.p)

    def to_json(self, d=None) -> dict:
        out = {"p": [float(v) for v in self.p], "support": [int(i) for i in self.support]}
        if d is not None:
            out["quadratic_entropy"] = self.quadratic_entropy(d)
        return out

    def embed(self, idx, n: int) -> "PeelDistribution":
        """Lift a distribution on the points ``idx`` to one on ``range(n)``."""
        idx = np.asarray(idx, dtype=int)
        p = np.zeros(n)
        p[idx] = self.p
        return PeelDistribution(p, np.sort(idx[self.support]))


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray
    scale_t: float
    magnitude: float


def similarity_matrix(d, t: float) -> np.ndarray:
    """Z = exp(-t d), entrywise."""
    if not t > 0:
        raise ValueError("scale t must be positive")
    return np.exp(-t * np.asarray(d, dtype=float))


def weighting(Z, t: float = float("nan")) -> WeightVector:
    """Solve ``Z w = 1`` by Cholesky factorization.

    ``Z`` must be symmetric positive definite, which holds for
    ``Z = exp(-t d)`` whenever ``d`` is of strict negative type.
    """
    Z = np.asarray(Z, dtype=float)
    ones = np.ones(Z.shape[0])
    try:
        factor = cho_factor(Z, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("similarity matrix is not positive definite") from exc
    w = cho_solve(factor, ones, check_finite=False)
    resid = Z @ w - ones
    if np.linalg.norm(resid) > 1e-10 * np.sqrt(len(w)):
        w = w - cho_solve(factor, resid, check_finite=False)
    return WeightVector(w, t, float(w.sum()))


def magnitude(d, t: float) -> float:
    return weighting(similarity_matrix(d, t), t).magnitude


def diversity(Z, p, q: float) -> float:
    """Diversity of order ``q`` of the distribution ``p`` under similarity ``Z``.

    ``q = 1`` and ``q = inf`` are the limiting forms: the product
    ``prod (Zp)_j^{-p_j}`` and ``1 / max_{p_j > 0} (Zp)_j`` respectively.
    """
    if q < 1:
        raise ValueError("diversity order q must be >= 1")
    Z = np.asarray(Z, dtype=float)
    p = np.asarray(p, dtype=float)
    supp = p > 0
    zp = (Z @ p)[supp]
    ps = p[supp]
    if q == 1:
        return float(np.exp(-np.sum(ps * np.log(zp))))
    if np.isinf(q):
        return float(1.0 / np.max(zp))
    return float(np.exp(np.log(np.sum(ps * zp ** (q - 1.0))) / (1.0 - q)))


def quadratic_entropy(d, p) -> float:
    p = np.asarray(p, dtype=float)
    return float(p @ np.asarray(d, dtype=float) @ p)


def _solve_ones(a: np.ndarray, support) -> np.ndarray:
    """Solve a w = 1 with a symmetric indefinite (Bunch-Kaufman) factorization."""
    n = a.shape[0]
    ones = np.ones(n)
    _, _, w, info = dsysv(a, ones)
    if info != 0 or not np.all(np.isfinite(w)):
        raise PeelError(f"singular restricted distance matrix on support {list(map(int, support))}", support)
    resid = a @ w - ones
    if np.linalg.norm(resid) > 1e-10 * np.sqrt(n):
        _, _, dw, _ = dsysv(a, resid)
        w = w - dw
    return w


def peel(d, *, validate: bool = False) -> PeelDistribution:
    """Quadratic-entropy maximizing distribution over the simplex.

    Starts from ``d^{-1} 1`` normalized, and while any weight is negative
    restricts to the strictly positive indices and re-solves.  Weights with
    magnitude below ``1e-12`` times the largest weight are treated as exact
    zeros and excluded from the support.

    Parameters
    ----------
    d : array_like
        N x N distance matrix of strict negative type.
    validate : bool
        Run the O(N^3) spectral negative-type check first.

    Raises
    ------
    PeelError
        A restricted matrix is singular (duplicate points or a matrix not of
        strict negative type).
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if validate:
        from .metric import is_strict_negative_type

        cert = is_strict_negative_type(d)
        if not cert.is_snt:
            raise PeelError(f"matrix is not of strict negative type (worst Rayleigh quotient {cert.worst_rayleigh:.3g})")
    if n == 1:
        return PeelDistribution(np.ones(1), np.zeros(1, dtype=int))
    active = np.arange(n)
    for _ in range(n):
        if active.size < 2:
            raise PeelError(f"support collapsed to {active.tolist()}", active)
        sub = d[np.ix_(active, active)]
        w = _solve_ones(sub, active)
        total = w.sum()
        if not total > 0:
            raise PeelError(f"non-positive scale-zero magnitude on support {active.tolist()}", active)
        q = w / total
        q[np.abs(q) <= ZERO_TOL * np.max(np.abs(q))] = 0.0
        if np.any(q < 0):
            active = active[q > 0]
            continue
        p = np.zeros(n)
        p[active] = q
        keep = q > 0
        p /= p.sum()
        return PeelDistribution(p, active[keep])
    raise PeelError("peel did not terminate within N restrictions", active)


def peel_support(d) -> np.ndarray:
    return peel(d).support


def peel_layers(d, max_layers: int | None = None) -> list[np.ndarray]:
    """Iterated peels: layer l is the peel of the points left after layers < l."""
    d = np.asarray(d, dtype=float)
    remaining = np.arange(d.shape[0])
    layers: list[np.ndarray] = []
    while remaining.size > 0 and (max_layers is None or len(layers) < max_layers):
        if remaining.size == 1:
            layers.append(remaining.copy())
            break
        supp = peel(d[np.ix_(remaining, remaining)]).support
        layer = remaining[supp]
        layers.append(layer)
        remaining = np.setdiff1d(remaining, layer)
    return layers


def ned(p, q, d) -> float:
    """Normalized energy distance between two distributions on the same points."""
    d = np.asarray(d, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diam = float(np.max(d))
    if diam <= 0:
        raise ValueError("NED needs at least two distinct points")
    val = (2.0 * p @ d @ q - p @ d @ p - q @ d @ q) / (2.0 * diam)
    if -1e-12 <= val < 0:
        val = 0.0
    return float(val)


def model_distance_matrix(n: int) -> np.ndarray:
    """Origin plus a regular simplex: unit distances to the origin, sqrt(2) between others."""
    if n < 2:
        raise ValueError("model matrix needs N >= 2")
    d = np.sqrt(2.0) * (np.ones((n, n)) - np.eye(n))
    d[0, 1:] = 1.0
    d[1:, 0] = 1.0
    return d


def model_origin_in_peel(n: int) -> bool:
    return bool(0 in peel(model_distance_matrix(n)).support)


# conclusions' 4-point metric (strict negative type but not Euclidean)
COUNTEREXAMPLE = np.array([[0.0, 1, 1, 2], [1, 0, 2, 1], [1, 2, 0, 2], [2, 1, 2, 0]])


def perturbed_counterexample(eps: float) -> np.ndarray:
    d = COUNTEREXAMPLE + eps
    np.fill_diagonal(d, 0.0)
    return d


def drop_one_condition(d, support, drop: int) -> bool:
    """Sign test for whether removing ``drop`` from a peel leaves a self-peeling set.

    With ``w0 = d_J^{-1} 1`` on the peel ``J`` and ``Delta = d_I^{-1} delta``
    for ``I = J - {drop}``, the remainder peels to itself iff
    ``w0_I + w0_drop * Delta > 0``.
    """
    d = np.asarray(d, dtype=float)
    J = [int(j) for j in support if j != drop] + [int(drop)]
    dJ = d[np.ix_(J, J)]
    w0 = _solve_ones(dJ, J)
    dI = dJ[:-1, :-1]
    delta = dJ[:-1, -1]
    Delta = np.linalg.solve(dI, delta)
    lhs = w0[:-1] + w0[-1] * Delta
    return bool(np.all(lhs > ZERO_TOL * np.max(np.abs(lhs))))


def chain_condition(d, support, subset, order=None) -> bool:
    """Sufficient condition for ``peel(d|I) = I`` along a removal sequence.

    Points of ``support - subset`` are removed one at a time (in ``order``,
    default ascending).  Returns True when the worst-case bound holds at every
    step, which certifies that the subset peels to itself.  A False return is
    inconclusive.
    """
    d = np.asarray(d, dtype=float)
    support = [int(j) for j in support]
    subset = set(int(i) for i in subset)
    removed = [j for j in support if j not in subset] if order is None else list(order)
    current = list(support)
    size = len(support)
    for ell, k in enumerate(removed):
        rest = [j for j in current if j != k]
        ordered = rest + [k]
        dl = d[np.ix_(ordered, ordered)]
        w = _solve_ones(dl, ordered)
        Delta = np.linalg.solve(dl[:-1, :-1], dl[:-1, -1])
        mean = Delta.sum() / (size - ell)
        eps = Delta - mean
        if w[-1] <= 0:
            return False
        if not np.max(np.abs(eps)) < mean + np.min(w[:-1]) / w[-1]:
            return False
        current = rest
    return True


def hereditary_violations(d, support=None, max_exhaustive: int = 8, samples: int = 256, rng=None) -> list[tuple[int, ...]]:
    """Subsets ``I`` of the peel (``|I| >= 2``) whose own peel is not ``I``.

    Exhaustive for peels of at most ``max_exhaustive`` points, otherwise
    ``samples`` random subsets are tested.  Subsets are enumerated by
    decreasing size, then lexicographically.
    """
    d = np.asarray(d, dtype=float)
    if support is None:
        support = peel(d).support
    support = [int(j) for j in support]
    k = len(support)
    if k <= max_exhaustive:
        candidates = (c for size in range(k - 1, 1, -1) for c in itertools.combinations(support, size))
    else:
        rng = np.random.default_rng(rng)
        picks = set()
        for _ in range(samples):
            size = int(rng.integers(2, k))
            picks.add(tuple(sorted(rng.choice(support, size=size, replace=False).tolist())))
        candidates = sorted(picks, key=lambda c: (-len(c), c))
    bad = []
    for I in candidates:
        sub = d[np.ix_(I, I)]
        if len(peel(sub).support) != len(I):
            bad.append(tuple(int(i) for i in I))
    return bad
