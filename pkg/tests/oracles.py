"""Independent reference computations used as test oracles.

Nothing here calls into the active-set peel solver.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize


def simplex_grid(n: int, target: int = 100_000) -> np.ndarray:
    """Regular grid on the probability simplex with at least ``target`` points."""
    res = 1
    while math.comb(res + n - 1, n - 1) < target:
        res += 1
    bars = np.array(list(itertools.combinations(range(res + n - 1), n - 1)))
    if bars.size == 0:
        return np.ones((1, 1))
    padded = np.column_stack([np.full(len(bars), -1), bars, np.full(len(bars), res + n - 1)])
    return (np.diff(padded, axis=1) - 1) / res


def grid_max_quadratic_entropy(d, target: int = 100_000) -> float:
    g = simplex_grid(d.shape[0], target)
    return float(np.max(np.einsum("ij,jk,ik->i", g, d, g)))


def maximize_quadratic_entropy(d, starts: int = 20, seed: int = 0) -> np.ndarray:
    """Projected-free maximization via softmax parametrization and many restarts."""
    n = d.shape[0]
    rng = np.random.default_rng(seed)

    def neg(z):
        p = np.exp(z - z.max())
        p /= p.sum()
        return -(p @ d @ p)

    best, best_val = None, np.inf
    for _ in range(starts):
        r = minimize(neg, rng.standard_normal(n), method="BFGS", options={"gtol": 1e-12})
        if r.fun < best_val:
            best, best_val = r.x, r.fun
    p = np.exp(best - best.max())
    return p / p.sum()


def brute_force_peel_support(d, tol: float = 1e-9) -> tuple[int, ...]:
    """Support of the maximizer by enumerating supports and solving the KKT system on each.

    For strictly negative type d the maximizer is unique; on its support S,
    d_S p_S is constant and (d p)_k <= that constant off S.
    """
    n = d.shape[0]
    best, best_val = None, -np.inf
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            S = list(S)
            dS = d[np.ix_(S, S)]
            try:
                w = np.linalg.solve(dS, np.ones(size)) if size > 1 else np.ones(1)
            except np.linalg.LinAlgError:
                continue
            if size > 1 and not w.sum() > 0:
                continue
            p = w / w.sum()
            if np.any(p <= tol):
                continue
            full = np.zeros(n)
            full[S] = p
            val = full @ d @ full
            if val > best_val + 1e-12:
                best, best_val = tuple(S), val
    return best


def brute_force_rho(d, x: int) -> tuple[float, list[int]]:
    """First distinct radius at which x leaves the peel of the closed ball (full recomputation)."""
    from peelkit.peel import peel

    row = d[x]
    for r in np.unique(row[row > 0]):
        ball = np.flatnonzero(row <= r)
        ball = np.concatenate([[x], ball[ball != x]])
        support = peel(d[np.ix_(ball, ball)]).support
        if 0 not in support:
            return float(r), sorted(ball.tolist())
    return math.inf, list(range(d.shape[0]))


def kendall_tau_b_quadratic(a, b) -> float:
    """Tau-b by explicit pair enumeration."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    conc = disc = ta = tb = 0
    n = a.size
    for i in range(n):
        for j in range(i + 1, n):
            sa = np.sign(a[i] - a[j])
            sb = np.sign(b[i] - b[j])
            if sa == 0 and sb == 0:
                continue
            if sa == 0:
                ta += 1
            elif sb == 0:
                tb += 1
            elif sa == sb:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / math.sqrt((conc + disc + ta) * (conc + disc + tb))


def monte_carlo_abs_sin(m: int, samples: int, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, m))
    v = rng.standard_normal((samples, m))
    c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
    return float(np.mean(np.sqrt(1 - c * c)))


def random_snt_matrix(rng, n: int) -> np.ndarray:
    """Euclidean distances of a random cloud, raised to a random power in (0.3, 1]."""
    x = rng.standard_normal((n, int(rng.integers(1, 6))))
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    return d ** rng.uniform(0.3, 1.0)
