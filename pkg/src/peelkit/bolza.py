"""Uniform sampling from the Bolza surface and its intrinsic distance.

The fundamental domain is the regular hyperbolic octagon in the Poincare
disk: the unit disk minus eight circles orthogonal to the boundary, centered
at angles k*pi/4.  Opposite sides are identified by the hyperbolic
translations

    g_k(z) = (a z + b e^{i k pi/4}) / (b e^{-i k pi/4} z + a),
    a = 1 + sqrt(2),  b = sqrt(a^2 - 1),

which move side k+4 onto side k.  Distances on the surface are minima of
Poincare distances over the 48 translates of the domain that share an edge
or a vertex with it.
"""
from __future__ import annotations

import numpy as np

SQRT2 = np.sqrt(2.0)
CIRCLE_RADIUS = np.sqrt((SQRT2 - 1.0) / 2.0)
CIRCLE_CENTER = np.sqrt((SQRT2 + 1.0) / 2.0)
R_STAR = 2.0 ** -0.25
C_SCALE = R_STAR ** 2 / (1.0 - R_STAR ** 2)
ANGLES = np.arange(8) * np.pi / 4.0
CENTERS = CIRCLE_CENTER * np.exp(1j * ANGLES)

_A = 1.0 + SQRT2
_B = np.sqrt(_A ** 2 - 1.0)


def generator(k: int) -> np.ndarray:
    """2x2 complex matrix of the side pairing translating toward angle k*pi/4."""
    e = np.exp(1j * (k % 8) * np.pi / 4.0)
    return np.array([[_A, _B * e], [_B * np.conj(e), _A]], dtype=complex)


GENERATORS = [generator(k) for k in range(8)]


def mobius(M: np.ndarray, z):
    z = np.asarray(z, dtype=complex)
    return (M[0, 0] * z + M[0, 1]) / (M[1, 0] * z + M[1, 1])


def poincare_distance(z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = np.abs(z - w)
    den = np.abs(1.0 - np.conj(z) * w)
    return 2.0 * np.arctanh(np.minimum(num / den, 1.0 - 1e-16))


def _neighbor_translates() -> list[np.ndarray]:
    """Group elements whose image of the domain touches the domain (48 of them)."""
    # orbit points of 0 within twice the center-to-vertex distance are
    # exactly the centers of the edge- and vertex-adjacent octagons
    reach = 2.0 * poincare_distance(0.0, R_STAR * np.exp(1j * np.pi / 8)) + 1e-6
    found = {}
    frontier = [np.eye(2, dtype=complex)]
    for _ in range(4):
        nxt = []
        for M in frontier:
            for g in GENERATORS:
                P = M @ g
                z = complex(mobius(P, 0.0))
                if float(poincare_distance(0.0, z)) > reach + 1.0 or abs(z) < 1e-9:
                    continue
                key = (round(z.real, 8), round(z.imag, 8))
                if key not in found:
                    found[key] = P / np.sqrt(np.linalg.det(P))
                    nxt.append(P)
        frontier = nxt
    out = [M for key, M in sorted(found.items())
           if float(poincare_distance(0.0, complex(*key))) <= reach]
    if len(out) != 48:
        raise RuntimeError(f"expected 48 neighboring translates, found {len(out)}")
    return out


TRANSLATES = _neighbor_translates()


def in_domain(z) -> np.ndarray:
    """True for points of the open disk lying outside all eight side circles."""
    z = np.asarray(z, dtype=complex)
    inside = np.abs(z) < 1.0
    for c in CENTERS:
        inside &= np.abs(z - c) > CIRCLE_RADIUS
    return inside


def reduce_to_domain(z, max_steps: int = 64):
    """Map points of the disk into the fundamental domain by side pairings."""
    z = np.array(z, dtype=complex, copy=True)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    for _ in range(max_steps):
        moved = False
        for k, c in enumerate(CENTERS):
            out = np.abs(z - c) < CIRCLE_RADIUS
            if np.any(out):
                # beyond side k: translate back toward side k + 4
                z[out] = mobius(GENERATORS[(k + 4) % 8], z[out])
                moved = True
        if not moved:
            break
    else:
        raise RuntimeError("reduction to the fundamental domain did not converge")
    return z[0] if scalar else z


def bolza_radius(u):
    """Inverse-CDF radius for hyperbolic-area-uniform sampling of the disk of radius R*."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(1.0 - 1.0 / (1.0 + C_SCALE * u))


def sample_bolza(n: int, seed=None, min_acceptance: float = 0.01) -> np.ndarray:
    """Uniform sample of ``n`` points of the fundamental domain, as complex numbers."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = []
    drawn = accepted = 0
    while accepted < n:
        batch = max(64, 3 * (n - accepted))
        z = bolza_radius(rng.random(batch)) * np.exp(2j * np.pi * rng.random(batch))
        keep = z[in_domain(z)]
        drawn += batch
        accepted += keep.size
        out.append(keep)
        if drawn >= 1000 and accepted / drawn < min_acceptance:
            raise RuntimeError(f"acceptance rate {accepted / drawn:.4f} below {min_acceptance}")
    return np.concatenate(out)[:n]


def bolza_distances(z, w=None, reduce: bool = True) -> np.ndarray:
    """Surface distance matrix between the points ``z`` and ``w`` (default ``z``)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = z if w is None else np.atleast_1d(np.asarray(w, dtype=complex))
    if reduce:
        z = reduce_to_domain(z)
        w = reduce_to_domain(w)
    best = poincare_distance(z[:, None], w[None, :])
    for M in TRANSLATES:
        best = np.minimum(best, poincare_distance(z[:, None], mobius(M, w)[None, :]))
    if w is z or (w.shape == z.shape and np.array_equal(w, z)):
        best = np.minimum(best, best.T)
        np.fill_diagonal(best, 0.0)
    return best


def bolza_distance(z, w) -> float:
    return float(bolza_distances([z], [w])[0, 0])


def to_xy(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.column_stack([z.real, z.imag])
