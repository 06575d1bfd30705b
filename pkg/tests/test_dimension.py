import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import kendall_tau_b_quadratic, monte_carlo_abs_sin
from peelkit.dimension import (DimensionError, DimensionField, NeighborhoodFamily, essa_dimension,
                               essa_dimension_from_statistic, essa_statistic, ess_expectation, gradient_estimate,
                               gradient_norm_score, kendall_tau_b, local_dimension_field, score_quantiles,
                               vgt_dimension, vgt_field)
from peelkit.metric import MetricKind, PointCloud
from peelkit.neighborhoods import NeighborIndex, all_neighborhoods
from peelkit.samplers import NoiseSpec, embed_with_noise, sample_ball, sample_sphere

# statistic and its expectation curve

def test_statistic_orthogonal_and_parallel():
    origin = np.zeros(2)
    assert essa_statistic([[1.0, 0], [0, 2.0]], origin) == pytest.approx(1.0)
    assert essa_statistic([[1.0, 0], [3.0, 0]], origin) == pytest.approx(0.0, abs=1e-15)


def test_statistic_discards_center_copies():
    assert essa_statistic([[0.0, 0], [1.0, 0], [0, 1.0]], np.zeros(2)) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        essa_statistic([[1.0, 1], [1.0, 1]], [1.0, 1])


def test_statistic_isotropic_plane():
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 2 * np.pi, 500)
    u = np.column_stack([np.cos(t), np.sin(t)])
    s = essa_statistic(u, np.zeros(2))
    assert abs(s - 2 / np.pi) <= 0.03
    assert abs(s - monte_carlo_abs_sin(2, 200_000)) <= 0.03


@pytest.mark.parametrize("m", [2, 3, 5, 10, 30])
def test_expectation_against_monte_carlo(m):
    assert ess_expectation(m) == pytest.approx(monte_carlo_abs_sin(m, 400_000, seed=m), abs=3e-3)


def test_expectation_closed_forms():
    assert ess_expectation(1) == 0
    assert ess_expectation(2) == pytest.approx(2 / np.pi, rel=1e-14)
    assert ess_expectation(3) == pytest.approx(np.pi / 4, rel=1e-14)
    m = np.linspace(1.01, 50, 200)
    assert np.all(np.diff(ess_expectation(m)) > 0)
    with pytest.raises(DimensionError):
        ess_expectation(0.5)


def test_inversion():
    assert essa_dimension_from_statistic(2 / np.pi) == pytest.approx(2.0, abs=0.01)
    assert essa_dimension_from_statistic(0.0) == 1.0
    assert essa_dimension_from_statistic(1e-9) == pytest.approx(1.0, abs=1e-3)
    assert math.isnan(essa_dimension_from_statistic(math.nan))


@pytest.mark.parametrize("m", [1.5, 2, 3, 7, 20])
def test_inversion_round_trip(m):
    assert essa_dimension_from_statistic(ess_expectation(m)) == pytest.approx(m, abs=1e-5)


def test_pair_subsampling_is_seeded():
    x = np.random.default_rng(1).standard_normal((300, 4))
    a = essa_statistic(x, max_pairs=1000, seed=5)
    assert a == essa_statistic(x, max_pairs=1000, seed=5)
    assert a == pytest.approx(essa_statistic(x), abs=0.02)


def test_dimension_of_gaussian_cloud():
    x = np.random.default_rng(2).standard_normal((400, 3))
    assert essa_dimension(x) == pytest.approx(3.0, abs=0.3)


# volume growth slope

def test_vgt_power_laws():
    i = np.arange(1, 41, dtype=float)
    for robust in (True, False):
        assert vgt_dimension(np.sqrt(i), robust=robust) == pytest.approx(2.0, abs=1e-6)
        assert vgt_dimension(i, robust=robust) == pytest.approx(1.0, abs=1e-6)
        assert vgt_dimension(i ** (1 / 3.5), robust=robust) == pytest.approx(3.5, abs=1e-6)


def test_vgt_robust_against_outliers():
    # ascending radii only admit interior outliers as a compressed shell: six of
    # the 61 window radii collapse onto one value
    i = np.arange(1, 81, dtype=float)
    r = i ** 0.5
    r[25:31] = r[24]
    robust = vgt_dimension(r, robust=True)
    plain = vgt_dimension(r, robust=False)
    assert abs(robust - 2.0) <= 0.05
    assert abs(plain - 2.0) > abs(robust - 2.0)


def test_vgt_robust_matches_statsmodels():
    sm = pytest.importorskip("statsmodels.api")
    rng = np.random.default_rng(4)
    i = np.arange(1, 61, dtype=float)
    r = np.sort(i ** 0.4 * np.exp(0.05 * rng.standard_normal(60)))
    lo = math.ceil(60 / 4)
    x, y = np.log(r[lo - 1:]), np.log(i[lo - 1:])
    fit = sm.RLM(y, sm.add_constant(x), M=sm.robust.norms.TukeyBiweight(4.685)).fit(maxiter=200, tol=1e-12)
    assert vgt_dimension(r, robust=True, max_iter=200, tol=1e-12) == pytest.approx(fit.params[1], abs=1e-4)


def test_vgt_window_and_errors():
    i = np.arange(1, 21, dtype=float)
    assert vgt_dimension(np.sqrt(i), window=(3, 10)) == pytest.approx(2.0, abs=1e-9)
    with pytest.raises(DimensionError):
        vgt_dimension(np.sqrt(i), window=(5, 6))
    with pytest.raises(DimensionError):
        vgt_dimension(i[::-1])


def test_vgt_field_on_plane():
    x = sample_ball(2, 2000, 5)
    v = vgt_field(NeighborIndex(x), 20)
    assert np.median(v) == pytest.approx(2.0, abs=0.2)


# families and fields

def test_family_parsing():
    assert NeighborhoodFamily.parse("knn7") == NeighborhoodFamily("knn", 7)
    assert NeighborhoodFamily.parse("iterated-peel").kind == "iterated_peel"
    assert NeighborhoodFamily("knn", 5).tag == "knn5"
    with pytest.raises(ValueError):
        NeighborhoodFamily("knn", 2)
    with pytest.raises(ValueError):
        NeighborhoodFamily("ball")


def test_knn_field_on_sphere():
    x = embed_with_noise(sample_sphere(2, 600, 6), NoiseSpec("expected_norm", 1e-2, 10), 6)
    f = local_dimension_field(NeighborIndex(x), NeighborhoodFamily("knn", 10), workers=1)
    assert np.all(f.values[f.defined] > 0)
    assert np.median(f.values) == pytest.approx(2.0, abs=0.5)


def test_every_family_runs_and_is_positive():
    x = sample_sphere(2, 150, 7)
    idx = NeighborIndex(x)
    nbs = all_neighborhoods(idx, workers=1)
    for fam in ("peel", "iterated_peel", "double_radius", "knn5"):
        f = local_dimension_field(idx, NeighborhoodFamily.parse(fam), neighborhoods=nbs, workers=1)
        assert f.family == NeighborhoodFamily.parse(fam).tag
        assert np.all(f.values[f.defined] > 0)
        assert f.defined.mean() > 0.5


def test_tiny_cloud_sentinels():
    x = np.array([[0.0, 0], [1, 0], [0, 1]])
    idx = NeighborIndex(x)
    nbs = all_neighborhoods(idx, workers=1)
    f = local_dimension_field(idx, NeighborhoodFamily("peel"), neighborhoods=nbs, workers=1)
    assert np.all(np.isnan(f.values) | (f.values > 0))
    two = NeighborIndex(np.array([[0.0], [1.0]]))
    g = local_dimension_field(two, NeighborhoodFamily("peel"), neighborhoods=all_neighborhoods(two, workers=1))
    assert np.all(np.isnan(g.values))


def test_non_euclidean_needs_mds():
    x = sample_sphere(2, 60, 8)
    idx = NeighborIndex(PointCloud(x, MetricKind.ANGULAR_SPHERE))
    with pytest.raises(ValueError):
        local_dimension_field(idx, NeighborhoodFamily("knn", 8), use_mds=False)
    f = local_dimension_field(idx, NeighborhoodFamily("knn", 8), workers=1)
    assert f.defined.all()


def test_field_deterministic_across_workers():
    x = sample_ball(3, 200, 9)
    idx = NeighborIndex(x)
    nbs = all_neighborhoods(idx, workers=1)
    fam = NeighborhoodFamily("iterated_peel")
    a = local_dimension_field(idx, fam, neighborhoods=nbs, workers=1, max_pairs=50)
    b = local_dimension_field(idx, fam, neighborhoods=nbs, workers=3, max_pairs=50)
    assert np.array_equal(a.values, b.values, equal_nan=True)


# gradient and scores

def test_gradient_constant_is_zero():
    x = np.random.default_rng(10).standard_normal((10, 3))
    g = gradient_estimate(np.full(10, 3.0), 0, np.arange(10), NeighborIndex(x))
    assert np.allclose(g, 0)


def test_gradient_three_point_line():
    x = np.array([[-1.0], [0.0], [1.0]])
    g = gradient_estimate(x[:, 0], 1, [0, 1, 2], NeighborIndex(x))
    assert g == pytest.approx([1.0])


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 3), st.floats(-10, 10))
def test_gradient_affine_symmetric_stencil(a, b, h, c):
    x = np.array([[c - h], [c], [c + h]])
    f = a * x[:, 0] + b
    g = gradient_estimate(f, 1, [0, 1, 2], NeighborIndex(x))
    assert g[0] == pytest.approx(a, abs=1e-10 * max(1.0, abs(a)))


def test_gradient_rejects_duplicates():
    x = np.array([[0.0], [1.0], [1.0], [2.0]])
    with pytest.raises(Exception):
        gradient_estimate(np.arange(4.0), 0, [0, 1, 2], NeighborIndex(x))


def _score_setup(seed=11):
    x = sample_ball(2, 120, seed)
    idx = NeighborIndex(x)
    nbs = all_neighborhoods(idx, workers=1)
    return x, idx, nbs


def test_constant_field_scores_zero():
    x, idx, nbs = _score_setup()
    field = DimensionField(np.full(idx.n, 2.0), "const")
    for j in (1, 2):
        s = gradient_norm_score(idx, j, field, nbs)
        assert np.allclose(s.values, 0)


def test_score_isometry_invariance():
    x, idx, nbs = _score_setup()
    f = local_dimension_field(idx, NeighborhoodFamily("iterated_peel"), neighborhoods=nbs, workers=1)
    s = gradient_norm_score(idx, 2, f, nbs).values
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    y = x @ R.T + np.array([3.0, -2.0])
    s2 = gradient_norm_score(NeighborIndex(y), 2, f, nbs).values
    ok = np.isfinite(s)
    assert np.array_equal(ok, np.isfinite(s2))
    assert np.max(np.abs(s[ok] - s2[ok])) <= 1e-9


def test_score_nonnegative_and_options():
    x, idx, nbs = _score_setup()
    f = local_dimension_field(idx, NeighborhoodFamily("peel"), neighborhoods=nbs, workers=1)
    for alpha in ("median", "mean", "max"):
        for use_log in (True, False):
            s = gradient_norm_score(idx, 1, f, nbs, alpha=alpha, use_log=use_log)
            v = s.values[np.isfinite(s.values)]
            assert np.all(v >= 0) and s.level == 1 and s.alpha == alpha
    with pytest.raises(ValueError):
        gradient_norm_score(idx, 3, f, nbs)
    with pytest.raises(ValueError):
        gradient_norm_score(idx, 1, f, nbs, alpha="mode")


def test_score_quantiles():
    q = score_quantiles([0.1, np.nan, 0.3, 0.3, 0.2])
    assert np.isnan(q[1])
    assert q[[0, 2, 3, 4]].tolist() == [0.25, 1.0, 1.0, 0.5]


# rank correlation

def test_kendall_examples():
    a = np.arange(6.0)
    assert kendall_tau_b(a, a) == pytest.approx(1)
    assert kendall_tau_b(a, a[::-1]) == pytest.approx(-1)
    assert kendall_tau_b([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(2 / 3)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=3, max_size=30))
def test_kendall_against_pair_enumeration(pairs):
    a, b = np.array(pairs, dtype=float).T
    if np.all(a == a[0]) or np.all(b == b[0]):
        assert math.isnan(kendall_tau_b(a, b))
    else:
        assert kendall_tau_b(a, b) == pytest.approx(kendall_tau_b_quadratic(a, b), abs=1e-12)


def test_kendall_drops_nan_pairs():
    a = np.array([1.0, 2, np.nan, 4, 5])
    b = np.array([1.0, 2, 3, np.nan, 5])
    assert kendall_tau_b(a, b) == pytest.approx(1.0)
