import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_rho
from peelkit.metric import MetricKind, PointCloud, pairwise_distances
from peelkit.neighborhoods import (NeighborhoodError, NeighborIndex, ThresholdPolicy, all_neighborhoods,
                                   approximate_peel, default_radial_threshold, hole_proxy, iterated_neighborhood,
                                   neighborhood_graph, peel_neighborhood)
from peelkit.peel import peel
from peelkit.samplers import sample_ball

SQUARE = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]])


def test_threshold_square():
    assert default_radial_threshold(NeighborIndex(SQUARE)) == pytest.approx(2.0)


def test_threshold_line():
    x = np.arange(10.0)[:, None]
    idx = NeighborIndex(x)
    # k = 4: 4th-NN distances {4,3,2,2,2,2,2,2,3,4}
    assert idx.kth_distances(4).tolist() == [4, 3, 2, 2, 2, 2, 2, 2, 3, 4]
    assert default_radial_threshold(idx) == pytest.approx(4.0)


def test_threshold_two_points():
    assert default_radial_threshold(NeighborIndex([[0.0], [2.5]])) == pytest.approx(5.0)


def test_index_sorted_and_self_excluded():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3))
    idx = NeighborIndex(x)
    d = pairwise_distances(x)
    for i in (0, 17, 49):
        order, dist = idx.sorted_neighbors(i)
        assert i not in order and np.all(np.diff(dist) >= 0)
        assert np.allclose(dist, d[i, order])
        nb, r = idx.knn(i, 5)
        assert np.allclose(np.sort(r), np.sort(np.delete(d[i], i))[:5])


def test_matrix_index_agrees_with_points():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 2))
    a = all_neighborhoods(NeighborIndex(x), ThresholdPolicy(), workers=1)
    b = all_neighborhoods(NeighborIndex.from_matrix(pairwise_distances(x)), ThresholdPolicy(), workers=1)
    assert all(p.rho == q.rho and p.members.tolist() == q.members.tolist() for p, q in zip(a, b))


def test_square_corners_never_leave_their_peel():
    # the 3-point ball at radius 1 is the model matrix D_3, whose peel keeps the corner,
    # and the full square peels uniformly
    d = pairwise_distances(SQUARE)
    for nb in all_neighborhoods(NeighborIndex(SQUARE), ThresholdPolicy(), workers=1):
        assert brute_force_rho(d, nb.basepoint) == (math.inf, [0, 1, 2, 3])
        assert math.isinf(nb.rho) and nb.saturation_reason == "exhausted" and nb.size == 4
    for nb in all_neighborhoods(NeighborIndex(SQUARE), ThresholdPolicy(radial_cap=10.0), workers=1):
        assert nb.rho == 10.0 and nb.saturation_reason == "radius" and nb.size == 4


def test_square_graph_is_complete():
    idx = NeighborIndex(SQUARE)
    G = neighborhood_graph(all_neighborhoods(idx, ThresholdPolicy(), workers=1), idx)
    assert G.edge_set() == {(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}
    G = neighborhood_graph(all_neighborhoods(idx, ThresholdPolicy(), workers=1), idx, exclude_saturated=True)
    assert G.n_edges == 0


def test_two_point_graph():
    idx = NeighborIndex([[0.0], [1.0]])
    nbs = all_neighborhoods(idx, ThresholdPolicy(), workers=1)
    assert nbs[0].saturation_reason == "exhausted" and math.isinf(nbs[0].rho)
    G = neighborhood_graph(nbs, idx)
    assert G.edge_set() == {(0, 1)}


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 40), st.integers(1, 4))
def test_scan_matches_brute_force(seed, n, m):
    x = np.random.default_rng(seed).standard_normal((n, m))
    d = pairwise_distances(x)
    idx = NeighborIndex(x)
    for i in range(0, n, max(1, n // 6)):
        nb = peel_neighborhood(i, idx)
        r, ball = brute_force_rho(d, i)
        assert nb.rho == r
        assert sorted(nb.members.tolist()) == ball


def test_tied_radii_enter_together():
    # two points at exactly distance 1 from the basepoint
    x = np.array([[0.0, 0], [1, 0], [-1, 0], [0, 3]])
    nb = peel_neighborhood(0, NeighborIndex(x))
    assert nb.rho == 1.0 and sorted(nb.members.tolist()) == [0, 1, 2]


def test_unsaturated_invariants():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((80, 2))
    idx = NeighborIndex(x)
    d = pairwise_distances(x)
    for nb in all_neighborhoods(idx, workers=1):
        mem = nb.members
        assert mem[0] == nb.basepoint
        assert np.all(d[nb.basepoint, mem] <= nb.rho)
        if nb.saturated:
            continue
        assert 0 not in peel(d[np.ix_(mem, mem)]).support
        inner = mem[d[nb.basepoint, mem] < nb.rho]
        assert 0 in peel(d[np.ix_(inner, inner)]).support


def test_iterated_neighborhoods_nest():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((60, 2))
    nbs = all_neighborhoods(NeighborIndex(x), workers=1)
    for i in range(60):
        nu1 = set(iterated_neighborhood(i, 1, nbs).tolist())
        nu2 = set(iterated_neighborhood(i, 2, nbs).tolist())
        assert i in nu1 and nu1 <= nu2
        assert nu1 == set(nbs[i].members.tolist())
    assert iterated_neighborhood(5, 0, nbs).tolist() == [5]


def test_caps():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((100, 2))
    idx = NeighborIndex(x)
    for nb in all_neighborhoods(idx, ThresholdPolicy(cardinality_cap=4), workers=1):
        assert nb.size <= 4
        assert nb.saturated == (nb.saturation_reason == "cardinality")
    for nb in all_neighborhoods(idx, ThresholdPolicy(radial_cap=0.05), workers=1):
        assert nb.saturation_reason in ("none", "radius")
        if nb.saturated:
            assert nb.rho == 0.05


def test_policy_parsing():
    idx = NeighborIndex(SQUARE)
    assert ThresholdPolicy.parse("none") == ThresholdPolicy()
    assert ThresholdPolicy.parse("radius:0.5") == ThresholdPolicy(radial_cap=0.5)
    assert ThresholdPolicy.parse("card:7") == ThresholdPolicy(cardinality_cap=7)
    assert ThresholdPolicy.parse("default", idx).radial_cap == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ThresholdPolicy.parse("bogus:1")
    with pytest.raises(ValueError):
        ThresholdPolicy(radial_cap=0.0)


def test_unbounded_guard():
    x = np.random.default_rng(5).random((2001, 2))
    with pytest.raises(ValueError):
        all_neighborhoods(NeighborIndex(x), ThresholdPolicy())


def test_failures_are_collected():
    x = np.array([[0.0, 0], [1, 0], [1, 0], [0, 1], [2, 2]])
    with pytest.raises(NeighborhoodError) as info:
        all_neighborhoods(NeighborIndex(x), ThresholdPolicy(), workers=1)
    assert set(info.value.failures) >= {1, 2}


def test_disk_saturation_fraction():
    x = sample_ball(2, 1000, 6)
    nbs = all_neighborhoods(NeighborIndex(x))
    assert np.mean([nb.saturated for nb in nbs]) <= 0.10


def test_parallel_matches_serial():
    x = np.random.default_rng(7).standard_normal((120, 2))
    idx = NeighborIndex(x)
    a = all_neighborhoods(idx, workers=1)
    b = all_neighborhoods(idx, workers=3)
    assert [nb.to_json() for nb in a] == [nb.to_json() for nb in b]


def test_torus_neighborhoods():
    x = np.random.default_rng(8).random((60, 2))
    nbs = all_neighborhoods(NeighborIndex(PointCloud(x, MetricKind.FLAT_TORUS)), workers=1)
    assert all(nb.rho > 0 for nb in nbs)


def test_approximate_peel_exact_when_all_saturate():
    x = np.random.default_rng(9).standard_normal((40, 2))
    idx = NeighborIndex(x)
    approx = approximate_peel(idx, policy=ThresholdPolicy(radial_cap=1e-6))
    assert approx.saturated.size == 40
    assert np.array_equal(approx.distribution.p, peel(pairwise_distances(x)).p)


def test_approximate_peel_needs_radial_cap():
    with pytest.raises(ValueError):
        approximate_peel(NeighborIndex(SQUARE), policy=ThresholdPolicy(cardinality_cap=3))


def test_hole_proxy_examples():
    from peelkit.neighborhoods import PeelNeighborhood

    nb = PeelNeighborhood(0, 0.5, np.array([0]), True, "radius")
    assert hole_proxy([[1.0, 0.0]], [nb]) == pytest.approx(0.5)
    nb0 = PeelNeighborhood(0, 0.3, np.array([0]), False)
    assert hole_proxy([[0.0, 0.0]], [nb0]) <= -0.3


def test_hole_proxy_positive_on_annulus():
    rng = np.random.default_rng(10)
    r = np.sqrt(rng.uniform(0.75**2, 1.0, 400))
    t = rng.uniform(0, 2 * np.pi, 400)
    x = np.column_stack([r * np.cos(t), r * np.sin(t)]) + 0.01 * rng.standard_normal((400, 2))
    nbs = all_neighborhoods(NeighborIndex(x))
    assert hole_proxy(x, nbs) > 0
