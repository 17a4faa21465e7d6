import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnct.errors import ValidationError
from nnct.neighbors import (
    build_nn_digraph,
    nn_distances,
    nn_index_from_coords,
)
from nnct.points import LabeledPointSet


def _collinear():
    # Three points on a line at x = 0, 1, 3.
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    return LabeledPointSet(coords, np.array([0, 0, 1]), ("a", "b"))


class TestDigraph:
    def test_collinear_example(self):
        g = build_nn_digraph(_collinear())
        assert np.array_equal(g.nn_index, [1, 0, 1])
        assert np.allclose(g.nn_distance, [1.0, 1.0, 2.0])
        assert np.array_equal(g.in_degree, [1, 2, 0])
        # one point (index 1) serves two others: Q = 2*1 = 2
        assert g.shared_nn_pairs == 2
        # points 0 and 1 are mutual nearest neighbors
        assert g.mutual_nn_count == 2
        assert np.array_equal(g.in_degree_histogram, [1, 1, 1])

    def test_distance_summary(self):
        s = nn_distances(_collinear())
        assert s.mean == pytest.approx(4.0 / 3.0)
        assert s.sd == pytest.approx(np.sqrt(2.0 / 9.0))

    def test_tie_breaks_to_smallest_index(self):
        # Unit square corners: each corner has two neighbors at distance 1.
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        nn, _ = nn_index_from_coords(coords, method="exhaustive")
        assert np.array_equal(nn, [1, 0, 0, 1])
        nn_t, _ = nn_index_from_coords(coords, method="tree")
        assert np.array_equal(nn_t, nn)

    def test_in_degree_sums_to_n(self):
        rng = np.random.default_rng(3)
        coords = rng.random((120, 2))
        g = build_nn_digraph(
            LabeledPointSet(coords, np.zeros(120, dtype=int), ("a",)))
        assert g.in_degree.sum() == 120
        hist = g.in_degree_histogram
        assert hist.sum() == 120  # every point appears once
        assert (np.arange(len(hist)) * hist).sum() == 120  # arcs out == n

    def test_single_point_rejected(self):
        with pytest.raises(ValidationError):
            nn_index_from_coords(np.array([[0.0, 0.0]]))

    def test_mutual_count_is_even(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            coords = rng.random((rng.integers(2, 60), 2))
            nn, d = nn_index_from_coords(coords)
            from nnct.neighbors import digraph_from_nn_index

            g = digraph_from_nn_index(nn, d)
            assert g.mutual_nn_count % 2 == 0


class TestTreeMatchesExhaustive:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 60))
    def test_random_configurations(self, seed, n):
        rng = np.random.default_rng(seed)
        coords = rng.random((n, 2))
        nn_a, d_a = nn_index_from_coords(coords, method="exhaustive")
        nn_b, d_b = nn_index_from_coords(coords, method="tree")
        assert np.array_equal(nn_a, nn_b)
        assert np.array_equal(d_a, d_b)

    def test_exact_grid_ties(self):
        # Integer lattice: every interior point has four equidistant
        # neighbors, so tie-breaking must agree between the two methods.
        xs, ys = np.meshgrid(np.arange(7.0), np.arange(7.0))
        coords = np.column_stack([xs.ravel(), ys.ravel()])
        nn_a, d_a = nn_index_from_coords(coords, method="exhaustive")
        nn_b, d_b = nn_index_from_coords(coords, method="tree")
        assert np.array_equal(nn_a, nn_b)
        assert np.array_equal(d_a, d_b)

    def test_pair_statistics_match(self):
        from nnct.neighbors import digraph_from_nn_index

        rng = np.random.default_rng(12)
        for _ in range(20):
            coords = rng.random((int(rng.integers(2, 150)), 2))
            ga = digraph_from_nn_index(*nn_index_from_coords(coords, "exhaustive"))
            gb = digraph_from_nn_index(*nn_index_from_coords(coords, "tree"))
            assert ga.shared_nn_pairs == gb.shared_nn_pairs
            assert ga.mutual_nn_count == gb.mutual_nn_count
            assert np.array_equal(ga.in_degree_histogram, gb.in_degree_histogram)
