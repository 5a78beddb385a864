import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multistop.grid import SimplexGrid, lattice_points, round_to_lattice

from oracles import brute_nearest


@pytest.mark.parametrize("X,d", [(2, 5), (3, 30), (4, 7), (10, 3)])
def test_grid_size(X, d):
    g = SimplexGrid(X, d)
    assert len(g) == SimplexGrid.expected_size(X, d)
    np.testing.assert_array_equal(g.counts.sum(axis=1), d)
    assert len({tuple(c) for c in g.counts}) == len(g)


def test_first_point_is_e1():
    np.testing.assert_array_equal(lattice_points(3, 4)[0], [4, 0, 0])


def test_vertices():
    g = SimplexGrid(3, 30)
    for i in (1, 2, 3):
        np.testing.assert_array_equal(g.points[g.vertex(i)], np.eye(3)[i - 1])


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_nearest_matches_brute_force(X, d, seed):
    g = SimplexGrid(X, d)
    b = np.random.default_rng(seed).dirichlet(np.full(X, 0.7))
    i = g.nearest(b)[0]
    j = brute_nearest(g.points, b)
    # ties may resolve to a different but equally close point
    assert np.linalg.norm(g.points[i] - b) == pytest.approx(np.linalg.norm(g.points[j] - b), abs=1e-12)


def test_grid_points_map_to_themselves():
    g = SimplexGrid(4, 6)
    np.testing.assert_array_equal(g.nearest(g.points), np.arange(len(g)))


def test_round_keeps_sum():
    b = np.random.default_rng(1).dirichlet(np.ones(6), size=500)
    np.testing.assert_array_equal(round_to_lattice(b, 9).sum(axis=1), 9)


def test_index_of_counts_rejects_off_lattice():
    with pytest.raises(ValueError):
        SimplexGrid(3, 4).index_of_counts([1, 1, 1])


def test_edges_move_one_unit():
    g = SimplexGrid(3, 5)
    diff = np.abs(g.counts[g.edges[:, 0]] - g.counts[g.edges[:, 1]])
    np.testing.assert_array_equal(diff.sum(axis=1), 2)
    # interior points have 6 neighbours in a 2-simplex
    assert len(g.edges) == 3 * 5 * 6 // 2


def test_lines_from_vertex_cover_grid():
    g = SimplexGrid(3, 6)
    lines = g.lines_from_vertex(1)
    covered = np.concatenate([ln[1:] for ln in lines])
    assert sorted(covered.tolist()) == sorted(set(range(len(g))) - {g.vertex(1)})
    for ln in lines:
        dist = np.linalg.norm(g.points[ln] - g.points[ln[0]], axis=1)
        assert np.all(np.diff(dist) > 0)
