import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from treeg.graph import (
    Graph,
    VertexSubset,
    WalkType,
    graph_from_edges,
    masked_walks,
    used_edges,
    walk_mask,
    walk_powers,
)


def test_graph_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Graph(np.zeros((2, 3)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        Graph(np.zeros((2, 2)), np.ones((3, 1)))
    with pytest.raises(ValueError):
        Graph(np.array([[0, 1], [0, 0]]), np.ones((2, 1)))
    with pytest.raises(ValueError):
        Graph(np.zeros((2, 2)), np.array([[1.0], [np.nan]]))


def test_directed_graph_may_be_asymmetric():
    g = Graph(np.array([[0, 1], [0, 0]]), np.ones((2, 1)), directed=True)
    assert g.edges() == [(1, 0)]


def test_graph_arrays_are_read_only():
    g = graph_from_edges(3, [(0, 1)])
    with pytest.raises(ValueError):
        g.adjacency[0, 0] = 5.0


def test_edge_convention_sets_target_row():
    g = graph_from_edges(3, [(0, 2)], directed=True)
    assert g.adjacency[2, 0] == 1.0 and g.adjacency[0, 2] == 0.0


def test_powers_of_empty_graph():
    cache = walk_powers(Graph(np.zeros((3, 3)), np.ones((3, 1))), 2)
    np.testing.assert_array_equal(cache[0], np.eye(3))
    assert not cache[1].any() and not cache[2].any()


def test_path_graph_closed_walks_of_length_two():
    cache = walk_powers(graph_from_edges(3, [(0, 1), (1, 2)]), 2)
    np.testing.assert_array_equal(np.diag(cache[2]), [1, 2, 1])


def test_source_mask_over_all_is_identity_operation():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    power = walk_powers(g, 2)[2]
    np.testing.assert_array_equal(masked_walks(power, VertexSubset.all(4), WalkType.SOURCE), power)


def test_triangle_cycle_mask():
    g = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    out = masked_walks(walk_powers(g, 2)[2], VertexSubset((0,), (1, 1)), WalkType.CYCLE)
    expected = np.zeros((3, 3))
    expected[0, 0] = 2.0
    np.testing.assert_array_equal(out, expected)


def test_mask_patterns():
    s = np.array([True, False, True])
    np.testing.assert_array_equal(walk_mask(s, WalkType.SOURCE), [[1, 0, 1]] * 3)
    np.testing.assert_array_equal(walk_mask(s, WalkType.TARGET), [[1] * 3, [0] * 3, [1] * 3])
    np.testing.assert_array_equal(walk_mask(s, WalkType.CYCLE), np.diag([1, 0, 1]))
    np.testing.assert_array_equal(walk_mask(s, WalkType.TARGET_SOURCE), np.outer(s, s))


def test_empty_subset_masks_to_zero():
    power = np.ones((3, 3))
    for r in WalkType:
        assert not masked_walks(power, VertexSubset((), (1, 1)), r).any()


def test_subset_rejects_out_of_range_members():
    with pytest.raises(ValueError):
        VertexSubset((0, 5), (1, 1)).mask(3)
    with pytest.raises(ValueError):
        VertexSubset((0,), (1, 0))


def test_four_regular_pair_triangle_rule():
    from treeg.synth import regular_pair

    g1, g2 = regular_pair().graphs
    traces = [np.trace(walk_powers(g, 3)[3]) for g in (g1, g2)]
    # each triangle is six closed walks of length three
    assert traces == [6 * 8, 6 * 4]


graph_params = st.tuples(
    st.integers(1, 6), st.integers(0, 2**32 - 1), st.booleans(), st.booleans(), st.integers(0, 3)
)


@settings(max_examples=60, deadline=None)
@given(graph_params, st.data())
def test_masked_walks_match_enumeration(params, data):
    n, seed, directed, weighted, d = params
    rng = np.random.default_rng(seed)
    g = oracle.random_graph(rng, n, directed=directed, weighted=weighted)
    members = data.draw(st.sets(st.integers(0, n - 1)))
    subset = VertexSubset(tuple(members), (1, 1))
    power = walk_powers(g, d)[d]
    for r in WalkType:
        np.testing.assert_allclose(
            masked_walks(power, subset, r), oracle.masked_power(g.adjacency, d, members, r), atol=1e-9
        )


@settings(max_examples=40, deadline=None)
@given(graph_params)
def test_masked_walks_are_permutation_equivariant(params):
    n, seed, directed, weighted, d = params
    rng = np.random.default_rng(seed)
    g = oracle.random_graph(rng, n, directed=directed, weighted=weighted)
    perm = rng.permutation(n)
    members = tuple(np.flatnonzero(rng.random(n) < 0.5))
    h = g.permute(perm)
    P = np.zeros((n, n))
    P[perm, np.arange(n)] = 1.0
    for r in WalkType:
        lhs = masked_walks(walk_powers(h, d)[d], VertexSubset(tuple(perm[list(members)]), (1, 1)), r)
        rhs = P @ masked_walks(walk_powers(g, d)[d], VertexSubset(members, (1, 1)), r) @ P.T
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(graph_params)
def test_complementary_source_masks_sum_to_power(params):
    n, seed, directed, weighted, d = params
    rng = np.random.default_rng(seed)
    g = oracle.random_graph(rng, n, directed=directed, weighted=weighted)
    inside = rng.random(n) < 0.5
    power = walk_powers(g, d)[d]
    total = masked_walks(power, VertexSubset(tuple(np.flatnonzero(inside)), (1, 1)), WalkType.SOURCE)
    total = total + masked_walks(power, VertexSubset(tuple(np.flatnonzero(~inside)), (1, -1)), WalkType.SOURCE)
    np.testing.assert_allclose(total, power)


@settings(max_examples=60, deadline=None)
@given(graph_params, st.data())
def test_used_edges_match_enumeration(params, data):
    n, seed, directed, weighted, d = params
    rng = np.random.default_rng(seed)
    g = oracle.random_graph(rng, n, directed=directed, weighted=weighted)
    members = data.draw(st.sets(st.integers(0, n - 1)))
    mask = VertexSubset(tuple(members), (1, 1)).mask(n)
    end = data.draw(st.none() | st.integers(0, n - 1))
    for r in WalkType:
        got = used_edges(g.adjacency, d, r, mask, end=end, directed=directed)
        assert got == oracle.used_edges(g, d, members, r, end=end)


def test_permute_relabels_edges():
    g = graph_from_edges(3, [(0, 1)], np.array([[1.0], [2.0], [3.0]]), directed=True)
    h = g.permute([2, 0, 1])
    assert h.edges() == [(2, 0)]
    np.testing.assert_array_equal(h.features[:, 0], [2.0, 3.0, 1.0])
