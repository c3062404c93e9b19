import json

import numpy as np
import pytest

import oracle
from treeg.ensemble import Ensemble, Task, fit_ensemble
from treeg.explain import combine_ranks, competition_rank, explain
from treeg.features import Aggregator
from treeg.graph import Graph, WalkType, graph_from_edges
from treeg.synth import walks_multiclass
from treeg.tree import SplitParams, TrainConfig, TreeNode, predict_tree


def _split(k, d, u, rho, r, agg, theta):
    return SplitParams(k, d, u, rho, WalkType(r), agg, theta)


def _nested_subset_tree(leaf_value=2.0):
    """Root over V, then its S+, then that node's S+: vertices 0, 1, 2 are selected 3, 2, 1 times."""
    node3 = TreeNode(3, 0.0, _split(0, 0, 1, 1, WalkType.SOURCE, Aggregator.MAX, 0.0),
                     TreeNode(7, leaf_value), TreeNode(8, 0.0))
    node1 = TreeNode(1, 0.0, _split(0, 0, 1, 1, WalkType.SOURCE, Aggregator.MAX, 2.5),
                     node3, TreeNode(4, 0.0))
    return TreeNode(0, 0.0, _split(0, 0, 0, 1, WalkType.SOURCE, Aggregator.MAX, 1.5),
                    node1, TreeNode(2, 0.0))


def _ensemble(trees, n_features=1, kind="regression"):
    return Ensemble(Task("graph", kind), [0.0], [trees], 1.0, TrainConfig(), n_features)


def test_competition_rank():
    np.testing.assert_array_equal(competition_rank([2, 1, 0]), [1, 2, 3])
    np.testing.assert_array_equal(competition_rank([5, 5, 1, 5]), [1, 1, 4, 1])


def test_rank_combination_hand_values():
    np.testing.assert_array_equal(combine_ranks([2.0], [[1, 2, 3]]), [4 / 7, 2 / 7, 1 / 7])


def test_hand_computed_importance_through_prediction_path():
    g = graph_from_edges(3, [], np.array([[3.0], [2.0], [1.0]]))
    report = explain(_ensemble([_nested_subset_tree(2.0)]), g)
    assert report.trees[0].output == 2.0
    assert report.trees[0].vertex_counts == [3, 2, 1]
    assert [report.vertex_importance[v] for v in range(3)] == [4 / 7, 2 / 7, 1 / 7]


def test_tied_counts_are_uniform():
    g = graph_from_edges(4, [(0, 1)], np.arange(4.0)[:, None])
    tree = TreeNode(0, 0.0, _split(0, 0, 0, 1, WalkType.SOURCE, Aggregator.SUM, 100.0),
                    TreeNode(1, 1.0), TreeNode(2, -1.0))
    report = explain(_ensemble([tree]), g)
    assert all(v == 0.25 for v in report.vertex_importance.values())


def test_zero_outputs_fall_back_to_uniform():
    g = graph_from_edges(3, [(0, 1)], np.array([[3.0], [2.0], [1.0]]))
    report = explain(_ensemble([_nested_subset_tree(0.0)]), g)
    assert all(v == pytest.approx(1 / 3) for v in report.vertex_importance.values())


def test_leaf_only_trees_give_uniform_edges():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    report = explain(_ensemble([TreeNode(0, 1.0)]), g)
    assert report.edge_importance == {(0, 1): 0.5, (1, 2): 0.5}


def test_edgeless_graph_has_no_edge_importance():
    g = graph_from_edges(3, [], np.array([[3.0], [2.0], [1.0]]))
    assert explain(_ensemble([_nested_subset_tree()]), g).edge_importance == {}


def test_source_walks_use_edges_leaving_subset():
    # root splits on the feature; its child propagates one step from S+ = {0, 2}
    features = np.array([[1.0], [0.0], [1.0], [0.0], [0.0]])
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]
    g = graph_from_edges(5, edges, features, directed=True)
    child = TreeNode(1, 0.0, _split(0, 1, 1, 1, WalkType.SOURCE, Aggregator.SUM, -1.0),
                     TreeNode(3, 1.0), TreeNode(4, 0.0))
    tree = TreeNode(0, 0.0, _split(0, 0, 0, 1, WalkType.SOURCE, Aggregator.MAX, 0.5), child, TreeNode(2, 0.0))
    value, path = predict_tree(tree, g)
    assert value == 1.0
    assert path[1].subset.members == (0, 2)
    masked = oracle.masked_power(g.adjacency, 1, {0, 2}, WalkType.SOURCE)
    scan = {(int(a), int(b)) for b, a in zip(*np.nonzero(masked))}
    assert path[1].used_edges == scan == {(0, 1), (2, 3)}
    report = explain(_ensemble([tree]), g)
    assert report.edge_importance[(0, 1)] == report.edge_importance[(2, 3)] == max(report.edge_importance.values())


def _fit_small(kind="binary", seed=0):
    rng = np.random.default_rng(seed)
    graphs = [oracle.random_graph(rng, int(rng.integers(4, 9)), p=0.3) for _ in range(40)]
    y = np.array([int(g.adjacency.sum() > 2 * g.n * 0.3 * (g.n - 1) / 2) for g in graphs])
    ens = fit_ensemble(graphs, y, Task("graph", "binary"), 10, 0.3, TrainConfig(walk_prob=0.5))
    return ens, graphs


def test_importances_normalised_and_non_negative():
    ens, graphs = _fit_small()
    for g in graphs:
        report = explain(ens, g)
        values = np.array(list(report.vertex_importance.values()))
        assert (values >= 0).all() and abs(values.sum() - 1) < 1e-9
        if report.edge_importance:
            assert abs(sum(report.edge_importance.values()) - 1) < 1e-9


def test_importances_follow_permutations():
    ens, graphs = _fit_small(seed=2)
    rng = np.random.default_rng(5)
    for g in graphs[:10]:
        perm = rng.permutation(g.n)
        a = explain(ens, g).vertex_importance
        b = explain(ens, g.permute(perm)).vertex_importance
        for j in range(g.n):
            assert abs(a[j] - b[int(perm[j])]) < 1e-12


def test_more_selections_never_rank_lower():
    ens, graphs = _fit_small(seed=3)
    for g in graphs[:10]:
        for t in explain(ens, g).trees:
            counts, ranks = np.array(t.vertex_counts), np.array(t.vertex_ranks)
            for a in range(g.n):
                for b in range(g.n):
                    if counts[a] > counts[b]:
                        assert ranks[a] < ranks[b]


def test_multiclass_explains_predicted_class():
    ds = walks_multiclass(count=45, seed=1)
    ens = fit_ensemble(ds.graphs, ds.labels, Task("graph", "multiclass", 3), 3, 0.3, TrainConfig(walk_prob=0.5))
    g = ds.graphs[0]
    report = explain(ens, g)
    assert report.class_index == int(ens.predict([g])[0])
    assert explain(ens, g, class_index=2).class_index == 2


def test_report_serialisations():
    g = graph_from_edges(3, [(0, 1)], np.array([[3.0], [2.0], [1.0]]))
    report = explain(_ensemble([_nested_subset_tree()]), g)
    data = json.loads(report.to_json())
    assert data["vertices"][0] == {"vertex": 0, "importance": 4 / 7}
    dot = report.to_dot(g)
    assert dot.startswith("graph explanation {") and "0 -- 1" in dot


def test_vertex_task_argument_checks():
    g = graph_from_edges(3, [(0, 1)], np.array([[3.0], [2.0], [1.0]]))
    with pytest.raises(ValueError):
        explain(_ensemble([_nested_subset_tree()]), g, i=0)
    with pytest.raises(ValueError):
        explain(_ensemble([_nested_subset_tree()], n_features=2), g)
