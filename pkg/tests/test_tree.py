import numpy as np
import pytest

import oracle
from treeg.features import Aggregator
from treeg.graph import Graph, VertexSubset, WalkType, graph_from_edges
from treeg.synth import coordinate_pair, regular_pair
from treeg.tree import (
    ExampleSet,
    SplitParams,
    TrainConfig,
    TreeBuilder,
    best_threshold,
    find_best_split,
    fit_tree,
    generate_subsets,
    predict_tree,
    route,
    scan_thresholds,
)


def _feature_graphs(values):
    """Single-vertex graphs whose only feature is the given value."""
    return [Graph(np.zeros((1, 1)), [[v]]) for v in values]


def _random_graphs(n_graphs, seed, n=(3, 8), l=2, directed=False):
    rng = np.random.default_rng(seed)
    return [oracle.random_graph(rng, int(rng.integers(*n)), directed=directed, l=l)
            for _ in range(n_graphs)]


def test_threshold_scan_known_case():
    assert best_threshold([1, 2, 5, 6], [0, 0, 1, 1]) == (3.5, 1.0)


def test_threshold_scan_matches_exhaustive_search():
    rng = np.random.default_rng(3)
    for _ in range(50):
        phi = rng.integers(0, 5, size=12).astype(float)
        y = rng.normal(size=12)
        got = best_threshold(phi, y)
        parent = ((y - y.mean()) ** 2).sum()
        best = None
        distinct = np.unique(phi)
        for theta in (distinct[:-1] + distinct[1:]) / 2:
            left, right = y[phi > theta], y[phi <= theta]
            gain = parent - ((left - left.mean()) ** 2).sum() - ((right - right.mean()) ** 2).sum()
            if best is None or gain > best[1] + 1e-12:
                best = (theta, gain)
        if best is None:
            assert got is None
        else:
            assert got[0] == best[0] and abs(got[1] - best[1]) < 1e-9


def test_constant_feature_column_has_no_split():
    gain, _ = scan_thresholds(np.ones((5, 1)), np.arange(5.0))
    assert gain[0] == -np.inf
    graphs = [Graph(np.zeros((2, 2)), np.ones((2, 1))) for _ in range(4)]
    assert find_best_split(graphs, [0, 1, 0, 1], TrainConfig(max_d=1, walk_prob=1.0)) is None


def test_equal_gain_picks_first_feature_and_smallest_threshold():
    graphs = [Graph(np.zeros((1, 1)), [[v, v]]) for v in (1.0, 2.0, 5.0, 6.0)]
    split, gain = find_best_split(graphs, [0, 0, 1, 1], TrainConfig(max_d=0), walk_types=[WalkType.SOURCE])
    assert (split.k, split.d, split.agg, split.theta, gain) == (0, 0, Aggregator.SUM, 3.5, 1.0)
    # two thresholds with equal gain: the smaller wins
    _, theta = scan_thresholds(np.array([[0.0], [1.0], [2.0], [3.0]]), [0.0, 1.0, 1.0, 0.0])
    assert theta[0] == 0.5


def test_constant_targets_give_single_leaf():
    tree = fit_tree(_random_graphs(6, 0), [2.5] * 6, TrainConfig(walk_prob=1.0))
    assert tree.is_leaf and tree.value == 2.5


def test_empty_example_list_rejected():
    with pytest.raises(ValueError):
        fit_tree([], [], TrainConfig())


def test_separable_features_fit_exactly():
    graphs = _feature_graphs([0.0, 1.0, 2.0, 3.0])
    tree = fit_tree(graphs, [0.0, 0.0, 5.0, 5.0], TrainConfig(max_d=0))
    assert tree.depth == 1
    assert tree.split.theta == 1.5
    assert predict_tree(tree, graphs[3])[0] == 5.0 and predict_tree(tree, graphs[0])[0] == 0.0


def test_subsets_at_threshold_extremes():
    g = graph_from_edges(4, [], np.array([[0.4], [0.5], [0.6], [3.0]]))
    split = SplitParams(0, 0, 0, 1, WalkType.SOURCE, Aggregator.MAX, -10.0)
    plus, minus = generate_subsets(split, VertexSubset.all(4), g)
    assert plus.members == (0, 1, 2, 3) and minus.members == ()


def test_sum_splits_scale_threshold_by_subset_size():
    g = graph_from_edges(4, [], np.array([[0.4], [0.5], [0.6], [3.0]]))
    split = SplitParams(0, 0, 0, 1, WalkType.SOURCE, Aggregator.SUM, 2.0)
    plus, minus = generate_subsets(split, VertexSubset.all(4), g)
    assert plus.members == (2, 3) and minus.members == (0, 1)
    split = SplitParams(0, 0, 0, 1, WalkType.SOURCE, Aggregator.MAX, 2.0)
    assert generate_subsets(split, VertexSubset.all(4), g)[0].members == (3,)


def test_subsets_partition_selected_subset():
    g = _random_graphs(1, 5, n=(8, 9))[0]
    selected = VertexSubset((0, 2, 3, 5, 7), (1, 1))
    split = SplitParams(1, 1, 1, 1, WalkType.SOURCE, Aggregator.MEAN, 0.0)
    plus, minus = generate_subsets(split, selected, g)
    assert not set(plus.members) & set(minus.members)
    assert set(plus.members) | set(minus.members) == set(selected.members)


def test_single_leaf_tree_has_empty_path():
    tree = fit_tree(_random_graphs(3, 1), [1.0, 1.0, 1.0])
    value, path = predict_tree(tree, _random_graphs(1, 2)[0])
    assert value == 1.0 and path == []


@pytest.mark.parametrize("level", ["graph", "vertex"])
def test_inference_reproduces_training_subsets(level):
    graphs = _random_graphs(20, 7, l=2)
    rng = np.random.default_rng(0)
    if level == "vertex":
        vertices = np.concatenate([np.arange(g.n) for g in graphs])
        graphs = [g for g in graphs for _ in range(g.n)]
    else:
        vertices = None
    y = rng.normal(size=len(graphs))
    config = TrainConfig(max_d=2, max_a=2, tree_depth=4, walk_prob=1.0)
    examples = ExampleSet.from_graphs(graphs, config.max_d, vertices)
    builder = TreeBuilder(examples, config)
    tree = builder.fit(y)
    assert tree.depth >= 3
    values, leaves, paths = route(tree, examples, record=True)
    np.testing.assert_array_equal(leaves, builder.leaf_of)
    for e, path in enumerate(paths):
        gi = examples.graph[e]
        for step in path:
            trained = builder.steps[step.node_id]
            np.testing.assert_array_equal(step.plus[gi], trained.plus[gi])
            np.testing.assert_array_equal(step.minus[gi], trained.minus[gi])
            np.testing.assert_array_equal(step.selected[gi], trained.selected[gi])
            assert not (trained.plus & trained.minus).any()
            np.testing.assert_array_equal(trained.plus | trained.minus, trained.selected)


def test_fit_is_deterministic():
    graphs = _random_graphs(15, 11)
    y = np.random.default_rng(1).normal(size=15)
    config = TrainConfig(walk_prob=0.5, seed=4)
    assert fit_tree(graphs, y, config) == fit_tree(graphs, y, config)


def test_walk_type_sampling_depends_on_seed_tree_and_node():
    examples = ExampleSet.from_graphs(_random_graphs(2, 0), 2)
    a = TreeBuilder(examples, TrainConfig(walk_prob=0.5, seed=1), tree_index=0)
    b = TreeBuilder(examples, TrainConfig(walk_prob=0.5, seed=1), tree_index=0)
    draws = [a.sample_walk_types(node) for node in range(64)]
    assert draws == [b.sample_walk_types(node) for node in range(64)]
    assert len(set(draws)) > 1


def test_no_sampled_types_uses_plain_features_over_whole_set():
    graphs = _random_graphs(10, 3)
    y = np.arange(10.0)
    config = TrainConfig(walk_prob=0.0)
    tree = fit_tree(graphs, y, config)
    for node in tree.nodes():
        if not node.is_leaf:
            assert node.split.u == 0 and node.split.r == WalkType.SOURCE


def test_candidate_count_doubles_with_features():
    rng = np.random.default_rng(0)
    graphs = _random_graphs(30, 2, l=3)
    doubled = [g.with_features(np.hstack([g.features, g.features + 1])) for g in graphs]
    y = rng.normal(size=30)
    counts = []
    for gs in (graphs, doubled):
        examples = ExampleSet.from_graphs(gs, 2)
        builder = TreeBuilder(examples, TrainConfig(tree_depth=1, walk_prob=1.0, lookahead=False))
        builder.fit(y)
        counts.append(builder.candidates_evaluated)
    assert counts[1] == 2 * counts[0]


def test_coordinate_pair_needs_generated_subsets():
    ds = coordinate_pair()
    y = np.array([1.0, -1.0])
    flat = fit_tree(ds.graphs, y, TrainConfig(max_d=2, max_a=0, walk_prob=1.0))
    assert flat.is_leaf
    deep = fit_tree(ds.graphs, y, TrainConfig(max_d=2, max_a=1, walk_prob=1.0))
    assert [predict_tree(deep, g)[0] for g in ds.graphs] == [1.0, -1.0]
    assert deep.depth == 2


def test_regular_pair_single_cycle_split():
    ds = regular_pair()
    config = TrainConfig(max_d=3, max_a=0, tree_depth=1, walk_types=[WalkType.CYCLE], walk_prob=1.0)
    tree = fit_tree(ds.graphs, [1.0, -1.0], config)
    assert tree.depth == 1 and tree.split.d == 3 and tree.split.r == WalkType.CYCLE
    assert [predict_tree(tree, g)[0] for g in ds.graphs] == [1.0, -1.0]


def test_predict_rejects_too_few_features():
    graphs = [Graph(np.zeros((1, 1)), [[v, -v]]) for v in (0.0, 1.0, 2.0, 3.0)]
    tree = fit_tree(graphs, [0, 0, 1, 1], TrainConfig(max_d=0, walk_types=[WalkType.SOURCE], walk_prob=1.0))
    tree.split = SplitParams(1, 0, 0, 1, WalkType.SOURCE, Aggregator.SUM, 0.0)
    with pytest.raises(ValueError):
        predict_tree(tree, Graph(np.zeros((1, 1)), [[1.0]]))


@pytest.mark.parametrize("level", ["graph", "vertex"])
def test_predictions_follow_permutations(level):
    rng = np.random.default_rng(9)
    graphs = _random_graphs(12, 9, directed=level == "graph")
    if level == "vertex":
        vertices = np.concatenate([np.arange(g.n) for g in graphs])
        train = [g for g in graphs for _ in range(g.n)]
    else:
        vertices, train = None, graphs
    tree = fit_tree(train, rng.normal(size=len(train)), TrainConfig(walk_prob=1.0), vertices)
    for g in graphs:
        perm = rng.permutation(g.n)
        h = g.permute(perm)
        if level == "graph":
            assert predict_tree(tree, g)[0] == predict_tree(tree, h)[0]
        else:
            for i in range(g.n):
                assert predict_tree(tree, g, i)[0] == predict_tree(tree, h, int(perm[i]))[0]
