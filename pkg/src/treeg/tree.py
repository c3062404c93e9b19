"""Greedy induction and inference of a single decision tree over dynamic graph features."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .batch import GraphBatch, aggregate
from .features import Aggregator
from .graph import (
    GRAPH_WALK_TYPES,
    VERTEX_WALK_TYPES,
    Graph,
    VertexSubset,
    WalkType,
    used_edges,
)

logger = logging.getLogger(__name__)

LEVELS = ("graph", "vertex")


@dataclass(frozen=True)
class SplitParams:
    """Parameters of one split-node: route left when ``phi > theta``.

    ``u`` is the distance to the ancestor whose generated subset is used
    (0 = the node itself, meaning the whole vertex set) and ``rho`` picks
    that ancestor's positive (+1) or negative (-1) subset.
    """

    k: int
    d: int
    u: int
    rho: int
    r: WalkType
    agg: Optional[Aggregator]
    theta: float

    @property
    def origin(self) -> Optional[tuple[int, int]]:
        return None if self.u == 0 else (self.u, self.rho)


@dataclass
class TreeNode:
    node_id: int
    value: float
    split: Optional[SplitParams] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    def nodes(self) -> Iterator["TreeNode"]:
        yield self
        if not self.is_leaf:
            yield from self.left.nodes()
            yield from self.right.nodes()

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth, self.right.depth)


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of a single tree.

    ``walk_prob=None`` resolves to 0.25 for graph tasks and 0.5 for vertex
    tasks. ``walk_types=None`` permits every walk type the task allows.
    ``lookahead`` lets a node without any positive-gain split still place a
    subset-generating split when that enables a gain one level down.
    """

    max_d: int = 2
    max_a: int = 2
    tree_depth: int = 5
    min_samples_split: int = 2
    walk_prob: Optional[float] = None
    walk_types: Optional[tuple[WalkType, ...]] = None
    lookahead: bool = True
    lookahead_thresholds: int = 8
    seed: int = 0

    def __post_init__(self):
        for name in ("max_d", "max_a", "tree_depth", "min_samples_split", "lookahead_thresholds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.walk_prob is not None and not 0.0 <= self.walk_prob <= 1.0:
            raise ValueError("walk_prob must lie in [0, 1]")
        if self.walk_types is not None:
            object.__setattr__(
                self, "walk_types", tuple(sorted({WalkType(r) for r in self.walk_types}))
            )

    def resolved_walk_prob(self, level: str) -> float:
        if self.walk_prob is not None:
            return self.walk_prob
        return 0.25 if level == "graph" else 0.5

    def permitted_walk_types(self, level: str) -> tuple[WalkType, ...]:
        allowed = GRAPH_WALK_TYPES if level == "graph" else VERTEX_WALK_TYPES
        if self.walk_types is None:
            return allowed
        bad = [r for r in self.walk_types if r not in allowed]
        if bad:
            raise ValueError(f"walk types {bad} are not available for {level} tasks")
        return self.walk_types

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.walk_types is not None:
            out["walk_types"] = [int(r) for r in self.walk_types]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        if data.get("walk_types") is not None:
            data["walk_types"] = tuple(WalkType(r) for r in data["walk_types"])
        return cls(**data)


@dataclass
class _Step:
    """Subsets materialised at one split-node on a root-to-leaf path."""

    node_id: int
    split: SplitParams
    selected: np.ndarray  # (G, n_max) membership of S_{u,rho}
    plus: np.ndarray
    minus: np.ndarray


def available_subsets(batch: GraphBatch, path: Sequence[_Step], max_a: int) -> list:
    """``[(origin, mask)]`` in lexicographic origin order: V, then (1,+), (1,-), (2,+), ..."""
    out = [(None, batch.valid)]
    for offset in range(1, min(max_a, len(path)) + 1):
        step = path[-offset]
        out.append(((offset, 1), step.plus))
        out.append(((offset, -1), step.minus))
    return out


class ExampleSet:
    """Examples addressed as (graph index into a batch, local vertex) pairs."""

    def __init__(self, batch: GraphBatch, graph_index, vertex_index=None):
        self.batch = batch
        self.graph = np.asarray(graph_index, dtype=np.int64)
        self.vertex = None if vertex_index is None else np.asarray(vertex_index, dtype=np.int64)
        if self.vertex is not None:
            if self.vertex.shape != self.graph.shape:
                raise ValueError("one vertex index per example is required")
            if (self.vertex < 0).any() or (self.vertex >= batch.sizes[self.graph]).any():
                raise ValueError("vertex index out of range")

    @property
    def level(self) -> str:
        return "graph" if self.vertex is None else "vertex"

    def __len__(self) -> int:
        return len(self.graph)

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph], max_d: int, vertices=None) -> "ExampleSet":
        """Batch the distinct graph objects; vertex tasks repeat a graph once per example."""
        if len(graphs) == 0:
            raise ValueError("no examples given")
        if vertices is None:
            return cls(GraphBatch(graphs, max_d), np.arange(len(graphs)))
        if len(vertices) != len(graphs):
            raise ValueError("vertex tasks need one vertex index per example")
        slot: dict[int, int] = {}
        unique: list[Graph] = []
        index = []
        for g in graphs:
            key = id(g)
            if key not in slot:
                slot[key] = len(unique)
                unique.append(g)
            index.append(slot[key])
        return cls(GraphBatch(unique, max_d), index, vertices)


def feature_values(examples: ExampleSet, ex: np.ndarray, d: int, subset: np.ndarray,
                   whole: bool, types: Sequence[WalkType]):
    """Per-type feature values for examples ``ex``.

    Graph tasks return ``{r: (4, m, l)}`` (all aggregators), vertex tasks
    ``{r: (1, m, l)}``; also returns the vertex-level vectors and the index
    arrays used so callers can derive subsets.
    """
    batch = examples.batch
    idx, inv = np.unique(examples.graph[ex], return_inverse=True)
    s = subset[idx]
    vectors = batch.vertex_values(idx, d, s, types, whole=whole)
    out = {}
    for r, V in vectors.items():
        if examples.vertex is None:
            region = batch.valid[idx] if r is WalkType.SOURCE else s
            out[r] = aggregate(V, region)[:, inv, :]
        else:
            out[r] = V[inv, examples.vertex[ex], :][None]
    return out, vectors, idx, inv


def apply_split(examples: ExampleSet, ex: np.ndarray, split: SplitParams, avail, node_id: int = 0):
    """Route examples ``ex`` through ``split`` and generate the two vertex subsets.

    Returns ``(go_left, step)``; ``step`` carries full-batch masks of the
    selected subset and of S+ / S- (rows of graphs not at this node are empty).
    """
    batch = examples.batch
    origin = split.origin
    selected = dict(avail)[origin]
    values, vectors, idx, inv = feature_values(
        examples, ex, split.d, selected, origin is None, [split.r]
    )
    agg_row = 0 if split.agg is None else int(split.agg)
    phi = values[split.r][agg_row, :, split.k]
    go_left = phi > split.theta

    s = selected[idx]
    vertex_vec = vectors[split.r][:, :, split.k]
    if split.agg is Aggregator.SUM:
        size = s.sum(axis=1).astype(float)
        cut = split.theta / np.where(size == 0, 1.0, size)
    else:
        cut = np.full(len(idx), split.theta)
    plus_rows = s & (vertex_vec > cut[:, None])
    minus_rows = s & ~plus_rows

    plus = np.zeros_like(batch.valid)
    minus = np.zeros_like(batch.valid)
    plus[idx] = plus_rows
    minus[idx] = minus_rows
    if (plus & minus).any() or not np.array_equal((plus | minus)[idx], s):
        raise AssertionError("generated subsets do not partition the selected subset")
    sel_full = np.zeros_like(batch.valid)
    sel_full[idx] = s
    return go_left, _Step(node_id, split, sel_full, plus, minus)


def scan_thresholds(phi: np.ndarray, y: np.ndarray):
    """Best threshold per column of ``phi`` (m, C) for targets ``y``.

    Thresholds are midpoints between consecutive distinct sorted values; the
    gain is the drop in summed squared deviation. Returns ``(gain, theta)``
    arrays of length C (gain is -inf where a column is constant); ties keep
    the smaller threshold.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    m, C = phi.shape
    if m < 2:
        return np.full(C, -np.inf), np.full(C, np.nan)
    yc = np.asarray(y, dtype=float) - np.mean(y)
    total = yc.sum()
    order = np.argsort(phi, axis=0, kind="stable")
    vs = np.take_along_axis(phi, order, axis=0)
    ys = yc[order]
    c1 = np.cumsum(ys, axis=0)[:-1]
    n_right = np.arange(1, m, dtype=float)[:, None]
    n_left = m - n_right
    gain = c1 * c1 / n_right + (total - c1) ** 2 / n_left - total * total / m
    gain[vs[1:] <= vs[:-1]] = -np.inf
    pos = np.argmax(gain, axis=0)
    cols = np.arange(C)
    best = gain[pos, cols]
    lo, hi = vs[pos, cols], vs[np.minimum(pos + 1, m - 1), cols]
    theta = (lo + hi) / 2.0
    theta = np.where(theta >= hi, lo, theta)
    return best, theta


def best_threshold(values, targets) -> Optional[tuple[float, float]]:
    """Single-feature threshold scan: ``(theta, gain)`` or None when no split exists."""
    gain, theta = scan_thresholds(np.asarray(values, dtype=float)[:, None], targets)
    if not np.isfinite(gain[0]):
        return None
    return float(theta[0]), float(gain[0])


@dataclass
class SplitSearch:
    split: SplitParams
    gain: float


class TreeBuilder:
    """Grows one tree over a fixed example set; ``fit`` may be called per boosting round."""

    def __init__(self, examples: ExampleSet, config: TrainConfig, tree_index: int = 0):
        if config.max_d > examples.batch.max_d:
            raise ValueError("batch walk powers are shallower than config.max_d")
        self.examples = examples
        self.config = config
        self.level = examples.level
        self.tree_index = tree_index
        self.permitted = config.permitted_walk_types(self.level)
        self.walk_prob = config.resolved_walk_prob(self.level)
        self.aggs = list(Aggregator) if self.level == "graph" else [None]
        self.candidates_evaluated = 0
        self.leaf_of: Optional[np.ndarray] = None
        self.steps: dict[int, _Step] = {}

    # -- split search -----------------------------------------------------
    def sample_walk_types(self, node_id: int) -> tuple[WalkType, ...]:
        rng = np.random.default_rng([self.config.seed, self.tree_index, node_id])
        draws = rng.random(len(self.permitted)) < self.walk_prob
        return tuple(r for r, hit in zip(self.permitted, draws) if hit)

    def candidate_matrix(self, ex: np.ndarray, avail, types):
        """Feature values (m, C) and the matching column keys ``(k, d, origin, r, agg)``."""
        if not types:
            avail, types = avail[:1], (WalkType.SOURCE,)
        l = self.examples.batch.n_features
        blocks = []
        for d in range(self.config.max_d + 1):
            per_subset = []
            for origin, mask in avail:
                values, _, _, _ = feature_values(self.examples, ex, d, mask, origin is None, types)
                per_subset.append(np.stack([values[r] for r in types]))
            blocks.append(np.stack(per_subset))
        arr = np.stack(blocks)  # (D, S, R, A, m, l)
        m = len(ex)
        phi = arr.transpose(4, 5, 0, 1, 2, 3).reshape(m, -1)
        keys = [
            (k, d, origin, r, agg)
            for k in range(l)
            for d in range(self.config.max_d + 1)
            for origin, _ in avail
            for r in types
            for agg in self.aggs
        ]
        self.candidates_evaluated += len(keys)
        return phi, keys

    def search(self, ex: np.ndarray, y: np.ndarray, avail, types) -> Optional[SplitSearch]:
        if len(ex) < max(2, self.config.min_samples_split) or np.ptp(y) == 0:
            return None
        phi, keys = self.candidate_matrix(ex, avail, types)
        gain, theta = scan_thresholds(phi, y)
        top = gain.max()
        parent = float(((y - y.mean()) ** 2).sum())
        tol = 1e-9 * parent
        if not np.isfinite(top) or top <= tol:
            return None
        col = int(np.flatnonzero(gain >= top - tol)[0])
        k, d, origin, r, agg = keys[col]
        u, rho = (0, 1) if origin is None else origin
        split = SplitParams(int(k), int(d), int(u), int(rho), WalkType(r), agg, float(theta[col]))
        return SplitSearch(split, float(gain[col]))

    def _child_gain(self, node_id: int, ex: np.ndarray, y: np.ndarray, path) -> float:
        avail = available_subsets(self.examples.batch, path, self.config.max_a)
        found = self.search(ex, y, avail, self.sample_walk_types(node_id))
        return 0.0 if found is None else found.gain

    def lookahead(self, node_id: int, ex: np.ndarray, y: np.ndarray, path, avail) -> Optional[SplitSearch]:
        """Pick a vertex-level threshold split over V by the best gain reachable one level down."""
        batch = self.examples.batch
        idx = np.unique(self.examples.graph[ex])
        agg = Aggregator.MAX if self.level == "graph" else None
        parent = float(((y - y.mean()) ** 2).sum())
        tol = 1e-9 * parent
        best, best_total = None, tol
        for k in range(batch.n_features):
            for d in range(self.config.max_d + 1):
                vals = batch.AX[d][idx][..., k][batch.valid[idx]]
                distinct = np.unique(vals)
                if len(distinct) < 2:
                    continue
                cuts = (distinct[:-1] + distinct[1:]) / 2.0
                if len(cuts) > self.config.lookahead_thresholds:
                    pick = np.linspace(0, len(cuts) - 1, self.config.lookahead_thresholds)
                    cuts = cuts[np.unique(np.round(pick).astype(int))]
                for theta in cuts:
                    split = SplitParams(k, d, 0, 1, WalkType.SOURCE, agg, float(theta))
                    go_left, step = apply_split(self.examples, ex, split, avail, node_id)
                    total = 0.0
                    left_y, right_y = y[go_left], y[~go_left]
                    if len(left_y) and len(right_y):
                        total += parent - ((left_y - left_y.mean()) ** 2).sum() - ((right_y - right_y.mean()) ** 2).sum()
                    child_path = list(path) + [step]
                    total += self._child_gain(2 * node_id + 1, ex[go_left], left_y, child_path)
                    total += self._child_gain(2 * node_id + 2, ex[~go_left], right_y, child_path)
                    if total > best_total + tol:
                        best, best_total = SplitSearch(split, total), total
        return best

    # -- growth -----------------------------------------------------------
    def fit(self, targets: np.ndarray) -> TreeNode:
        targets = np.asarray(targets, dtype=float)
        if len(targets) != len(self.examples):
            raise ValueError("one target per example is required")
        if len(targets) == 0:
            raise ValueError("cannot fit a tree on zero examples")
        self.targets = targets
        self.leaf_of = np.full(len(targets), -1, dtype=np.int64)
        self.steps = {}
        return self._grow(0, 0, np.arange(len(targets)), [], float(targets.mean()))

    def _grow(self, node_id: int, depth: int, ex: np.ndarray, path, fallback: float) -> TreeNode:
        if len(ex) == 0:
            return TreeNode(node_id, fallback)
        y = self.targets[ex]
        node = TreeNode(node_id, float(y.mean()))
        self.leaf_of[ex] = node_id
        cfg = self.config
        if depth >= cfg.tree_depth or len(ex) < cfg.min_samples_split or np.ptp(y) == 0:
            return node
        avail = available_subsets(self.examples.batch, path, cfg.max_a)
        found = self.search(ex, y, avail, self.sample_walk_types(node_id))
        if found is None and cfg.lookahead and cfg.max_a >= 1 and depth + 2 <= cfg.tree_depth:
            found = self.lookahead(node_id, ex, y, path, avail)
        if found is None:
            return node
        go_left, step = apply_split(self.examples, ex, found.split, avail, node_id)
        self.steps[node_id] = step
        node.split = found.split
        child_path = list(path) + [step]
        node.left = self._grow(2 * node_id + 1, depth + 1, ex[go_left], child_path, node.value)
        node.right = self._grow(2 * node_id + 2, depth + 1, ex[~go_left], child_path, node.value)
        return node


def fit_tree(
    graphs: Sequence[Graph],
    targets,
    config: TrainConfig = TrainConfig(),
    vertices=None,
) -> TreeNode:
    """Fit one regression tree; pass ``vertices`` (one per example) for vertex tasks."""
    if len(graphs) == 0:
        raise ValueError("fit_tree needs at least one example")
    examples = ExampleSet.from_graphs(graphs, config.max_d, vertices)
    return TreeBuilder(examples, config).fit(np.asarray(targets, dtype=float))


def find_best_split(
    graphs: Sequence[Graph],
    targets,
    config: TrainConfig = TrainConfig(),
    vertices=None,
    walk_types: Optional[Sequence[WalkType]] = None,
) -> Optional[tuple[SplitParams, float]]:
    """Best root split (subsets = V only) over the given walk types, or None."""
    examples = ExampleSet.from_graphs(graphs, config.max_d, vertices)
    builder = TreeBuilder(examples, config)
    types = builder.sample_walk_types(0) if walk_types is None else tuple(sorted(set(walk_types)))
    avail = available_subsets(examples.batch, [], config.max_a)
    found = builder.search(np.arange(len(examples)), np.asarray(targets, dtype=float), avail, types)
    return None if found is None else (found.split, found.gain)


def generate_subsets(
    split: SplitParams,
    selected: VertexSubset,
    g: Graph,
) -> tuple[VertexSubset, VertexSubset]:
    """Partition ``selected`` (the subset the split used) into S+ and S- for one graph."""
    examples = ExampleSet(GraphBatch([g], split.d), [0], None if split.agg is not None else [0])
    mask = selected.mask(g.n)[None, :]
    avail = [(split.origin, mask)] if split.origin is not None else [(None, mask)]
    _, step = apply_split(examples, np.array([0]), split, avail)
    plus = VertexSubset(tuple(np.flatnonzero(step.plus[0, : g.n])), None)
    minus = VertexSubset(tuple(np.flatnonzero(step.minus[0, : g.n])), None)
    return plus, minus


# -- inference ---------------------------------------------------------------

@dataclass(frozen=True)
class PathStep:
    node_id: int
    subset: VertexSubset
    used_edges: frozenset = field(default_factory=frozenset)


def route(tree: TreeNode, examples: ExampleSet, record: bool = False):
    """Leaf values and leaf ids for every example; with ``record`` also each example's path steps."""
    m = len(examples)
    values = np.empty(m)
    leaves = np.empty(m, dtype=np.int64)
    paths: Optional[list[list[_Step]]] = [[] for _ in range(m)] if record else None

    stack = [(tree, np.arange(m), [])]
    while stack:
        node, ex, path = stack.pop()
        if len(ex) == 0:
            continue
        if node.is_leaf:
            values[ex] = node.value
            leaves[ex] = node.node_id
            continue
        avail = available_subsets(examples.batch, path, len(path))
        go_left, step = apply_split(examples, ex, node.split, avail, node.node_id)
        if record:
            for e in ex:
                paths[e].append(step)
        child_path = path + [step]
        stack.append((node.right, ex[~go_left], child_path))
        stack.append((node.left, ex[go_left], child_path))
    return values, leaves, paths


def check_features(tree: TreeNode, n_features: int) -> None:
    for node in tree.nodes():
        if not node.is_leaf and node.split.k >= n_features:
            raise ValueError(
                f"tree uses feature {node.split.k} but the input has {n_features} features"
            )


def predict_tree(tree: TreeNode, g: Graph, i: Optional[int] = None):
    """Leaf value and prediction path for one graph (``i`` given for vertex tasks).

    Each path entry lists the selected subset of a split-node and the edges
    its masked walk matrix uses.
    """
    check_features(tree, g.n_features)
    max_d = max([n.split.d for n in tree.nodes() if not n.is_leaf], default=0)
    examples = ExampleSet(GraphBatch([g], max_d), [0], None if i is None else [i])
    values, _, paths = route(tree, examples, record=True)
    out = []
    for step in paths[0]:
        members = np.flatnonzero(step.selected[0, : g.n])
        split = step.split
        edges = used_edges(g.adjacency, split.d, split.r, step.selected[0, : g.n],
                           end=i, directed=g.directed)
        out.append(PathStep(step.node_id, VertexSubset(tuple(members), split.origin), frozenset(edges)))
    return float(values[0]), out
