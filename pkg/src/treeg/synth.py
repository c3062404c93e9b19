"""Synthetic graph tasks: red isolated vertex, walk counting, and the two separation graph pairs."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .data import GraphDataset
from .graph import Graph, graph_from_edges

WALK_TASKS = ("walks-source", "walks-cycle", "walks-target", "walks-target-source")
SYNTH_KINDS = ("red-isolated",) + WALK_TASKS + (
    "walks-multiclass", "red-neighbor", "coordinate-pair", "regular-pair")


def count_walks(adjacency: np.ndarray, length: int, start=None, end=None,
                closed: bool = False) -> float:
    """Weighted number of walks of ``length`` edges, by explicit enumeration.

    ``start``/``end`` are boolean vertex masks restricting the first/last
    vertex; ``closed`` keeps only walks returning to their first vertex.
    """
    A = np.asarray(adjacency)
    n = A.shape[0]
    start = np.ones(n, dtype=bool) if start is None else np.asarray(start, dtype=bool)
    end = np.ones(n, dtype=bool) if end is None else np.asarray(end, dtype=bool)
    out_nbrs = [np.flatnonzero(A[:, j]).tolist() for j in range(n)]
    total = 0.0
    for first in np.flatnonzero(start).tolist():
        stack = [(first, 0, 1.0)]
        while stack:
            v, steps, weight = stack.pop()
            if steps == length:
                if end[v] and (not closed or v == first):
                    total += weight
                continue
            for w in out_nbrs[v]:
                stack.append((w, steps + 1, weight * A[w, v]))
    return total


def _erdos_renyi(rng: np.random.Generator, n: int, p: float, directed: bool) -> np.ndarray:
    A = (rng.random((n, n)) < p).astype(float)
    np.fill_diagonal(A, 0.0)
    if not directed:
        A = np.triu(A, 1)
        A = A + A.T
    return A


def red_isolated(count: int = 1000, n: int = 50, p: float = 0.1, red_prob: float = 0.5,
                 seed: int = 0) -> GraphDataset:
    """Label 1 iff exactly one red vertex has no neighbours; classes balanced by rejection.

    Features: ``[const, red]`` with red in {0, 1}.
    """
    rng = np.random.default_rng(seed)
    want = {1: count // 2, 0: count - count // 2}
    graphs, labels = [], []
    while want[0] or want[1]:
        A = _erdos_renyi(rng, n, p, directed=False)
        red = (rng.random(n) < red_prob).astype(float)
        isolated = A.sum(axis=0) == 0
        label = int(np.sum(isolated & (red == 1)) == 1)
        if want[label]:
            want[label] -= 1
            graphs.append(Graph(A, np.column_stack([np.ones(n), red])))
            labels.append(label)
    return GraphDataset("red-isolated", graphs, np.array(labels), level="graph", kind="binary",
                        feature_names=["const", "red"], constant_feature=True, classes=[0, 1],
                        meta={"synth": "red-isolated", "seed": seed, "n": n, "p": p})


def _walk_target(kind: str, A: np.ndarray, red: np.ndarray, length: int) -> float:
    if kind == "walks-source":
        return count_walks(A, length, start=red)
    if kind == "walks-target":
        return count_walks(A, length, end=red)
    if kind == "walks-cycle":
        return count_walks(A, length, start=red, closed=True)
    return count_walks(A, length, start=red, end=red)


def walk_counting(kind: str, count: int = 600, n: int = 16, p: float = 0.15, length: int = 2,
                  seed: int = 0) -> GraphDataset:
    """Regression on directed random graphs: number of walks of ``length`` edges that
    start in / end in / close at / start and end in red vertices.

    Features: ``[const, colour]`` with colour +1 for red and -1 for blue.
    """
    if kind not in WALK_TASKS:
        raise ValueError(f"unknown walk task {kind!r}")
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for _ in range(count):
        A = _erdos_renyi(rng, n, p, directed=True)
        red = rng.random(n) < 0.5
        colour = np.where(red, 1.0, -1.0)
        graphs.append(Graph(A, np.column_stack([np.ones(n), colour]), directed=True))
        labels.append(_walk_target(kind, A, red, length))
    return GraphDataset(kind, graphs, np.array(labels), level="graph", kind="regression",
                        feature_names=["const", "colour"], constant_feature=True,
                        meta={"synth": kind, "seed": seed, "n": n, "p": p, "walk_length": length})


def walks_multiclass(count: int = 300, n: int = 16, p: float = 0.15, length: int = 2,
                     seed: int = 0) -> GraphDataset:
    """Three classes from the terciles of the number of walks starting in red vertices."""
    ds = walk_counting("walks-source", count, n, p, length, seed)
    cuts = np.quantile(ds.labels, [1 / 3, 2 / 3])
    labels = np.searchsorted(cuts, ds.labels, side="right")
    ds.labels = labels
    ds.kind, ds.name, ds.classes = "multiclass", "walks-multiclass", [0, 1, 2]
    ds.meta["synth"] = "walks-multiclass"
    return ds


def red_neighbor(count: int = 20, n: int = 20, p: float = 0.1, seed: int = 0) -> GraphDataset:
    """Vertex-level labels: 1 iff the vertex has a red neighbour. Features ``[const, red]``."""
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for _ in range(count):
        A = _erdos_renyi(rng, n, p, directed=False)
        red = (rng.random(n) < 0.3).astype(float)
        graphs.append(Graph(A, np.column_stack([np.ones(n), red])))
        labels.extend((A @ red > 0).astype(int).tolist())
    return GraphDataset("red-neighbor", graphs, np.array(labels), level="vertex", kind="binary",
                        feature_names=["const", "red"], constant_feature=True, classes=[0, 1],
                        meta={"synth": "red-neighbor", "seed": seed, "n": n, "p": p})


COORDINATES = np.array([(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)])


def coordinate_pair() -> GraphDataset:
    """Two single-edge graphs on the corners of the square {+-1}^2 with coordinate features.

    G1 joins (1,1)-(-1,-1), G2 joins (1,-1)-(-1,1): isomorphic topologies whose
    propagated features agree up to permutation, so no split over the whole
    vertex set tells them apart.
    """
    g1 = graph_from_edges(4, [(0, 3)], COORDINATES)
    g2 = graph_from_edges(4, [(1, 2)], COORDINATES)
    return GraphDataset("coordinate-pair", [g1, g2], np.array([1, 0]), level="graph", kind="binary",
                        feature_names=["x", "y"], classes=[0, 1], meta={"synth": "coordinate-pair"})


# 4-regular on 8 vertices with 4 triangles; the circulant C8(1, 2) has 8
_REGULAR_FOUR_TRIANGLES = [
    (0, 1), (0, 2), (0, 6), (0, 7), (1, 3), (1, 4), (1, 5), (2, 3),
    (2, 5), (2, 7), (3, 4), (3, 6), (4, 6), (4, 7), (5, 6), (5, 7),
]


def regular_pair() -> GraphDataset:
    """Two non-isomorphic 4-regular graphs on 8 vertices with different triangle counts.

    Every vertex carries the constant feature 1, so colour refinement (and
    hence message passing) cannot separate them.
    """
    circulant = [(i, (i + s) % 8) for i in range(8) for s in (1, 2)]
    g1 = graph_from_edges(8, circulant)
    g2 = graph_from_edges(8, _REGULAR_FOUR_TRIANGLES)
    return GraphDataset("regular-pair", [g1, g2], np.array([1, 0]), level="graph", kind="binary",
                        feature_names=["const"], constant_feature=True, classes=[0, 1],
                        meta={"synth": "regular-pair"})


def synth_tasks(kind: str, count: Optional[int] = None, seed: int = 0, **kwargs) -> GraphDataset:
    if kind == "red-isolated":
        return red_isolated(count or 1000, seed=seed, **kwargs)
    if kind in WALK_TASKS:
        return walk_counting(kind, count or 600, seed=seed, **kwargs)
    if kind == "walks-multiclass":
        return walks_multiclass(count or 300, seed=seed, **kwargs)
    if kind == "red-neighbor":
        return red_neighbor(count or 20, seed=seed, **kwargs)
    if kind == "coordinate-pair":
        return coordinate_pair()
    if kind == "regular-pair":
        return regular_pair()
    raise ValueError(f"unknown synthetic task {kind!r}; choose from {', '.join(SYNTH_KINDS)}")
