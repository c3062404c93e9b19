"""Graph container, walk-matrix powers and the four walk-restriction masks.

Adjacency convention: ``adjacency[i, j]`` is the weight of the edge from
vertex ``j`` to vertex ``i``, so ``(A @ f)[i]`` sums ``f`` over the
in-neighbours of ``i`` and ``(A^d)[i, j]`` is the weighted number of walks
of length ``d`` that start at ``j`` and end at ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np


class WalkType(IntEnum):
    """Restriction applied to the walks counted by ``A^d``."""

    SOURCE = 1  # walks starting in S
    CYCLE = 2  # closed walks at a vertex of S
    TARGET = 3  # walks ending in S
    TARGET_SOURCE = 4  # walks starting and ending in S

    @property
    def restricted(self) -> bool:
        """Whether graph-level aggregation runs only over the entries in S."""
        return self is not WalkType.SOURCE


VERTEX_WALK_TYPES = (WalkType.SOURCE, WalkType.CYCLE)
GRAPH_WALK_TYPES = tuple(WalkType)


class Graph:
    """A (possibly directed, possibly weighted) graph with vertex features.

    Parameters
    ----------
    adjacency : array_like, shape (n, n)
        ``adjacency[i, j]`` is the weight of the edge ``j -> i``.
    features : array_like, shape (n, l)
        Row ``i`` holds the feature vector of vertex ``i``.
    directed : bool
        When False the adjacency must be symmetric.
    """

    __slots__ = ("adjacency", "features", "directed")

    def __init__(self, adjacency, features, directed: bool = False):
        adjacency = np.array(adjacency, dtype=float)
        features = np.array(features, dtype=float)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adjacency.shape}")
        n = adjacency.shape[0]
        if features.ndim == 1 and n == 0:
            features = features.reshape(0, 0)
        if features.ndim != 2 or features.shape[0] != n:
            raise ValueError(
                f"features must have shape (n, l) with n={n}, got {features.shape}"
            )
        if not (np.isfinite(adjacency).all() and np.isfinite(features).all()):
            raise ValueError("adjacency and features must be finite")
        if not directed and not np.array_equal(adjacency, adjacency.T):
            raise ValueError("undirected graph requires a symmetric adjacency")
        adjacency.setflags(write=False)
        features.setflags(write=False)
        self.adjacency = adjacency
        self.features = features
        self.directed = bool(directed)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(source, target)`` pairs; undirected edges once with source <= target."""
        targets, sources = np.nonzero(self.adjacency)
        if self.directed:
            return sorted(zip(sources.tolist(), targets.tolist()))
        return sorted({(min(s, t), max(s, t)) for s, t in zip(sources.tolist(), targets.tolist())})

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Return the graph relabelled so that old vertex ``i`` becomes ``perm[i]``."""
        perm = np.asarray(perm)
        P = np.zeros((self.n, self.n))
        P[perm, np.arange(self.n)] = 1.0
        return Graph(P @ self.adjacency @ P.T, P @ self.features, directed=self.directed)

    def with_features(self, features) -> "Graph":
        return Graph(self.adjacency, features, directed=self.directed)

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, l={self.n_features}, {kind})"


@dataclass(frozen=True)
class VertexSubset:
    """Sorted distinct vertex indices plus the tree origin that produced them.

    ``origin`` is ``None`` for the whole vertex set V, otherwise a pair
    ``(ancestor_offset, sign)`` with ``sign`` in ``{+1, -1}``.
    """

    members: Tuple[int, ...]
    origin: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if any(b <= a for a, b in zip(members, members[1:])):
            members = tuple(sorted(set(members)))
        object.__setattr__(self, "members", members)
        if self.origin is not None and self.origin[1] not in (1, -1):
            raise ValueError(f"origin sign must be +1 or -1, got {self.origin[1]}")

    @classmethod
    def all(cls, n: int) -> "VertexSubset":
        return cls(tuple(range(n)), None)

    @property
    def is_all(self) -> bool:
        return self.origin is None

    def __len__(self) -> int:
        return len(self.members)

    def mask(self, n: int) -> np.ndarray:
        if self.members and (self.members[0] < 0 or self.members[-1] >= n):
            raise ValueError(f"subset index out of range for {n} vertices: {self.members}")
        out = np.zeros(n, dtype=bool)
        out[list(self.members)] = True
        return out

    def sort_key(self) -> tuple:
        if self.origin is None:
            return (0, 0)
        offset, sign = self.origin
        return (offset, 0 if sign > 0 else 1)


@dataclass(frozen=True)
class WalkMatrixCache:
    """``powers[d]`` is ``A^d`` for ``d = 0 .. max_depth``."""

    powers: Tuple[np.ndarray, ...] = field(repr=False)

    @property
    def max_depth(self) -> int:
        return len(self.powers) - 1

    def __getitem__(self, d: int) -> np.ndarray:
        return self.powers[d]


def walk_powers(g: Graph, max_depth: int) -> WalkMatrixCache:
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    current = np.eye(g.n)
    current.setflags(write=False)
    powers = [current]
    for _ in range(max_depth):
        current = g.adjacency @ current
        current.setflags(write=False)
        powers.append(current)
    return WalkMatrixCache(tuple(powers))


def walk_mask(subset_mask: np.ndarray, r: WalkType) -> np.ndarray:
    """The 0/1 matrix ``M_r(S)`` for a boolean membership vector."""
    s = np.asarray(subset_mask, dtype=bool)
    n = s.shape[0]
    r = WalkType(r)
    if r is WalkType.SOURCE:
        return np.broadcast_to(s[None, :], (n, n)).astype(float)
    if r is WalkType.CYCLE:
        return np.diag(s.astype(float))
    if r is WalkType.TARGET:
        return np.broadcast_to(s[:, None], (n, n)).astype(float)
    return np.outer(s, s).astype(float)


def masked_walks(power: np.ndarray, subset: VertexSubset, r: WalkType) -> np.ndarray:
    """Element-wise product ``A^d o M_r(S)``; the input is left untouched."""
    power = np.asarray(power)
    return power * walk_mask(subset.mask(power.shape[0]), r)


def used_edges(
    adjacency: np.ndarray,
    d: int,
    r: WalkType,
    subset_mask: np.ndarray,
    end: Optional[int] = None,
    directed: bool = True,
) -> set[tuple[int, int]]:
    """Edges lying on at least one nonzero-weight walk counted by ``A^d o M_r(S)``.

    ``end`` additionally pins the final vertex of the walk (vertex tasks read a
    single entry of the propagated vector). Edges are ``(source, target)``
    pairs, normalised to ``source <= target`` when ``directed`` is False.
    """
    if d == 0:
        return set()
    B = (np.asarray(adjacency) != 0).astype(np.int64)
    n = B.shape[0]
    s = np.asarray(subset_mask, dtype=bool)
    r = WalkType(r)
    # reach[t][i, j]: some walk of length t runs from j to i
    reach = [np.eye(n, dtype=bool)]
    for _ in range(d):
        reach.append((B @ reach[-1].astype(np.int64)) > 0)

    start_ok = s if r in (WalkType.SOURCE, WalkType.TARGET_SOURCE) else np.ones(n, dtype=bool)
    end_ok = s if r in (WalkType.TARGET, WalkType.TARGET_SOURCE) else np.ones(n, dtype=bool)
    if end is not None:
        pinned = np.zeros(n, dtype=bool)
        pinned[end] = True
        end_ok = end_ok & pinned

    used = np.zeros((n, n), dtype=bool)  # used[b, a]: edge a -> b
    edge = B > 0
    for t in range(1, d + 1):
        before, after = reach[t - 1], reach[d - t]
        if r is WalkType.CYCLE:
            anchors = np.flatnonzero(s & end_ok)
            for v in anchors:
                tail_ok = before[:, v]  # a reachable from v in t-1 steps
                head_ok = after[v, :]  # b reaches v in d-t steps
                used |= edge & head_ok[:, None] & tail_ok[None, :]
        else:
            tail_ok = before[:, start_ok].any(axis=1)
            head_ok = after[end_ok, :].any(axis=0)
            used |= edge & head_ok[:, None] & tail_ok[None, :]

    heads, tails = np.nonzero(used)
    if directed:
        return {(int(a), int(b)) for b, a in zip(heads, tails)}
    return {(int(min(a, b)), int(max(a, b))) for b, a in zip(heads, tails)}


def graph_from_edges(
    n: int,
    edges: Iterable[tuple[int, int]],
    features=None,
    directed: bool = False,
    weights: Optional[Iterable[float]] = None,
) -> Graph:
    """Build a graph from ``(source, target)`` pairs; features default to one constant column."""
    A = np.zeros((n, n))
    edges = list(edges)
    weights = [1.0] * len(edges) if weights is None else list(weights)
    for (src, dst), w in zip(edges, weights):
        A[dst, src] = w
        if not directed:
            A[src, dst] = w
    if features is None:
        features = np.ones((n, 1))
    return Graph(A, features, directed=directed)
