"""Padded, stacked walk matrices for evaluating dynamic features over many graphs at once.

Graphs are zero-padded to a common vertex count. Padding only appends
zero terms to every sum, so a graph's values do not depend on which other
graphs share the batch; training-time routing and later prediction see
identical numbers.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .features import Aggregator
from .graph import Graph, WalkType, walk_powers


def _propagate(powers: np.ndarray, values: np.ndarray) -> np.ndarray:
    # einsum keeps a fixed summation order over vertices regardless of batch shape
    return np.einsum("gij,gjk->gik", powers, values, optimize=False)


class GraphBatch:
    """Walk powers ``A^0..A^max_d`` and features for a list of graphs, padded to ``n_max``."""

    def __init__(self, graphs: Sequence[Graph], max_d: int):
        if not graphs:
            raise ValueError("a batch needs at least one graph")
        widths = {g.n_features for g in graphs}
        if len(widths) != 1:
            raise ValueError(f"graphs disagree on feature count: {sorted(widths)}")
        self.graphs = list(graphs)
        self.max_d = int(max_d)
        self.n_features = widths.pop()
        self.sizes = np.array([g.n for g in graphs], dtype=np.int64)
        G, n_max, l = len(graphs), max(1, int(self.sizes.max())), self.n_features
        self.n_max = n_max

        self.valid = np.arange(n_max)[None, :] < self.sizes[:, None]
        self.X = np.zeros((G, n_max, l))
        self.powers = np.zeros((self.max_d + 1, G, n_max, n_max))
        for gi, g in enumerate(graphs):
            n = g.n
            self.X[gi, :n] = g.features
            cache = walk_powers(g, self.max_d)
            for d in range(self.max_d + 1):
                self.powers[d, gi, :n, :n] = cache[d]
        self.diag = np.ascontiguousarray(np.diagonal(self.powers, axis1=2, axis2=3))
        self.AX = np.stack([_propagate(self.powers[d], self.X) for d in range(self.max_d + 1)])

    def __len__(self) -> int:
        return len(self.graphs)

    def vertex_values(
        self,
        idx: np.ndarray,
        d: int,
        subset: np.ndarray,
        types: Iterable[WalkType],
        whole: bool = False,
    ) -> dict[WalkType, np.ndarray]:
        """Propagated vectors ``(A^d o M_r(S)) X`` for graphs ``idx``, shape ``(len(idx), n_max, l)``.

        ``subset`` is the boolean membership of S for those graphs; ``whole``
        marks S = V so the precomputed unmasked product can be reused.
        """
        s = subset[:, :, None]
        X = self.X[idx]
        out = {}
        source = None
        for r in types:
            r = WalkType(r)
            if r in (WalkType.SOURCE, WalkType.TARGET_SOURCE) and source is None:
                source = self.AX[d][idx] if whole else _propagate(self.powers[d][idx], X * s)
            if r is WalkType.SOURCE:
                out[r] = source
            elif r is WalkType.CYCLE:
                out[r] = self.diag[d][idx][:, :, None] * X * s
            elif r is WalkType.TARGET:
                out[r] = self.AX[d][idx] * s
            else:
                out[r] = source * s
        return out


def aggregate(values: np.ndarray, region: np.ndarray) -> np.ndarray:
    """All four aggregations of ``values`` (g, n, l) over ``region`` (g, n).

    Returns shape ``(4, g, l)`` in :class:`Aggregator` order; an empty region
    aggregates to 0.
    """
    r = region[:, :, None]
    count = region.sum(axis=1)[:, None].astype(float)
    empty = count == 0
    total = np.where(r, values, 0.0).sum(axis=1)
    mean = total / np.where(empty, 1.0, count)
    low = np.where(r, values, np.inf).min(axis=1)
    high = np.where(r, values, -np.inf).max(axis=1)
    low = np.where(empty, 0.0, low)
    high = np.where(empty, 0.0, high)
    return np.stack([total, mean, low, high])


AGGREGATORS = tuple(Aggregator)
