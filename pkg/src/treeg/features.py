"""Dynamic graph features: walk propagation of a vertex feature over a masked walk matrix.

These are the per-graph reference routines. Tree learning evaluates the same
quantities for many graphs at once through :mod:`treeg.batch`.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import (
    GRAPH_WALK_TYPES,
    VERTEX_WALK_TYPES,
    Graph,
    VertexSubset,
    WalkMatrixCache,
    WalkType,
    masked_walks,
)


class Aggregator(IntEnum):
    SUM = 0
    MEAN = 1
    MIN = 2
    MAX = 3

    def __call__(self, values: np.ndarray) -> float:
        if self is Aggregator.SUM:
            return float(np.sum(values))
        if self is Aggregator.MEAN:
            return float(np.mean(values))
        if self is Aggregator.MIN:
            return float(np.min(values))
        return float(np.max(values))


class EmptyAggregationError(ValueError):
    """Restricted aggregation was requested over an empty vertex subset."""


@dataclass(frozen=True)
class FeatureSpec:
    k: int
    d: int
    subset: VertexSubset
    r: WalkType
    agg: Optional[Aggregator] = None

    def sort_key(self) -> tuple:
        return (
            self.k,
            self.d,
            self.subset.sort_key(),
            int(self.r),
            -1 if self.agg is None else int(self.agg),
        )


def propagate(g: Graph, cache: WalkMatrixCache, spec: FeatureSpec) -> np.ndarray:
    """The vector ``(A^d o M_r(S)) f_k`` over all vertices."""
    if not 0 <= spec.k < g.n_features:
        raise ValueError(f"feature index {spec.k} out of range for {g.n_features} features")
    if not 0 <= spec.d <= cache.max_depth:
        raise ValueError(f"walk depth {spec.d} exceeds cached depth {cache.max_depth}")
    return masked_walks(cache[spec.d], spec.subset, spec.r) @ g.features[:, spec.k]


def phi_vertex(g: Graph, cache: WalkMatrixCache, spec: FeatureSpec, i: int) -> float:
    if spec.agg is not None:
        raise ValueError("vertex-level features take no aggregator")
    if spec.r not in VERTEX_WALK_TYPES:
        raise ValueError(f"walk type {spec.r!r} is not available for vertex tasks")
    if not 0 <= i < g.n:
        raise ValueError(f"vertex {i} out of range for {g.n} vertices")
    return float(propagate(g, cache, spec)[i])


def phi_graph(
    g: Graph,
    cache: WalkMatrixCache,
    spec: FeatureSpec,
    empty_value: Optional[float] = None,
) -> float:
    """Aggregate the propagated vector; non-source walk types aggregate only over S.

    An empty restricted aggregation raises :class:`EmptyAggregationError`
    unless ``empty_value`` is given.
    """
    if spec.agg is None:
        raise ValueError("graph-level features need an aggregator")
    v = propagate(g, cache, spec)
    if WalkType(spec.r).restricted:
        v = v[list(spec.subset.members)]
    if v.size == 0:
        if empty_value is None:
            raise EmptyAggregationError(f"empty aggregation for {spec}")
        return float(empty_value)
    return Aggregator(spec.agg)(v)


def max_candidates(l: int, max_depth: int, max_ancestor: int, graph_task: bool) -> int:
    """Upper bound on candidate features per split (walk depths 0..max_depth)."""
    n_types = len(GRAPH_WALK_TYPES) if graph_task else len(VERTEX_WALK_TYPES)
    n_aggs = len(Aggregator) if graph_task else 1
    return n_aggs * n_types * (2 * max_ancestor + 1) * (max_depth + 1) * l


def enumerate_candidate_specs(
    l: int,
    max_depth: int,
    available_subsets: Sequence[VertexSubset],
    sampled_walk_types: Iterable[WalkType],
    graph_task: bool,
) -> list[FeatureSpec]:
    """All candidate specs for one split, in lexicographic (k, d, subset, r, agg) order."""
    if not any(s.is_all for s in available_subsets):
        raise ValueError("available subsets must include the whole vertex set")
    types = sorted({WalkType(r) for r in sampled_walk_types})
    allowed = GRAPH_WALK_TYPES if graph_task else VERTEX_WALK_TYPES
    if any(r not in allowed for r in types):
        raise ValueError(f"walk types {types} not permitted for this task")
    subsets = sorted(available_subsets, key=VertexSubset.sort_key)
    aggs: list[Optional[Aggregator]] = list(Aggregator) if graph_task else [None]
    specs = []
    for k in range(l):
        for d in range(max_depth + 1):
            for subset in subsets:
                for r in types:
                    if graph_task and r.restricted and len(subset) == 0:
                        continue
                    for agg in aggs:
                        specs.append(FeatureSpec(k, d, subset, r, agg))
    return specs
