"""Vertex and edge importance from the subsets selected along prediction paths.

For every tree the vertices (edges) are ranked by how many split-nodes on
the example's path selected (used) them; rank ``r`` contributes
``|y_T| * 2**-r`` where ``y_T`` is the tree's output, and the totals are
normalised to sum to one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import Ensemble, labels_from_scores
from .graph import Graph
from .tree import predict_tree


def competition_rank(counts) -> np.ndarray:
    """Rank under decreasing sort; tied counts share the smallest rank (1, 1, 3, ...)."""
    counts = np.asarray(counts)
    return 1 + (counts[None, :] > counts[:, None]).sum(axis=1)


def combine_ranks(tree_values, ranks) -> np.ndarray:
    """Normalised ``sum_T |y_T| 2^-r_T(i)``; uniform when every ``y_T`` is zero."""
    ranks = np.asarray(ranks, dtype=float)
    if ranks.ndim != 2 or ranks.shape[1] == 0:
        return np.zeros(ranks.shape[-1] if ranks.ndim else 0)
    weights = np.abs(np.asarray(tree_values, dtype=float))
    scores = (weights[:, None] * np.exp2(-ranks)).sum(axis=0)
    total = scores.sum()
    if total == 0:
        return np.full(ranks.shape[1], 1.0 / ranks.shape[1])
    return scores / total


@dataclass
class TreeDiagnostics:
    tree_index: int
    output: float  # y_T
    vertex_counts: list[int]  # n_T(i)
    vertex_ranks: list[int]  # r_T(i)
    edge_counts: list[int]


@dataclass
class ExplanationReport:
    vertex_importance: dict[int, float]
    edge_importance: dict[tuple[int, int], float]
    trees: list[TreeDiagnostics] = field(default_factory=list)
    target_vertex: Optional[int] = None
    class_index: int = 0

    def ranked_vertices(self) -> list[tuple[int, float]]:
        return sorted(self.vertex_importance.items(), key=lambda kv: (-kv[1], kv[0]))

    def ranked_edges(self) -> list[tuple[tuple[int, int], float]]:
        return sorted(self.edge_importance.items(), key=lambda kv: (-kv[1], kv[0]))

    def to_dict(self) -> dict:
        return {
            "target_vertex": self.target_vertex,
            "class_index": self.class_index,
            "vertices": [{"vertex": v, "importance": s} for v, s in self.ranked_vertices()],
            "edges": [{"edge": list(e), "importance": s} for e, s in self.ranked_edges()],
            "trees": [
                {"tree": t.tree_index, "y": t.output, "n": t.vertex_counts, "r": t.vertex_ranks}
                for t in self.trees
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_dot(self, g: Graph, name: str = "explanation") -> str:
        """Graphviz source with vertex size and edge width scaled by importance."""
        top = max(self.vertex_importance.values(), default=0.0) or 1.0
        etop = max(self.edge_importance.values(), default=0.0) or 1.0
        arrow = "->" if g.directed else "--"
        lines = [f"{'digraph' if g.directed else 'graph'} {name} {{", "  node [shape=circle];"]
        for v, s in sorted(self.vertex_importance.items()):
            width = 0.2 + 0.8 * s / top
            lines.append(f'  {v} [width={width:.3f}, label="{v}", tooltip="{s:.6g}"];')
        for (a, b) in g.edges():
            s = self.edge_importance.get((a, b), 0.0)
            lines.append(f'  {a} {arrow} {b} [penwidth={0.5 + 3.5 * s / etop:.3f}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _output_index(ens: Ensemble, g: Graph, i: Optional[int], class_index: Optional[int]) -> int:
    if ens.task.kind != "multiclass":
        return 0
    if class_index is not None:
        return int(class_index)
    scores = ens.decision_function([g], None if i is None else [i])
    return int(labels_from_scores(ens.task, scores)[0])


def explain(ens: Ensemble, g: Graph, i: Optional[int] = None,
            class_index: Optional[int] = None) -> ExplanationReport:
    """Vertex and edge importances for one graph (or vertex ``i`` of a vertex task).

    Multiclass models explain the trees of ``class_index``, by default the
    predicted class.
    """
    if (ens.task.level == "vertex") != (i is not None):
        raise ValueError("vertex tasks need a vertex index; graph tasks must not pass one")
    if g.n_features != ens.n_features:
        raise ValueError(f"model expects {ens.n_features} features, graph has {g.n_features}")
    c = _output_index(ens, g, i, class_index)
    edges = g.edges()
    edge_pos = {e: p for p, e in enumerate(edges)}
    outputs, vranks, eranks, diagnostics = [], [], [], []
    for t, tree in enumerate(ens.trees[c]):
        value, path = predict_tree(tree, g, i)
        vcount = np.zeros(g.n, dtype=np.int64)
        ecount = np.zeros(len(edges), dtype=np.int64)
        for step in path:
            vcount[list(step.subset.members)] += 1
            for e in step.used_edges:
                ecount[edge_pos[e]] += 1
        outputs.append(value)
        vr = competition_rank(vcount)
        vranks.append(vr)
        eranks.append(competition_rank(ecount))
        diagnostics.append(TreeDiagnostics(t, value, vcount.tolist(), vr.tolist(), ecount.tolist()))

    if g.n and outputs:
        vimp = combine_ranks(outputs, np.array(vranks))
    else:
        vimp = np.full(g.n, 1.0 / g.n) if g.n else np.zeros(0)
    if edges and outputs:
        eimp = combine_ranks(outputs, np.array(eranks))
    else:
        eimp = np.full(len(edges), 1.0 / len(edges)) if edges else np.zeros(0)
    return ExplanationReport(
        vertex_importance={v: float(s) for v, s in enumerate(vimp)},
        edge_importance={e: float(s) for e, s in zip(edges, eimp)},
        trees=diagnostics,
        target_vertex=i,
        class_index=c,
    )


def vertex_importance(ens: Ensemble, g: Graph, i: Optional[int] = None) -> dict[int, float]:
    return explain(ens, g, i).vertex_importance


def edge_importance(ens: Ensemble, g: Graph, i: Optional[int] = None) -> dict[tuple[int, int], float]:
    return explain(ens, g, i).edge_importance
