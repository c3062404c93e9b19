"""Dataset ingestion in the TUDataset text layout, plus feature and line-graph transforms.

Files read from ``<dir>/<NAME>_*.txt``:

``A``                 one ``src, dst`` pair of 1-based global vertex ids per line
``graph_indicator``   1-based graph id of every vertex
``graph_labels``      one label per graph
``node_labels``       optional categorical label per vertex (one-hot encoded)
``node_attributes``   optional comma-separated reals per vertex
``edge_weights``      optional weight per line of ``A`` (weighted adjacency)
``node_targets``      optional per-vertex target (vertex-level datasets)

An optional ``<NAME>_manifest.json`` records directedness, the task kind
and the feature schema. Self-loops are kept as given.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graph import Graph


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message names the file and line."""


@dataclass
class GraphDataset:
    name: str
    graphs: list[Graph]
    labels: np.ndarray
    level: str = "graph"
    kind: str = "binary"
    feature_names: list[str] = field(default_factory=list)
    constant_feature: bool = False
    classes: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        widths = {g.n_features for g in self.graphs}
        if len(widths) > 1:
            raise ValueError(f"graphs disagree on feature count: {sorted(widths)}")
        expected = len(self.graphs) if self.level == "graph" else sum(g.n for g in self.graphs)
        if len(self.labels) != expected:
            raise ValueError(f"expected {expected} labels, got {len(self.labels)}")

    @property
    def n_features(self) -> int:
        return self.graphs[0].n_features if self.graphs else 0

    @property
    def n_classes(self) -> int:
        return 0 if self.kind == "regression" else int(len(np.unique(self.labels)))

    def vertex_examples(self):
        """``(graphs, vertices, labels)`` with one entry per vertex (vertex-level data)."""
        graphs, vertices = [], []
        for g in self.graphs:
            graphs.extend([g] * g.n)
            vertices.extend(range(g.n))
        return graphs, np.array(vertices, dtype=np.int64), self.labels

    def subset(self, index: Sequence[int]) -> "GraphDataset":
        if self.level != "graph":
            raise ValueError("subset() selects graphs of a graph-level dataset")
        index = list(index)
        return replace(self, graphs=[self.graphs[i] for i in index], labels=self.labels[index])


def _read_lines(path: Path) -> list[tuple[int, str]]:
    with open(path) as fh:
        return [(no, line.strip()) for no, line in enumerate(fh, start=1) if line.strip()]


def _parse_numbers(path: Path, cast, width: Optional[int] = None) -> list:
    rows = []
    for no, line in _read_lines(path):
        parts = [p.strip() for p in line.split(",")]
        try:
            row = [cast(p) for p in parts]
        except ValueError:
            raise DatasetFormatError(f"{path}:{no}: cannot parse {line!r}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetFormatError(f"{path}:{no}: expected {width} values, got {len(row)}")
        rows.append(row)
    return rows


def _int_label(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(text)
    return int(value)


def load_tudataset(directory, name: str, kind: Optional[str] = None,
                   directed: Optional[bool] = None) -> GraphDataset:
    """Read dataset ``name`` from ``directory``.

    ``kind`` and ``directed`` default to the manifest when present, otherwise
    to a classification task over undirected graphs. Classification labels
    are remapped to ``0..C-1`` by sorted original value.
    """
    base = Path(directory)
    prefix = base / name

    def file(suffix: str) -> Path:
        return Path(f"{prefix}_{suffix}.txt")

    manifest = {}
    manifest_path = Path(f"{prefix}_manifest.json")
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    kind = kind or manifest.get("kind", "classification")
    directed = manifest.get("directed", False) if directed is None else directed
    level = manifest.get("level", "graph")

    for required in ("A", "graph_indicator"):
        if not file(required).exists():
            raise FileNotFoundError(f"missing {file(required)}")

    indicator = [row[0] for row in _parse_numbers(file("graph_indicator"), int, 1)]
    n_vertices = len(indicator)
    graph_ids = sorted(set(indicator))
    if graph_ids != list(range(1, len(graph_ids) + 1)):
        raise DatasetFormatError(f"{file('graph_indicator')}: graph ids must run 1..N without gaps")
    n_graphs = len(graph_ids)
    indicator = np.array(indicator) - 1
    if np.any(np.diff(indicator) < 0):
        raise DatasetFormatError(f"{file('graph_indicator')}: vertices must be grouped by graph")
    starts = np.searchsorted(indicator, np.arange(n_graphs))
    sizes = np.bincount(indicator, minlength=n_graphs)

    columns, names = [], []
    if file("node_labels").exists():
        raw = np.array([row[0] for row in _parse_numbers(file("node_labels"), _int_label, 1)])
        if len(raw) != n_vertices:
            raise DatasetFormatError(f"{file('node_labels')}: {len(raw)} rows for {n_vertices} vertices")
        values = np.unique(raw)
        columns.append((raw[:, None] == values[None, :]).astype(float))
        names.extend(f"node_label={v}" for v in values)
    if file("node_attributes").exists():
        attrs = np.array(_parse_numbers(file("node_attributes"), float), dtype=float)
        if len(attrs) != n_vertices:
            raise DatasetFormatError(
                f"{file('node_attributes')}: {len(attrs)} rows for {n_vertices} vertices")
        columns.append(attrs.reshape(n_vertices, -1))
        names.extend(manifest.get("attribute_names") or
                     [f"attr{j}" for j in range(columns[-1].shape[1])])
    X = np.hstack(columns) if columns else np.zeros((n_vertices, 0))

    adjacency = [np.zeros((n, n)) for n in sizes]
    edge_lines = _read_lines(file("A"))
    weights = None
    if file("edge_weights").exists():
        weights = [row[0] for row in _parse_numbers(file("edge_weights"), float, 1)]
        if len(weights) != len(edge_lines):
            raise DatasetFormatError(f"{file('edge_weights')}: {len(weights)} rows for {len(edge_lines)} edges")
    for pos, (no, line) in enumerate(edge_lines):
        try:
            src, dst = (int(p) - 1 for p in line.split(","))
        except ValueError:
            raise DatasetFormatError(f"{file('A')}:{no}: cannot parse edge {line!r}") from None
        if not (0 <= src < n_vertices and 0 <= dst < n_vertices):
            raise DatasetFormatError(f"{file('A')}:{no}: vertex id out of range in {line!r}")
        g = indicator[src]
        if indicator[dst] != g:
            raise DatasetFormatError(f"{file('A')}:{no}: edge joins graphs {g + 1} and {indicator[dst] + 1}")
        w = 1.0 if weights is None else weights[pos]
        i, j = dst - starts[g], src - starts[g]
        adjacency[g][i, j] = w
        if not directed:
            adjacency[g][j, i] = w

    graphs = [Graph(adjacency[g], X[starts[g]:starts[g] + sizes[g]], directed=directed)
              for g in range(n_graphs)]

    if level == "vertex":
        label_file = file("node_targets")
        expected = n_vertices
    else:
        label_file = file("graph_labels")
        expected = n_graphs
    raw_labels = np.array([row[0] for row in _parse_numbers(label_file, float, 1)])
    if len(raw_labels) != expected:
        raise DatasetFormatError(f"{label_file}: {len(raw_labels)} labels for {expected} examples")

    classes = None
    if kind == "regression":
        labels = raw_labels
    else:
        classes = np.unique(raw_labels)
        labels = np.searchsorted(classes, raw_labels)
        kind = "binary" if len(classes) <= 2 else "multiclass"
        classes = [c.item() for c in classes]

    return GraphDataset(
        name=name,
        graphs=graphs,
        labels=labels,
        level=level,
        kind=kind,
        feature_names=names,
        constant_feature=bool(manifest.get("constant_feature", False)),
        classes=classes,
        meta={k: v for k, v in manifest.items() if k not in ("attribute_names",)},
    )


def save_tudataset(ds: GraphDataset, directory, name: Optional[str] = None) -> Path:
    """Write ``ds`` in the layout read by :func:`load_tudataset` (features as node attributes)."""
    name = name or ds.name
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    prefix = out / name
    edges, weights, indicator, attrs = [], [], [], []
    offset = 0
    for gi, g in enumerate(ds.graphs):
        targets, sources = np.nonzero(g.adjacency)
        for i, j in sorted(zip(targets.tolist(), sources.tolist()), key=lambda p: (p[1], p[0])):
            edges.append(f"{offset + j + 1}, {offset + i + 1}")
            weights.append(g.adjacency[i, j])
        indicator.extend([str(gi + 1)] * g.n)
        attrs.extend(", ".join(repr(float(x)) for x in row) for row in g.features)
        offset += g.n

    def write(suffix: str, lines) -> None:
        Path(f"{prefix}_{suffix}.txt").write_text("".join(f"{line}\n" for line in lines))

    write("A", edges)
    if any(w != 1.0 for w in weights):
        write("edge_weights", (repr(float(w)) for w in weights))
    write("graph_indicator", indicator)
    if ds.n_features:
        write("node_attributes", attrs)
    labels = ds.labels
    if ds.kind != "regression" and ds.classes is not None:
        labels = np.asarray(ds.classes)[labels]
    label_lines = (repr(float(v)) if ds.kind == "regression" else str(v) for v in labels.tolist())
    write("node_targets" if ds.level == "vertex" else "graph_labels", label_lines)

    manifest = dict(ds.meta)
    manifest.update(
        name=name,
        level=ds.level,
        kind="regression" if ds.kind == "regression" else "classification",
        directed=any(g.directed for g in ds.graphs),
        constant_feature=ds.constant_feature,
        attribute_names=list(ds.feature_names),
    )
    Path(f"{prefix}_manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out


def add_constant_feature(ds: GraphDataset) -> GraphDataset:
    """Append an all-ones feature column to every graph."""
    graphs = [g.with_features(np.hstack([g.features, np.ones((g.n, 1))])) for g in ds.graphs]
    return replace(ds, graphs=graphs, feature_names=list(ds.feature_names) + ["const"],
                   constant_feature=True)


def line_graph(g: Graph) -> tuple[Graph, list[tuple[int, int]]]:
    """Line graph of an undirected graph and the original edge behind each line-graph vertex.

    Vertex features of the line graph are a single constant column.
    """
    if g.directed:
        raise ValueError("line_graph expects an undirected graph")
    edges = [e for e in g.edges() if e[0] != e[1]]
    m = len(edges)
    A = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            if set(edges[a]) & set(edges[b]):
                A[a, b] = A[b, a] = 1.0
    return Graph(A, np.ones((m, 1))), edges
