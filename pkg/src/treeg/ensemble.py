"""Gradient-boosted ensembles of dynamic-feature trees and their JSON model format."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .features import Aggregator
from .graph import Graph, WalkType
from .tree import (
    ExampleSet,
    SplitParams,
    TrainConfig,
    TreeBuilder,
    TreeNode,
    check_features,
    route,
)

logger = logging.getLogger(__name__)

FORMAT_NAME = "treeg-model"
FORMAT_VERSION = 1
KINDS = ("regression", "binary", "multiclass")
_EPS = 1e-12


class ModelFormatError(ValueError):
    """A model file could not be parsed."""


@dataclass(frozen=True)
class Task:
    level: str = "graph"
    kind: str = "binary"
    n_classes: int = 2

    def __post_init__(self):
        if self.level not in ("graph", "vertex"):
            raise ValueError(f"unknown task level {self.level!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "multiclass" and self.n_classes < 2:
            raise ValueError("multiclass tasks need at least two classes")

    @property
    def n_outputs(self) -> int:
        return self.n_classes if self.kind == "multiclass" else 1


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def _loss(kind: str, y: np.ndarray, score: np.ndarray) -> float:
    if kind == "regression":
        return float(0.5 * np.mean((y - score) ** 2))
    # logistic loss, written to stay finite for large |score|
    return float(np.mean(np.logaddexp(0.0, score) - y * score))


@dataclass
class Ensemble:
    task: Task
    base_score: list[float]
    trees: list[list[TreeNode]]
    learning_rate: float = 0.1
    config: TrainConfig = field(default_factory=TrainConfig)
    n_features: int = 0
    train_loss: list[list[float]] = field(default_factory=list)

    @property
    def n_estimators(self) -> int:
        return len(self.trees[0]) if self.trees else 0

    def _examples(self, graphs: Sequence[Graph], vertices=None) -> ExampleSet:
        if isinstance(graphs, Graph):
            raise TypeError("pass a list of graphs")
        for g in graphs:
            if g.n_features != self.n_features:
                raise ValueError(
                    f"model expects {self.n_features} features, graph has {g.n_features}"
                )
        if (self.task.level == "vertex") != (vertices is not None):
            raise ValueError(f"{self.task.level} task: vertices must be "
                             f"{'given' if self.task.level == 'vertex' else 'omitted'}")
        return ExampleSet.from_graphs(graphs, self.config.max_d, vertices)

    def tree_outputs(self, graphs: Sequence[Graph], vertices=None) -> np.ndarray:
        """Raw leaf values, shape (n_outputs, n_estimators, m)."""
        examples = self._examples(graphs, vertices)
        m = len(examples)
        out = np.zeros((self.task.n_outputs, self.n_estimators, m))
        for c, trees in enumerate(self.trees):
            for t, tree in enumerate(trees):
                out[c, t] = route(tree, examples)[0]
        return out

    def decision_function(self, graphs: Sequence[Graph], vertices=None) -> np.ndarray:
        """Boosted scores: shape (m,) or (m, n_classes) for multiclass."""
        raw = self.tree_outputs(graphs, vertices)
        scores = np.empty((raw.shape[2], raw.shape[0]))
        for c in range(raw.shape[0]):
            total = np.full(raw.shape[2], self.base_score[c])
            for t in range(raw.shape[1]):
                total = total + self.learning_rate * raw[c, t]
            scores[:, c] = total
        return scores[:, 0] if self.task.kind != "multiclass" else scores

    def predict(self, graphs: Sequence[Graph], vertices=None) -> np.ndarray:
        return labels_from_scores(self.task, self.decision_function(graphs, vertices))

    def predict_proba(self, graphs: Sequence[Graph], vertices=None) -> np.ndarray:
        if self.task.kind == "regression":
            raise ValueError("regression models have no class probabilities")
        return _sigmoid(self.decision_function(graphs, vertices))

    def save(self, path) -> None:
        save_model(self, path)


def labels_from_scores(task: Task, scores: np.ndarray) -> np.ndarray:
    if task.kind == "regression":
        return scores
    if task.kind == "binary":
        return (_sigmoid(scores) > 0.5).astype(np.int64)
    return np.argmax(scores, axis=1).astype(np.int64)


def _check_labels(task: Task, y: np.ndarray) -> None:
    if not np.isfinite(y).all():
        raise ValueError("labels must be finite")
    if task.kind == "binary" and not np.isin(y, (0, 1)).all():
        raise ValueError("binary labels must be 0 or 1")
    if task.kind == "multiclass":
        if not np.array_equal(y, np.round(y)) or y.min() < 0 or y.max() >= task.n_classes:
            raise ValueError(f"multiclass labels must be integers in [0, {task.n_classes})")


def _boost(examples: ExampleSet, y: np.ndarray, kind: str, n_estimators: int,
           learning_rate: float, config: TrainConfig):
    if kind == "regression":
        base = float(np.mean(y))
    else:
        p = float(np.clip(np.mean(y), _EPS, 1 - _EPS))
        base = float(np.log(p / (1 - p)))
    score = np.full(len(y), base)
    losses = [_loss(kind, y, score)]
    trees = []
    for t in range(n_estimators):
        residual = y - score if kind == "regression" else y - _sigmoid(score)
        builder = TreeBuilder(examples, config, tree_index=t)
        tree = builder.fit(residual)
        leaf_value = {node.node_id: node.value for node in tree.nodes() if node.is_leaf}
        step = np.array([leaf_value[n] for n in builder.leaf_of])
        score = score + learning_rate * step
        loss = _loss(kind, y, score)
        if loss > losses[-1] + 1e-12 * max(1.0, abs(losses[-1])):
            raise RuntimeError(f"training loss increased at tree {t}: {losses[-1]} -> {loss}")
        losses.append(loss)
        trees.append(tree)
        logger.debug("tree %d: loss %.6g, %d nodes", t, loss, sum(1 for _ in tree.nodes()))
    return base, trees, losses


def fit_ensemble(
    graphs: Sequence[Graph],
    labels,
    task: Task = Task(),
    n_estimators: int = 50,
    learning_rate: float = 0.1,
    config: TrainConfig = TrainConfig(),
    vertices=None,
) -> Ensemble:
    """Least-squares boosting for regression, logistic boosting for binary labels,
    one-vs-all logistic boosting for multiclass labels."""
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if n_estimators < 0:
        raise ValueError("n_estimators must be >= 0")
    y = np.asarray(labels, dtype=float)
    if len(y) != len(graphs):
        raise ValueError("one label per example is required")
    if (task.level == "vertex") != (vertices is not None):
        raise ValueError("vertex tasks need vertex indices; graph tasks must not pass them")
    _check_labels(task, y)
    examples = ExampleSet.from_graphs(graphs, config.max_d, vertices)
    if task.kind == "multiclass":
        targets = [(y == c).astype(float) for c in range(task.n_classes)]
        kind = "binary"
    else:
        targets, kind = [y], task.kind
    bases, forest, losses = [], [], []
    for target in targets:
        base, trees, loss = _boost(examples, target, kind, n_estimators, learning_rate, config)
        bases.append(base)
        forest.append(trees)
        losses.append(loss)
    return Ensemble(task, bases, forest, learning_rate, config,
                    examples.batch.n_features, losses)


def predict(ens: Ensemble, g: Graph, i: Optional[int] = None):
    """Score(s) and label for a single graph (or vertex ``i`` of it)."""
    vertices = None if i is None else [i]
    scores = ens.decision_function([g], vertices)
    label = labels_from_scores(ens.task, scores)[0]
    return scores[0], label


# -- serialization -------------------------------------------------------------

def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"id": node.node_id, "value": node.value}
    s = node.split
    return {
        "id": node.node_id,
        "value": node.value,
        "split": {
            "k": s.k,
            "d": s.d,
            "u": s.u,
            "rho": s.rho,
            "r": int(s.r),
            "agg": None if s.agg is None else int(s.agg),
            "theta": s.theta,
        },
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(data: dict) -> TreeNode:
    node = TreeNode(int(data["id"]), float(data["value"]))
    if "split" in data:
        s = data["split"]
        node.split = SplitParams(
            int(s["k"]), int(s["d"]), int(s["u"]), int(s["rho"]), WalkType(s["r"]),
            None if s["agg"] is None else Aggregator(s["agg"]), float(s["theta"]),
        )
        node.left = _node_from_dict(data["left"])
        node.right = _node_from_dict(data["right"])
    return node


def model_to_dict(ens: Ensemble) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "task": asdict(ens.task),
        "n_features": ens.n_features,
        "learning_rate": ens.learning_rate,
        "n_estimators": ens.n_estimators,
        "train_config": ens.config.to_dict(),
        "base_score": list(ens.base_score),
        "train_loss": [list(l) for l in ens.train_loss],
        "trees": [[_node_to_dict(t) for t in trees] for trees in ens.trees],
    }


def model_from_dict(data: dict) -> Ensemble:
    if data.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"not a {FORMAT_NAME} file (format={data.get('format')!r})")
    if data.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model version {data.get('version')!r}, expected {FORMAT_VERSION}"
        )
    try:
        ens = Ensemble(
            task=Task(**data["task"]),
            base_score=[float(b) for b in data["base_score"]],
            trees=[[_node_from_dict(t) for t in trees] for trees in data["trees"]],
            learning_rate=float(data["learning_rate"]),
            config=TrainConfig.from_dict(data["train_config"]),
            n_features=int(data["n_features"]),
            train_loss=[list(map(float, l)) for l in data.get("train_loss", [])],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model: {exc!r}") from exc
    if len(ens.trees) != ens.task.n_outputs or len(ens.base_score) != ens.task.n_outputs:
        raise ModelFormatError("tree/base-score count does not match the task")
    for trees in ens.trees:
        for tree in trees:
            check_features(tree, ens.n_features)
    return ens


def dumps_model(ens: Ensemble) -> str:
    return json.dumps(model_to_dict(ens), indent=1) + "\n"


def save_model(ens: Ensemble, path) -> None:
    Path(path).write_text(dumps_model(ens))


def loads_model(text: str, source: str = "<string>") -> Ensemble:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno <= len(text.splitlines()) else ""
        raise ModelFormatError(
            f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}: {line.strip()!r}"
        ) from exc
    if not isinstance(data, dict):
        raise ModelFormatError(f"{source}: top-level JSON value must be an object")
    return model_from_dict(data)


def load_model(path) -> Ensemble:
    path = Path(path)
    return loads_model(path.read_text(), str(path))
