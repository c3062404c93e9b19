"""Cross-validation, nested model selection and ablation runs over a GraphDataset."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from .data import GraphDataset
from .ensemble import Ensemble, Task, fit_ensemble
from .tree import TrainConfig

logger = logging.getLogger(__name__)

# (max_d, max_a) grid searched by nested cross-validation
SELECTION_GRID = tuple((d, a) for d in range(3) for a in range(3))


@dataclass(frozen=True)
class BoostParams:
    n_estimators: int = 50
    learning_rate: float = 0.1
    config: TrainConfig = TrainConfig()


def fold_seed(seed: int, fold: int) -> int:
    """Training seed of one fold; depends only on (seed, fold), never on run order."""
    return seed * 1000 + fold


def task_of(ds: GraphDataset) -> Task:
    n_classes = ds.n_classes if ds.kind == "multiclass" else 2
    return Task(ds.level, ds.kind, n_classes)


def _examples(ds: GraphDataset):
    """Parallel arrays ``(graphs, vertices or None, labels)`` of the dataset's examples."""
    if ds.level == "vertex":
        return ds.vertex_examples()
    return list(ds.graphs), None, ds.labels


def fit_dataset(ds: GraphDataset, params: BoostParams, index=None) -> Ensemble:
    graphs, vertices, y = _examples(ds)
    if index is not None:
        graphs = [graphs[i] for i in index]
        vertices = None if vertices is None else vertices[index]
        y = y[index]
    return fit_ensemble(graphs, y, task_of(ds), params.n_estimators, params.learning_rate,
                        params.config, vertices)


def score(ens: Ensemble, ds: GraphDataset, index=None) -> float:
    """Accuracy for classification, mean squared error for regression."""
    graphs, vertices, y = _examples(ds)
    if index is not None:
        graphs = [graphs[i] for i in index]
        vertices = None if vertices is None else vertices[index]
        y = y[index]
    pred = ens.predict(graphs, vertices)
    if ds.kind == "regression":
        return float(np.mean((pred - y) ** 2))
    return float(np.mean(pred == y))


def make_folds(labels: np.ndarray, n_folds: int, seed: int, stratified: bool) -> list:
    """Shuffled (stratified) k-fold split as a list of ``(train, test)`` index arrays."""
    labels = np.asarray(labels)
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if n_folds > len(labels):
        raise ValueError(f"{n_folds} folds requested for {len(labels)} examples")
    if stratified:
        counts = np.unique(labels, return_counts=True)[1]
        smallest = int(counts.min())
        if n_folds > smallest:
            raise ValueError(f"{n_folds} folds exceed the smallest class count ({smallest})")
        splitter = StratifiedKFold(n_folds, shuffle=True, random_state=seed)
    else:
        splitter = KFold(n_folds, shuffle=True, random_state=seed)
    return [(tr, te) for tr, te in splitter.split(np.zeros(len(labels)), labels)]


def _summary(values: Sequence[float], regression: bool) -> dict:
    values = np.asarray(values, dtype=float)
    out = {"mean": float(values.mean()), "std": float(values.std())}
    out["best"] = float(values.min() if regression else values.max())
    return out


def _select(ds: GraphDataset, train: np.ndarray, params: BoostParams, inner_folds: int,
            seed: int) -> tuple[tuple[int, int], dict]:
    """Pick (max_d, max_a) by inner cross-validation on ``train``."""
    regression = ds.kind == "regression"
    labels = _examples(ds)[2][train]
    inner = make_folds(labels, inner_folds, seed, stratified=not regression)
    results = {}
    for d, a in SELECTION_GRID:
        scores = []
        for f, (itr, ite) in enumerate(inner):
            cfg = replace(params.config, max_d=d, max_a=a, seed=fold_seed(seed, f))
            ens = fit_dataset(ds, replace(params, config=cfg), train[itr])
            scores.append(score(ens, ds, train[ite]))
        results[f"d={d},a={a}"] = float(np.mean(scores))
    pick = (min if regression else max)(SELECTION_GRID, key=lambda da: results[f"d={da[0]},a={da[1]}"])
    return pick, results


def cross_validate(ds: GraphDataset, params: BoostParams = BoostParams(), n_folds: int = 10,
                   seed: int = 0, nested: Optional[int] = None, folds=None) -> dict:
    """k-fold cross-validation report.

    With ``nested`` set, each outer fold first chooses (max_d, max_a) from
    the selection grid by ``nested``-fold inner cross-validation on its
    training part. ``folds`` overrides the split (shared across ablations).
    """
    regression = ds.kind == "regression"
    labels = _examples(ds)[2]
    if folds is None:
        folds = make_folds(labels, n_folds, seed, stratified=not regression)
    rows = []
    for f, (tr, te) in enumerate(folds):
        cfg = replace(params.config, seed=fold_seed(seed, f))
        row = {"fold": f}
        if nested:
            (d, a), inner = _select(ds, tr, replace(params, config=cfg), nested, fold_seed(seed, f))
            cfg = replace(cfg, max_d=d, max_a=a)
            row.update(selected={"max_d": d, "max_a": a}, inner=inner)
        ens = fit_dataset(ds, replace(params, config=cfg), tr)
        row["score"] = score(ens, ds, te)
        rows.append(row)
        logger.info("fold %d: %.4f", f, row["score"])
    return {
        "metric": "mse" if regression else "accuracy",
        "folds": rows,
        "summary": _summary([r["score"] for r in rows], regression),
        "split": [{"train": tr.tolist(), "test": te.tolist()} for tr, te in folds],
    }


def ablation_variants(config: TrainConfig) -> dict[str, TrainConfig]:
    """The full model, subsets disabled (a=0), and whole-graph raw features only (d=0, a=0)."""
    return {
        "full": config,
        "a=0": replace(config, max_a=0),
        "d=0,a=0": replace(config, max_d=0, max_a=0),
    }


def ablate(ds: GraphDataset, params: BoostParams = BoostParams(), n_folds: int = 10,
           seed: int = 0, variants: Optional[dict[str, TrainConfig]] = None) -> dict:
    """Cross-validate several configurations on the same folds and seeds."""
    variants = variants or ablation_variants(params.config)
    labels = _examples(ds)[2]
    folds = make_folds(labels, n_folds, seed, stratified=ds.kind != "regression")
    out = {"metric": None, "variants": {}, "split": None}
    for name, cfg in variants.items():
        report = cross_validate(ds, replace(params, config=cfg), seed=seed, folds=folds)
        out["metric"], out["split"] = report["metric"], report["split"]
        out["variants"][name] = {
            "config": cfg.to_dict(),
            "folds": [r["score"] for r in report["folds"]],
            "summary": report["summary"],
        }
    return out


def format_table(report: dict) -> str:
    """Plain-text table of a cross-validation or ablation report."""
    metric = report["metric"]
    if "variants" in report:
        lines = [f"{'variant':<12} {metric:>10} {'std':>8} {'best':>8}"]
        for name, v in report["variants"].items():
            s = v["summary"]
            lines.append(f"{name:<12} {s['mean']:>10.4f} {s['std']:>8.4f} {s['best']:>8.4f}")
        return "\n".join(lines)
    lines = [f"{'fold':>4} {metric:>10}"]
    for row in report["folds"]:
        extra = ""
        if "selected" in row:
            extra = f"  (d={row['selected']['max_d']}, a={row['selected']['max_a']})"
        lines.append(f"{row['fold']:>4} {row['score']:>10.4f}{extra}")
    s = report["summary"]
    lines.append(f"mean {s['mean']:.4f} +- {s['std']:.4f}, best {s['best']:.4f}")
    return "\n".join(lines)
