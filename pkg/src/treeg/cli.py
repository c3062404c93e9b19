"""Command-line entry point: ``treeg {synth,train,predict,explain,cv,ablate}``.

Every command writes its outputs plus ``manifest.json`` (the fully resolved
run configuration) into ``--out``. Reports contain no timestamps, so equal
invocations produce byte-identical files. Exit status: 0 on success, 2 on
invalid input, 1 on a runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .data import DatasetFormatError, GraphDataset, add_constant_feature, load_tudataset, save_tudataset
from .ensemble import ModelFormatError, dumps_model, load_model
from .explain import explain
from .harness import BoostParams, ablate, cross_validate, fit_dataset, format_table, score
from .synth import SYNTH_KINDS, synth_tasks
from .tree import TrainConfig

logger = logging.getLogger("treeg")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class UsageError(ValueError):
    """Invalid flags or inputs, detected before any training happens."""


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", help="dataset directory in TUDataset layout, or synth:KIND")
    p.add_argument("--name", help="dataset name (file prefix); default: directory name")
    p.add_argument("--task", choices=("graph", "vertex"), help="must match the dataset level")
    p.add_argument("--regression", action="store_true", help="treat labels as real-valued")
    p.add_argument("--add-constant", action="store_true", help="append an all-ones feature")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-d", type=_nonneg_int, default=2, help="maximal walk length")
    p.add_argument("--max-a", type=_nonneg_int, default=2, help="maximal ancestor distance")
    p.add_argument("--walk-prob", type=_probability, help="walk-type sampling probability")
    p.add_argument("--walk-types", help="comma-separated subset of source,cycle,target,target_source")
    p.add_argument("--estimators", type=_nonneg_int, default=50)
    p.add_argument("--learning-rate", type=_positive_float, default=0.1)
    p.add_argument("--tree-depth", type=_nonneg_int, default=5)
    p.add_argument("--min-samples-split", type=_nonneg_int, default=2)
    p.add_argument("--no-lookahead", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treeg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"treeg {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = command("synth", "generate a synthetic dataset")
    p.add_argument("kind", choices=SYNTH_KINDS)
    p.add_argument("--count", type=_nonneg_int)
    p.add_argument("--walk-length", type=_nonneg_int, help="walk length of counting tasks")

    p = command("train", "fit an ensemble and write model.json")
    _add_data_args(p)
    _add_train_args(p)

    p = command("predict", "score a dataset with a saved model")
    p.add_argument("model")
    _add_data_args(p)

    p = command("explain", "vertex and edge importances for one graph")
    p.add_argument("model")
    _add_data_args(p)
    p.add_argument("--graph", type=_nonneg_int, default=0, help="graph index")
    p.add_argument("--vertex", type=_nonneg_int, help="vertex index (vertex tasks)")
    p.add_argument("--class-index", type=_nonneg_int, help="class to explain (multiclass)")
    p.add_argument("--dot", action="store_true", help="also write explanation.dot")

    p = command("cv", "k-fold cross-validation")
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--folds", type=_nonneg_int, default=10)
    p.add_argument("--nested", type=_nonneg_int, help="inner folds for (d, a) selection")

    p = command("ablate", "cross-validate full, a=0 and d=0,a=0 on shared folds")
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--folds", type=_nonneg_int, default=10)
    return parser


def _train_config(args) -> TrainConfig:
    walk_types = None
    if args.walk_types:
        from .graph import WalkType
        try:
            walk_types = tuple(WalkType[t.strip().upper()] for t in args.walk_types.split(","))
        except KeyError as exc:
            raise UsageError(f"unknown walk type {exc.args[0]!r}") from None
    return TrainConfig(max_d=args.max_d, max_a=args.max_a, tree_depth=args.tree_depth,
                       min_samples_split=args.min_samples_split, walk_prob=args.walk_prob,
                       walk_types=walk_types, lookahead=not args.no_lookahead, seed=args.seed)


def _boost_params(args, ds: GraphDataset) -> BoostParams:
    cfg = _train_config(args)
    try:
        cfg.permitted_walk_types(ds.level)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return BoostParams(args.estimators, args.learning_rate, cfg)


def _dataset_name(path: Path) -> str:
    """The file prefix of the only dataset in ``path``, else the directory name."""
    found = sorted(p.name[: -len("_graph_indicator.txt")] for p in path.glob("*_graph_indicator.txt"))
    return found[0] if len(found) == 1 else path.name


def _load_data(args) -> GraphDataset:
    if args.data.startswith("synth:"):
        kind = args.data[len("synth:"):]
        if kind not in SYNTH_KINDS:
            raise UsageError(f"unknown synthetic task {kind!r}")
        ds = synth_tasks(kind, seed=args.seed)
    else:
        path = Path(args.data)
        if not path.is_dir():
            raise UsageError(f"dataset directory {path} does not exist")
        ds = load_tudataset(path, args.name or _dataset_name(path),
                            kind="regression" if args.regression else None)
    if args.add_constant:
        ds = add_constant_feature(ds)
    if args.task and args.task != ds.level:
        raise UsageError(f"--task {args.task} does not match the {ds.level}-level dataset")
    return ds


def _manifest(args, **resolved) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    return {"treeg_version": __version__, "command": args.command, "flags": flags, **resolved}


def _dataset_info(ds: GraphDataset) -> dict:
    return {"name": ds.name, "level": ds.level, "kind": ds.kind, "graphs": len(ds.graphs),
            "examples": len(ds.labels), "features": ds.n_features, "classes": ds.classes}


def cmd_synth(args, out: Path) -> None:
    kwargs = {}
    if args.walk_length is not None:
        if not args.kind.startswith("walks"):
            raise UsageError("--walk-length only applies to walk-counting tasks")
        kwargs["length"] = args.walk_length
    ds = synth_tasks(args.kind, args.count, seed=args.seed, **kwargs)
    save_tudataset(ds, out, ds.name)
    _write_json(out / "manifest.json", _manifest(args, dataset=_dataset_info(ds)))
    print(f"wrote {len(ds.graphs)} graphs to {out}")


def cmd_train(args, out: Path) -> None:
    ds = _load_data(args)
    params = _boost_params(args, ds)
    _write_json(out / "manifest.json", _manifest(
        args, dataset=_dataset_info(ds), train_config=params.config.to_dict(),
        n_estimators=params.n_estimators, learning_rate=params.learning_rate))
    ens = fit_dataset(ds, params)
    (out / "model.json").write_text(dumps_model(ens))
    metric = "mse" if ds.kind == "regression" else "accuracy"
    metrics = {"metric": metric, "train": score(ens, ds),
               "train_loss": [loss[-1] for loss in ens.train_loss]}
    _write_json(out / "metrics.json", metrics)
    print(f"train {metric}: {metrics['train']:.4f}")


def _load_model(path: str):
    if not Path(path).is_file():
        raise UsageError(f"model file {path} does not exist")
    return load_model(path)


def cmd_predict(args, out: Path) -> None:
    ens = _load_model(args.model)
    ds = _load_data(args)
    _write_json(out / "manifest.json", _manifest(args, dataset=_dataset_info(ds)))
    graphs, vertices, y = (ds.vertex_examples() if ds.level == "vertex"
                           else (ds.graphs, None, ds.labels))
    scores = ens.decision_function(graphs, vertices)
    labels = ens.predict(graphs, vertices)
    report = {"scores": np.asarray(scores).tolist(), "predictions": np.asarray(labels).tolist()}
    if ds.kind == "regression":
        report["mse"] = float(np.mean((labels - y) ** 2))
    else:
        report["accuracy"] = float(np.mean(labels == y))
    _write_json(out / "predictions.json", report)
    print(", ".join(f"{k}: {v:.4f}" for k, v in report.items() if k in ("mse", "accuracy")))


def cmd_explain(args, out: Path) -> None:
    ens = _load_model(args.model)
    ds = _load_data(args)
    if args.graph >= len(ds.graphs):
        raise UsageError(f"--graph {args.graph} out of range ({len(ds.graphs)} graphs)")
    g = ds.graphs[args.graph]
    if args.vertex is not None and args.vertex >= g.n:
        raise UsageError(f"--vertex {args.vertex} out of range ({g.n} vertices)")
    _write_json(out / "manifest.json", _manifest(args, dataset=_dataset_info(ds)))
    report = explain(ens, g, args.vertex, args.class_index)
    (out / "explanation.json").write_text(report.to_json() + "\n")
    if args.dot:
        (out / "explanation.dot").write_text(report.to_dot(g))
    for v, s in report.ranked_vertices()[:10]:
        print(f"vertex {v:>4}  {s:.4f}")


def cmd_cv(args, out: Path) -> None:
    ds = _load_data(args)
    params = _boost_params(args, ds)
    if args.nested is not None and args.nested < 2:
        raise UsageError("--nested needs at least 2 inner folds")
    _write_json(out / "manifest.json", _manifest(
        args, dataset=_dataset_info(ds), train_config=params.config.to_dict(),
        n_estimators=params.n_estimators, learning_rate=params.learning_rate))
    try:
        report = cross_validate(ds, params, args.folds, args.seed, args.nested)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_json(out / "splits.json", report.pop("split"))
    _write_json(out / "report.json", report)
    print(format_table(report))


def cmd_ablate(args, out: Path) -> None:
    ds = _load_data(args)
    params = _boost_params(args, ds)
    _write_json(out / "manifest.json", _manifest(
        args, dataset=_dataset_info(ds), train_config=params.config.to_dict(),
        n_estimators=params.n_estimators, learning_rate=params.learning_rate))
    try:
        report = ablate(ds, params, args.folds, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_json(out / "splits.json", report.pop("split"))
    _write_json(out / "report.json", report)
    print(format_table(report))


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "explain": cmd_explain,
    "cv": cmd_cv,
    "ablate": cmd_ablate,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except (UsageError, DatasetFormatError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime error
        logger.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
