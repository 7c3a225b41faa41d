"""Command-line interface: ``kgrotate {train,evaluate,analyze,categorize,countries}``.

``--dataset`` takes a dataset directory (optionally relative to
``$KGE_DATA_ROOT``) or a generated graph: ``synthetic:countries_S1[:SEED]``
(also S2, S3) or ``synthetic:patterns[:SEED]``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import synthetic
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PRESETS, load_config, write_resolved_config
from .data import KnowledgeGraph, category_counts, load_dataset, relation_categories, resolve_dataset_dir
from .evaluation import countries_auc_pr, evaluate, read_regions
from .exceptions import ConfigError, KGEError
from .patterns import export_histogram, pattern_report, relation_phases, write_pattern_report
from .training import train

logger = logging.getLogger("kgrotate")

CHECKPOINT_NAME = "checkpoint.kgrt"


class UsageError(Exception):
    pass


def load_graph(spec: str) -> KnowledgeGraph:
    if spec.startswith("synthetic:"):
        parts = spec.split(":")
        name = parts[1]
        seed = int(parts[2]) if len(parts) > 2 else 0
        if name.startswith("countries_"):
            return synthetic.countries_like(seed)[name.split("_", 1)[1]]
        if name == "patterns":
            return synthetic.pattern_graph(seed)[0]
        raise UsageError(f"unknown synthetic dataset {name!r}")
    return load_dataset(spec)


def _dataset_key(spec: str) -> str:
    if spec.startswith("synthetic:countries_"):
        return spec.split(":")[1]
    return Path(spec).name


def _split_list(text: str | None, cast=str) -> list:
    if not text:
        return []
    return [cast(x) for x in text.split(",") if x]


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so that usage errors share the JSON error path."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgrotate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=True):
        p.add_argument("--dataset", required=True)
        p.add_argument("--out", default=".")
        if checkpoint:
            p.add_argument("--checkpoint")

    p = sub.add_parser("train", help="train a model and write checkpoint.kgrt + metrics.jsonl")
    common(p)
    p.add_argument("--config")
    p.add_argument("--model", choices=["rotate", "protate", "transe", "distmult", "complex"])
    p.add_argument("-k", "--dim", dest="dim", type=int)
    p.add_argument("-b", "--batch-size", dest="batch_size", type=int)
    p.add_argument("-n", "--negatives", dest="negatives", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--loss", choices=["ns", "adv", "margin"])
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", dest="max_steps", type=int)
    p.add_argument("--valid-every", dest="valid_every", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seeds; one run per seed under OUT/seed_<s>")
    p.add_argument("--workers", type=int)
    p.add_argument("--preset", action="store_true", help="start from the published settings for this dataset")

    p = sub.add_parser("evaluate", help="filtered link prediction metrics")
    common(p)
    p.add_argument("--split", default="test")
    p.add_argument("--seeds", help="evaluate OUT/seed_<s>/checkpoint.kgrt for each seed")

    p = sub.add_parser("analyze", help="relation phase histograms and pattern residuals")
    common(p)
    p.add_argument("--bins", type=int, default=60)
    p.add_argument("--inverse", action="append", default=[], help="R1,R2 (names); repeatable")
    p.add_argument("--composition", action="append", default=[], help="R1,R2,R3 with R1 = R2 then R3; repeatable")
    p.add_argument("--relations", help="comma-separated names to histogram (default: all)")

    p = sub.add_parser("categorize", help="1-to-1 / 1-to-N / N-to-1 / N-to-N relation counts")
    common(p, checkpoint=False)
    p.add_argument("--split", default="train")

    p = sub.add_parser("countries", help="Countries AUC-PR and PR curve")
    common(p)
    p.add_argument("--split", default="test")
    return parser


TRAIN_KEYS = (
    "model", "dim", "batch_size", "negatives", "alpha", "gamma", "loss", "lr",
    "max_steps", "valid_every", "seed", "workers",
)


def _checkpoint_path(args) -> Path:
    return Path(args.checkpoint) if args.checkpoint else Path(args.out) / CHECKPOINT_NAME


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _seed_summary(values: dict[int, dict]) -> dict:
    keys = next(iter(values.values())).keys()
    summary = {}
    for key in keys:
        arr = np.array([v[key] for v in values.values()], dtype=float)
        summary[key] = {"mean": float(arr.mean()), "variance": float(arr.var())}
    return {"seeds": {str(s): v for s, v in values.items()}, "summary": summary}


def cmd_train(args) -> dict:
    overrides = {k: getattr(args, k) for k in TRAIN_KEYS}
    if args.preset:
        presets = {k.lower(): v for k, v in PRESETS.items()}
        preset = presets.get(_dataset_key(args.dataset).lower())
        if preset is None:
            raise UsageError(f"no preset for dataset {args.dataset!r}")
        overrides = {**preset, **{k: v for k, v in overrides.items() if v is not None}}
    config = load_config(args.config, overrides)
    graph = load_graph(args.dataset)
    out = Path(args.out)
    seeds = _split_list(args.seeds, int)
    if not seeds:
        return _train_one(graph, config, out, _checkpoint_path(args))
    results = {}
    for seed in seeds:
        run = config.replace(seed=seed)
        _train_one(graph, run, out / f"seed_{seed}", out / f"seed_{seed}" / CHECKPOINT_NAME)
        cp = load_checkpoint(out / f"seed_{seed}" / CHECKPOINT_NAME)
        results[seed] = evaluate(cp.best_table, graph, "test", categories=False).overall.to_dict()
    summary = _seed_summary(results)
    write_resolved_config(config, out)
    _write_json(out / "seeds_summary.json", summary)
    return summary["summary"]


def _train_one(graph, config, out: Path, cp_path: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(config, out)
    metrics = out / "metrics.jsonl"
    metrics.unlink(missing_ok=True)
    cp = train(graph, config, metrics_path=metrics)
    save_checkpoint(cp, cp_path)
    return {"checkpoint": str(cp_path), "step": cp.step, "seed": config.seed, "best_step": cp.best_step}


def cmd_evaluate(args) -> dict:
    graph = load_graph(args.dataset)
    out = Path(args.out)
    seeds = _split_list(args.seeds, int)
    if seeds:
        results = {}
        for seed in seeds:
            cp = load_checkpoint(out / f"seed_{seed}" / CHECKPOINT_NAME)
            results[seed] = evaluate(cp.best_table, graph, args.split, categories=False).overall.to_dict()
        summary = _seed_summary(results)
        _write_json(out / "seeds_summary.json", summary)
        return summary["summary"]
    cp = load_checkpoint(_checkpoint_path(args))
    result = evaluate(cp.best_table, graph, args.split)
    write_resolved_config(cp.config, out)
    result.to_json(out / "report.json")
    (out / "report.txt").write_text(result.to_text() + "\n", encoding="utf-8")
    return result.to_dict()["overall"]


def cmd_analyze(args) -> dict:
    graph = load_graph(args.dataset)
    cp = load_checkpoint(_checkpoint_path(args))
    table = cp.best_table
    names = graph.relation_names

    def ids(text, n):
        parts = text.split(",")
        if len(parts) != n:
            raise UsageError(f"expected {n} comma-separated relation names, got {text!r}")
        return tuple(graph.relation_id(p) for p in parts)

    report = pattern_report(
        table,
        names,
        [ids(x, 2) for x in args.inverse],
        [ids(x, 3) for x in args.composition],
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cp.config, out)
    write_pattern_report(report, out / "patterns.json")
    wanted = _split_list(args.relations) or names
    for name in wanted:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
        export_histogram(relation_phases(table, graph.relation_id(name)), args.bins, out / f"hist_{safe}.csv")
    return report


def cmd_categorize(args) -> dict:
    graph = load_graph(args.dataset)
    cats = relation_categories(graph, args.split)
    payload = {
        "counts": {c.value: n for c, n in category_counts(cats).items()},
        "relations": {
            graph.relation_names[r]: {"category": info.category.value, "tph": info.tph, "hpt": info.hpt}
            for r, info in cats.items()
        },
    }
    _write_json(Path(args.out) / "categories.json", payload)
    return payload["counts"]


def cmd_countries(args) -> dict:
    graph = load_graph(args.dataset)
    cp = load_checkpoint(_checkpoint_path(args))
    regions = None
    if not args.dataset.startswith("synthetic:"):
        regions = read_regions(resolve_dataset_dir(args.dataset), graph)
    result = countries_auc_pr(cp.best_table, graph, args.split, regions)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cp.config, out)
    result.to_csv(out / "pr_curve.csv")
    payload = {"auc_pr": result.auc_pr, "split": args.split, "seed": cp.config.seed}
    _write_json(out / "countries.json", payload)
    return payload


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "categorize": cmd_categorize,
    "countries": cmd_countries,
}


def _error(kind: str, exc: BaseException) -> None:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _error("usage", exc)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        result = COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        _error("usage", exc)
        return 2
    except (KGEError, OSError, ValueError) as exc:
        _error("runtime", exc)
        return 1
    print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
