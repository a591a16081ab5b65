"""Command-line entry point: ``flowids prepare | train | evaluate | report``.

Exit codes: 0 success, 2 configuration or schema error, 3 data error,
4 numeric divergence.

Relative input paths given to ``prepare`` are resolved against the
``FLOWIDS_DATA_ROOT`` environment variable when it is set.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dataio import (
    SplitSpec,
    encode,
    fit_encoder,
    load_flows,
    load_schema,
    read_bundle,
    split,
    write_bundle,
)
from .dataio.split import Split
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    FlowIDSError,
    NonFiniteError,
    ResourceError,
    UsageError,
)
from .flowgraph import build_bipartite, export_edge_list, line_graph_edge_count, pad_virtual
from .models import KINDS, GraphContext, ModelConfig, build_model, load_checkpoint, save_checkpoint
from .trainer import (
    BINARY_CLASSES,
    DEFAULT_LR,
    EvalReport,
    TrainConfig,
    predict,
    read_report,
    train,
)

log = logging.getLogger("flowids")

DATA_ROOT_ENV = "FLOWIDS_DATA_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
ABSENT = "-"
DEFAULT_LINE_BUDGET = 20_000_000

# settings a --config file may provide; explicit flags override them
TRAIN_DEFAULTS = {
    "model": "gtcn_g", "task": "multi", "epochs": 10, "batch_size": 500, "lr": None,
    "layers": 0, "heads": 6, "hidden": None, "head_dim": None, "k_diff": 2, "seq_len": 8,
    "dropout": 0.5, "sample_sizes": "8", "seed": 0, "profile": "small",
    "class_weighted": False, "clip_norm": 5.0, "pad": True, "line_budget": DEFAULT_LINE_BUDGET,
}


def derive_seed(seed: int, purpose: str) -> int:
    """Independent 32-bit seed per purpose, split from the run seed."""
    digest = hashlib.sha256(f"{seed}:{purpose}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _refuse_existing(path: Path, force: bool) -> None:
    if path.exists() and any(path.iterdir()) and not force:
        raise UsageError(f"{path} already exists and is not empty; pass --force to overwrite")
    if path.exists() and force:
        shutil.rmtree(path)


def _data_path(p: str) -> Path:
    path = Path(p)
    root = os.environ.get(DATA_ROOT_ENV)
    if not path.is_absolute() and root and not path.exists():
        path = Path(root) / path
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    return path


def _task_name(task: str) -> str:
    return "binary" if task == "binary" else "multiclass"


# -- prepare -------------------------------------------------------------------

def _load_many(paths, schema, strict: bool) -> tuple[list, list[str]]:
    records, variants = [], []
    for p in paths:
        info: dict = {}
        rejects: list = []
        records += load_flows(_data_path(p), schema, strict=strict, rejects=rejects, info=info)
        variants.append(info.get("variant", "header"))
        for row, msg in rejects[:20]:
            log.warning("%s: row %d rejected: %s", p, row, msg)
        if len(rejects) > 20:
            log.warning("%s: %d more rows rejected", p, len(rejects) - 20)
    return records, variants


def _class_table(labels: np.ndarray, classes: Sequence[str]) -> list[str]:
    counts = np.bincount(labels, minlength=len(classes))
    n = max(int(counts.sum()), 1)
    lines = [f"{'class':<16}{'count':>10}{'percent':>10}"]
    for name, c in zip(classes, counts.tolist()):
        lines.append(f"{name:<16}{c:>10}{100.0 * c / n:>9.3f}%")
    return lines


def cmd_prepare(args) -> int:
    schema = load_schema(args.schema or args.dataset)
    out = Path(args.out)
    _refuse_existing(out, args.force)
    records, variants = _load_many(args.input, schema, not args.lenient)
    if not records:
        raise DataError("no flow records loaded")
    seed = args.seed
    labels = np.array([schema.classes.index(r.label_multiclass) for r in records])
    if args.test_csv:
        test_records, test_variants = _load_many(args.test_csv, schema, not args.lenient)
        n_dev = len(records)
        # official test files: the training file(s) divide train:val only
        dev = split(labels, SplitSpec(ratios=(args.ratios[0], args.ratios[1], 0), seed=seed))
        records = records + test_records
        parts = Split(dev.train, dev.val, np.arange(n_dev, len(records)), dev.stratified,
                      dev.warnings)
        split_source = "official"
        variants += test_variants
        labels = np.array([schema.classes.index(r.label_multiclass) for r in records])
    else:
        parts = split(labels, SplitSpec(ratios=tuple(args.ratios), seed=seed))
        split_source = ":".join(str(r) for r in args.ratios)
    for w in parts.warnings:
        log.warning("split: %s", w)

    enc = fit_encoder([records[i] for i in parts.train], schema, max_categories=args.max_categories)
    flows = encode(enc, records, schema)
    n_classes_seen = int(np.unique(labels).size)
    warnings = list(parts.warnings)
    if n_classes_seen < 2:
        warnings.append("single-class data: every flow carries the same label")
        log.warning("single-class data: every flow carries the same label")
    meta = {
        "dataset": schema.name,
        "schema": args.schema or args.dataset,
        "classes": list(schema.classes),
        "encoder": enc.to_dict(),
        "split_source": split_source,
        "input_variants": variants,
        "seed": seed,
        "prepare_warnings": warnings,
    }
    write_bundle(out, flows, parts, meta)

    g = build_bipartite(flows)
    padded = pad_virtual(g, np.random.default_rng(derive_seed(seed, "graph")))
    graph_dir = out / "graph"
    graph_dir.mkdir(exist_ok=True)
    export_edge_list(graph_dir / "bipartite_edges.txt", g.num_nodes, g.edge_endpoints())
    export_edge_list(graph_dir / "padded_edges.txt", padded.num_nodes, padded.edge_endpoints())

    lines = [
        f"dataset            {schema.name}",
        f"flows              {len(flows)}",
        f"features           {flows.features.shape[1]} encoded from {len(schema.features)} columns",
        f"classes            {len(schema.classes)} ({n_classes_seen} present)",
        f"split ({split_source})".ljust(19) + " ".join(
            f"{k}={v}" for k, v in zip(("train", "val", "test"), parts.sizes())),
        f"source endpoints   {g.n_src}",
        f"dest endpoints     {g.n_dst}",
        f"flows as edges     {g.num_edges}",
        f"virtual nodes      {padded.num_nodes - g.num_nodes}",
        f"line-graph edges   {line_graph_edge_count(g)} unpadded, "
        f"{line_graph_edge_count(padded)} after padding (upper bound)",
        "",
        *_class_table(labels, schema.classes),
    ]
    if warnings:
        lines += ["", *[f"warning: {w}" for w in warnings]]
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


# -- train -----------------------------------------------------------------------

def _parse_sizes(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(None if s in (None, "all") else int(s) for s in text)
    out = []
    for part in str(text).split(","):
        part = part.strip()
        out.append(None if part.lower() == "all" else int(part))
    return tuple(out)


def _resolve_train_settings(args) -> dict:
    settings = dict(TRAIN_DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(loaded) - set(TRAIN_DEFAULTS)
        if unknown:
            raise ConfigError(f"{args.config}: unknown settings {', '.join(sorted(unknown))}")
        settings.update(loaded)
    for key in TRAIN_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    if settings["model"] not in KINDS:
        raise ConfigError(f"unknown model {settings['model']!r}")
    if settings["task"] not in ("binary", "multi"):
        raise ConfigError(f"unknown task {settings['task']!r}")
    return settings


def _labels(flows, task: str, classes: Sequence[str]) -> tuple[np.ndarray, list[str]]:
    if task == "binary":
        return flows.y_binary, list(BINARY_CLASSES)
    return flows.y_multi, list(classes)


def _link_or_copy(src, dst):
    try:
        os.link(src, dst)
    except OSError:
        shutil.copy2(src, dst)


def cmd_train(args) -> int:
    s = _resolve_train_settings(args)
    bundle_dir = Path(args.bundle)
    bundle = read_bundle(bundle_dir)
    dataset = bundle.meta.get("dataset", "")
    if args.dataset and load_schema(args.dataset).name != dataset:
        raise ConfigError(f"bundle holds {dataset}, not {args.dataset}")
    lr = s["lr"] if s["lr"] is not None else DEFAULT_LR.get(dataset, 0.007)
    seed = int(s["seed"])
    out = Path(args.out)
    _refuse_existing(out, args.force)

    flows = bundle.flows
    labels, class_names = _labels(flows, s["task"], bundle.meta["classes"])
    ctx = GraphContext.build(flows.features, flows.src, flows.dst, flows.timestamps,
                             seed=derive_seed(seed, "graph"), pad=bool(s["pad"]),
                             budget=s["line_budget"])
    overrides = {k: s[k] for k in ("layers", "heads", "k_diff", "seq_len", "dropout")}
    for k in ("hidden", "head_dim"):
        if s[k] is not None:
            overrides[k] = s[k]
    mcfg = ModelConfig.for_profile(
        s["model"], flows.features.shape[1], len(class_names), s["profile"],
        sample_sizes=_parse_sizes(s["sample_sizes"]), n_nodes=ctx.num_flows,
        sample_seed=derive_seed(seed, "sampling"), **overrides)
    tcfg = TrainConfig(epochs=int(s["epochs"]), batch_size=int(s["batch_size"]), lr=float(lr),
                       seed=derive_seed(seed, "train"), task=_task_name(s["task"]),
                       class_weighted=bool(s["class_weighted"]), clip_norm=float(s["clip_norm"]))
    model = build_model(mcfg, seed=derive_seed(seed, "init"))

    out.mkdir(parents=True, exist_ok=True)
    shutil.copytree(bundle_dir, out / "bundle", copy_function=_link_or_copy)
    resolved = {
        "version": __version__,
        "dataset": dataset,
        "bundle": "bundle",
        "seed": seed,
        "settings": {**s, "lr": lr},
        "model": mcfg.to_dict(),
        "train": tcfg.to_dict(),
    }
    (out / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    log.info("training %s on %s: %d flows, %d parameters", mcfg.kind, dataset, ctx.num_flows,
             model.num_parameters())

    def progress(rec):
        val = rec["val_weighted_f1"]
        log.info("epoch %d  loss %.6f  val wF1 %s", rec["epoch"], rec["train_loss"],
                 "n/a" if val is None else f"{val:.4f}")

    result = train(model, ctx, labels, bundle.split.train, bundle.split.val, tcfg, class_names,
                   history_path=out / "history.jsonl", progress=progress)
    save_checkpoint(out / "model.ckpt", model,
                    meta={"dataset": dataset, "task": tcfg.task, "classes": class_names,
                          "best_epoch": result.best_epoch})
    print(f"best epoch {result.best_epoch}; run written to {out}")
    return EXIT_OK


# -- evaluate --------------------------------------------------------------------

def evaluate_run(run: Path, split_name: str, task: Optional[str] = None,
                 expected_model: Optional[str] = None, workers: int = 1) -> EvalReport:
    cfg = json.loads((run / "config.json").read_text(encoding="utf-8"))
    model, meta = load_checkpoint(run / "model.ckpt", expected_kind=expected_model)
    bundle = read_bundle(run / cfg["bundle"])
    flows = bundle.flows
    trained_task = meta.get("task", "multiclass")
    task = _task_name(task) if task else trained_task
    if task == "multiclass" and trained_task == "binary":
        raise ConfigError("a binary model cannot produce a multiclass report")
    seed = int(cfg["seed"])
    ctx = GraphContext.build(flows.features, flows.src, flows.dst, flows.timestamps,
                             seed=derive_seed(seed, "graph"), pad=bool(cfg["settings"]["pad"]),
                             budget=cfg["settings"]["line_budget"])
    idx = getattr(bundle.split, split_name)
    if idx.size == 0:
        raise DataError(f"the {split_name} split is empty")
    pred = predict(model, ctx, idx, int(cfg["train"]["batch_size"]), workers)
    if task == "binary" and trained_task == "multiclass":
        normal = bundle.meta["classes"].index("Normal") if "Normal" in bundle.meta["classes"] else 0
        pred = (pred != normal).astype(np.int64)
    labels, class_names = _labels(flows, "binary" if task == "binary" else "multi",
                                  bundle.meta["classes"])
    source = bundle.meta.get("split_source", "5:2:3")
    info = {"model": model.kind, "dataset": bundle.meta.get("dataset", ""), "split": split_name,
            "split_source": "official" if source == "official" and split_name == "test"
            else source}
    return EvalReport.from_predictions(labels[idx], pred, class_names, task, info)


def cmd_evaluate(args) -> int:
    run = Path(args.run)
    if not (run / "model.ckpt").is_file():
        raise ConfigError(f"{run}: no model.ckpt; is this a training run directory?")
    rep = evaluate_run(run, args.split, args.task, args.model, args.workers)
    out = Path(args.out) if args.out else run / f"report_{args.split}_{rep.task}.txt"
    rep.write(out)
    print(f"{rep.info['model']} {rep.task} {args.split}: weighted F1 {rep.weighted_f1:.4f} -> {out}")
    return EXIT_OK


# -- report ----------------------------------------------------------------------

def _collect_reports(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found += sorted(p.glob("report_*.txt"))
        elif p.is_file():
            found.append(p)
        else:
            raise DataError(f"no such report or run directory: {p}")
    if not found:
        raise DataError("no evaluation reports found")
    return found


def _raw_summary(path: Path) -> dict[str, str]:
    """Summary values as the exact strings written in the report."""
    out = {}
    in_summary = False
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("["):
            in_summary = line == "[summary]"
        elif in_summary and " = " in line:
            k, _, v = line.partition(" = ")
            out[k] = v
    return out


def comparison_table(paths) -> str:
    rows: dict[tuple, dict] = {}
    for path in _collect_reports(paths):
        read_report(path)            # validates the document
        s = _raw_summary(path)
        key = (s.get("dataset", ""), s.get("model", ""), s.get("split", ""))
        rows.setdefault(key, {})[s.get("task", "multiclass")] = s["weighted_f1"]
    header = ("dataset", "algorithm", "split", "binary F1", "multiclass F1")
    body = [(d, m, sp, cells.get("binary", ABSENT), cells.get("multiclass", ABSENT))
            for (d, m, sp), cells in sorted(rows.items())]
    widths = [max(len(str(r[i])) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(header, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(str(v).ljust(w) for v, w in zip(r, widths)).rstrip() for r in body]
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    table = comparison_table(args.reports)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowids", description="Graph-based flow intrusion detection")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("prepare", help="encode and split a flow CSV into a bundle")
    pp.add_argument("--dataset", default="unsw_nb15", help="unsw_nb15 or ton_iot")
    pp.add_argument("--schema", help="path to a schema .ini (overrides --dataset)")
    pp.add_argument("--input", nargs="+", required=True, help="flow CSV file(s)")
    pp.add_argument("--test-csv", nargs="+", help="official test file(s); --input becomes train+val")
    pp.add_argument("--ratios", type=int, nargs=3, default=[5, 2, 3], metavar=("TRAIN", "VAL", "TEST"))
    pp.add_argument("--max-categories", type=int, default=64)
    pp.add_argument("--lenient", action="store_true", help="skip malformed rows instead of failing")
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--out", required=True)
    pp.add_argument("--force", action="store_true")
    pp.set_defaults(func=cmd_prepare)

    tp = sub.add_parser("train", help="train a model on a prepared bundle")
    tp.add_argument("--bundle", required=True)
    tp.add_argument("--config", help="JSON file of settings; flags take precedence")
    tp.add_argument("--dataset", help="assert the bundle's dataset")
    tp.add_argument("--schema", help="accepted for symmetry with prepare; the bundle fixes it")
    tp.add_argument("--model", choices=KINDS)
    tp.add_argument("--task", choices=("binary", "multi"))
    tp.add_argument("--epochs", type=int)
    tp.add_argument("--batch-size", type=int)
    tp.add_argument("--lr", type=float)
    tp.add_argument("--layers", type=int)
    tp.add_argument("--heads", type=int)
    tp.add_argument("--hidden", type=int)
    tp.add_argument("--head-dim", type=int)
    tp.add_argument("--k-diff", type=int)
    tp.add_argument("--seq-len", type=int)
    tp.add_argument("--dropout", type=float)
    tp.add_argument("--sample-sizes", help="comma-separated per-hop sizes; 'all' keeps every neighbour")
    tp.add_argument("--profile", choices=("small", "full"))
    tp.add_argument("--class-weighted", action="store_const", const=True)
    tp.add_argument("--clip-norm", type=float)
    tp.add_argument("--no-pad", dest="pad", action="store_const", const=False,
                    help="skip virtual-node padding of the endpoint graph")
    tp.add_argument("--line-budget", type=int, help="refuse line graphs with more edges than this")
    tp.add_argument("--seed", type=int)
    tp.add_argument("--out", required=True)
    tp.add_argument("--force", action="store_true")
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("evaluate", help="write an evaluation report for a training run")
    ep.add_argument("--run", required=True)
    ep.add_argument("--split", choices=("train", "val", "test"), default="test")
    ep.add_argument("--task", choices=("binary", "multi"))
    ep.add_argument("--model", choices=KINDS, help="assert the checkpoint's architecture")
    ep.add_argument("--workers", type=int, default=1)
    ep.add_argument("--out")
    ep.set_defaults(func=cmd_evaluate)

    rp = sub.add_parser("report", help="merge evaluation reports into one comparison table")
    rp.add_argument("reports", nargs="+", help="report files or run directories")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        norms = ", ".join(f"{k}={v:.3g}" for k, v in sorted(exc.param_norms.items()))
        print(f"parameter norms: {norms}", file=sys.stderr)
        return EXIT_DIVERGED
    except NonFiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ResourceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FlowIDSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
