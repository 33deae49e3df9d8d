"""Command-line operator surface.

Subcommands: generate, train, scan, eval, column-scan, bench. Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error. All randomness
funnels through --seed (NPISCAN_SEED as fallback).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import cnn as cnn_mod
from . import crf as crf_mod
from . import datagen
from . import engines as engines_mod
from . import metrics
from .checkpoint import CheckpointError
from .columns import ColumnError, predict_columns
from .labels import (
    BACKGROUND,
    PAD,
    LabeledDocument,
    ValidationError,
    read_documents,
    write_documents,
)

USAGE_ERRORS = (
    datagen.ConfigError,
    ValidationError,
    CheckpointError,
    ColumnError,
    engines_mod.EngineError,
    bench_mod.BenchError,
    metrics.ScoreError,
    cnn_mod.CnnError,
    crf_mod.CrfError,
    FileNotFoundError,
    ValueError,
)


class CliError(Exception):
    """Usage-level failure; maps to exit code 2."""


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("NPISCAN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"NPISCAN_SEED must be an integer, got {env!r}") from None
    return 0


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}")
    return p


# --- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg_path = _require_file(args.config, "config file")
    with open(cfg_path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    kind = raw.pop("kind", "unstructured")
    seed = _resolve_seed(args)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "unstructured":
        raw.setdefault("seed", seed)
        config = datagen.GeneratorConfig.from_dict(raw)
        docs, manifest = datagen.generate_unstructured_corpus(config)
        write_documents(out_dir / "data.jsonl", docs)
    elif kind in ("multi_column", "single_column"):
        n_rows = raw.pop("n_rows", None)
        n_cols = raw.pop("n_cols", None)
        if raw:
            raise CliError(f"unknown config keys for {kind}: {sorted(raw)}")
        if n_rows is None:
            raise CliError(f"{kind} config requires n_rows")
        from .rng import derive_rng
        rng = derive_rng(seed, kind)
        if kind == "multi_column":
            if n_cols is None:
                raise CliError("multi_column config requires n_cols")
            table = datagen.generate_multicolumn_dataset(int(n_rows), int(n_cols), rng)
            cfg_dict = {"kind": kind, "n_rows": n_rows, "n_cols": n_cols}
        else:
            table = datagen.generate_singlecolumn_dataset(int(n_rows), rng)
            cfg_dict = {"kind": kind, "n_rows": n_rows}
        datagen.write_table_csv(out_dir / "data.csv", table)
        datagen.write_table_jsonl(out_dir / "data.ndjson", table)
        write_documents(out_dir / "data.jsonl", datagen.table_to_documents(table, "row"))
        manifest = datagen.table_manifest(table, kind, seed, cfg_dict)
    else:
        raise CliError(f"unknown dataset kind {kind!r}")
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        f.write(manifest.to_json())
        f.write("\n")
    print(f"wrote {manifest.sample_count} samples to {out_dir}")
    return 0


# --- train -------------------------------------------------------------------

def _load_overrides(path) -> dict:
    if path is None:
        return {}
    with open(_require_file(path, "config file"), "r", encoding="utf-8") as f:
        return json.load(f)


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    train_docs = read_documents(_require_file(args.input, "training set"))
    eval_docs = read_documents(_require_file(args.eval, "eval set")) if args.eval else None
    overrides = _load_overrides(args.config)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    log = print if not args.quiet else None
    if args.engine in ("cnn", "cnn-crf"):
        head = "crf" if args.engine == "cnn-crf" else "softmax"
        if args.max_length is not None:
            overrides["max_length"] = args.max_length
        config = cnn_mod.CnnConfig.defaults(head, **overrides)
        params, report = cnn_mod.train(
            train_docs, config, seed=seed, eval_docs=eval_docs,
            checkpoint_path=out, log=log,
        )
        report_dict = report.to_dict()
    elif args.engine == "ngram-crf":
        if args.max_length is not None:
            overrides["max_length"] = args.max_length
        config = crf_mod.CrfTrainConfig(**overrides)
        engine, report = engines_mod.train_ngram_crf(
            train_docs, config, seed=seed, log=log
        )
        engine.save(out)
        report_dict = dataclasses.asdict(report)
        if eval_docs:
            preds = engine.label_documents([d.text for d in eval_docs])
            rep = metrics.score([d.labels for d in eval_docs], preds)
            report_dict["eval_micro_f1"] = rep.micro.f1
    else:
        raise CliError(f"engine {args.engine!r} is not trainable")
    with open(str(out) + ".report.json", "w", encoding="utf-8") as f:
        json.dump(report_dict, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"checkpoint written to {out}")
    return 0


# --- scan ---------------------------------------------------------------------

def _load_engine_for(args, seed: int | None = None):
    model = getattr(args, "model", None)
    if model is not None:
        _require_file(model, "model checkpoint")
    engine = engines_mod.load_engine(
        args.engine, model, workers=args.workers,
        preprocessing=getattr(args, "preprocessing", "flatten"),
    )
    if getattr(args, "max_length", None):
        if isinstance(engine, engines_mod.CnnEngine):
            engine.params.config = dataclasses.replace(
                engine.params.config, max_length=args.max_length
            )
        elif isinstance(engine, engines_mod.NgramCrfEngine):
            engine.max_length = args.max_length
    return engine


def cmd_scan(args) -> int:
    engine = _load_engine_for(args)
    docs = read_documents(_require_file(args.input, "input dataset"))
    labels = engine.label_documents([d.text for d in docs])
    out_docs = []
    for doc, pred in zip(docs, labels):
        pred = np.asarray(pred).copy()
        pred[pred == PAD] = BACKGROUND
        out_docs.append(LabeledDocument(text=doc.text, labels=pred,
                                        source_id=doc.source_id))
    write_documents(args.output, out_docs)
    print(f"scanned {len(out_docs)} documents with {engine.name}")
    return 0


# --- eval ----------------------------------------------------------------------

def cmd_eval(args) -> int:
    gold = read_documents(_require_file(args.gold, "gold dataset"))
    pred = read_documents(_require_file(args.pred, "prediction dataset"))
    pred_by_id = {d.source_id: d for d in pred}
    missing = [d.source_id for d in gold if d.source_id not in pred_by_id]
    if missing:
        raise CliError(f"predictions missing for {len(missing)} documents "
                       f"(first: {missing[:3]})")
    report = metrics.score(
        [d.labels for d in gold],
        [pred_by_id[d.source_id].labels for d in gold],
        ids=[d.source_id for d in gold],
        include_nonsensitive=args.include_nonsensitive,
    )
    sys.stdout.write(metrics.render_report(report, "text").decode("utf-8"))
    if args.output:
        with open(args.output, "wb") as f:
            f.write(metrics.render_report(report, "json"))
    return 0


# --- column-scan ------------------------------------------------------------------

def cmd_column_scan(args) -> int:
    engine = _load_engine_for(args)
    path = _require_file(args.input, "input table")
    if path.suffix == ".csv":
        table = datagen.read_table_csv(path)
    else:
        table = datagen.read_table_jsonl(path)
    columns = [(name, table.column(i)) for i, name in enumerate(table.column_names)]
    result = predict_columns(
        columns, engine.label_documents, k=args.aggregate_size,
        resamples=args.resamples, rng_seed=_resolve_seed(args),
    )
    blob = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(blob)
    else:
        sys.stdout.write(blob)
    return 0


# --- bench --------------------------------------------------------------------------

def cmd_bench(args) -> int:
    engine = _load_engine_for(args)
    result = bench_mod.run_bench(
        engine,
        _require_file(args.input, "corpus"),
        preprocessing=args.preprocessing,
        warmup_batches=args.warmup,
        measured_batches=args.batches,
        docs_per_batch=args.docs_per_batch,
        workers=args.workers,
    )
    line = result.to_json()
    if args.output:
        with open(args.output, "a", encoding="utf-8") as f:
            f.write(line + "\n")
    print(line)
    return 1 if result.error else 0


# --- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npiscan",
        description="Generate synthetic NPI corpora, train character-level "
                    "detectors, and evaluate accuracy and throughput.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model=False, engine_choices=engines_mod.ENGINE_NAMES):
        p.add_argument("--seed", type=int, default=None,
                       help="root RNG seed (fallback: NPISCAN_SEED, then 0)")
        if model:
            p.add_argument("--engine", required=True, choices=engine_choices)
            p.add_argument("--model", default=None, help="model checkpoint path")
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--max-length", type=int, default=None, dest="max_length")

    p = sub.add_parser("generate", help="generate a synthetic dataset + manifest")
    p.add_argument("--config", required=True, help="JSON generator config")
    p.add_argument("--output", required=True, help="output directory")
    add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a detector and write a checkpoint")
    p.add_argument("--engine", required=True, choices=("ngram-crf", "cnn", "cnn-crf"))
    p.add_argument("--input", required=True, help="training JSON-lines dataset")
    p.add_argument("--eval", default=None, help="held-out JSON-lines dataset")
    p.add_argument("--output", required=True, help="checkpoint path")
    p.add_argument("--config", default=None, help="JSON hyperparameter overrides")
    p.add_argument("--max-length", type=int, default=None, dest="max_length")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("scan", help="label documents with a detector")
    p.add_argument("--input", required=True, help="JSON-lines documents")
    p.add_argument("--output", required=True, help="labeled JSON-lines output")
    add_common(p, model=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--output", default=None, help="JSON report path")
    p.add_argument("--include-nonsensitive", action="store_true",
                   dest="include_nonsensitive",
                   help="score FLOAT/INTEGER/ORDINAL/QUANTITY too")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("column-scan", help="predict one entity per table column")
    p.add_argument("--input", required=True, help="CSV or JSON-lines table")
    p.add_argument("--output", default=None, help="JSON report path")
    p.add_argument("--aggregate-size", type=int, default=5, dest="aggregate_size")
    p.add_argument("--resamples", type=int, default=10)
    add_common(p, model=True)
    p.set_defaults(func=cmd_column_scan)

    p = sub.add_parser("bench", help="measure GB/hr throughput")
    p.add_argument("--input", required=True, help="corpus file, one document per line")
    p.add_argument("--output", default=None, help="JSON-lines results path (appended)")
    p.add_argument("--preprocessing", choices=("flatten", "padded"), default="flatten")
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--batches", type=int, default=8)
    p.add_argument("--docs-per-batch", type=int, default=64, dest="docs_per_batch")
    add_common(p, model=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
