"""Command-line entry point: ``zitboost <command> [options]``.

Commands
--------
simulate   draw a synthetic dataset and its ground-truth sidecar
train      split, cross-validate a grid, refit the winner, save the model
evaluate   MAD, mean deviance and rank Gini of one model on a dataset
compare    pairwise Vuong and ordered-Lorenz Gini matrices plus min-max pick
transform  apply the configured composition treatments to a dataset

Every command is deterministic for a given seed and inputs.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .compositional import CompositionBlock, apply_blocks
from .config import ConfigError, SchemaConfig, SimSpec
from .dataio import (DataError, RawTable, build_dataset, format_float, numeric_table,
                     read_csv, subset_table, write_csv, write_records, write_table)
from .metrics import ModelScores, build_report, mean_deviance
from .protocol import holdout_scores, run_protocol, stratified_split
from .simulate import simulate
from .trainers import BoostedModel
from .tweedie import zitw_logpdf


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def sidecar_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".truth.csv")


def cmd_simulate(args) -> int:
    spec = SimSpec.load(args.config)
    if args.seed is not None:
        spec.seed = args.seed
    columns, truth = simulate(spec)
    write_table(args.out, columns)
    write_table(sidecar_path(args.out), truth)
    print(f"wrote {spec.n} rows to {args.out} and ground truth to {sidecar_path(args.out)}")
    return 0


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------

def _fit_blocks(schema: SchemaConfig, table: RawTable, rows) -> List[CompositionBlock]:
    blocks = [CompositionBlock.from_dict(b.to_dict()) for b in schema.composition_blocks]
    if blocks:
        sub = numeric_table(subset_table(table, rows), schema)
        for b in blocks:
            b.fit(sub)
    return blocks


def cmd_train(args) -> int:
    schema = SchemaConfig.load(args.config)
    if args.seed is not None:
        schema.seed = args.seed
    if args.family is not None:
        schema.family = args.family
    if args.select_by is not None:
        schema.select_by = args.select_by
    table = read_csv(args.data)
    target = build_dataset(table, schema).target
    split = stratified_split(target, schema.test_fraction, schema.seed)
    blocks = _fit_blocks(schema, table, split[0])
    data = build_dataset(table, schema, blocks)
    cells = schema.grid_cells()
    res = run_protocol(schema.family, data, dict(schema.boost), cells, schema.p,
                       schema.cv_folds, schema.seed, select_by=schema.select_by,
                       threads=args.threads, split=split)

    model = res.model
    stored = schema.to_dict()
    stored["composition_blocks"] = [b.to_dict() for b in blocks]
    model.metadata = {"schema": stored}
    out = _outdir(args.out)
    model_path = Path(args.model) if args.model else out / "model.json"
    model.save(model_path)

    records = [r.record() for r in res.cv_rows]
    for i, r in enumerate(records):
        r["selected"] = int(i == res.winner)
    fields = list(records[0])
    write_records(out / "cv_table.csv", records, fields)
    log_fields = []
    for row in model.log:
        log_fields += [k for k in row if k not in log_fields]
    write_records(out / "training_log.csv", model.log, log_fields)
    test_table = subset_table(table, res.test_rows)
    write_csv(out / "test.csv", test_table.header,
              [test_table.cells[h] for h in test_table.header])
    test_dev, test_mad = holdout_scores(model, data.subset(res.test_rows))
    summary = {
        "family": schema.family, "seed": schema.seed, "select_by": schema.select_by,
        "winner": res.cv_rows[res.winner].cell, "n_train": int(res.train_rows.size),
        "n_test": int(res.test_rows.size), "phi": model.phi, "gamma": model.gamma_infl,
        "test_mean_deviance": test_dev, "test_mad": test_mad,
        "n_mean_trees": len(model.mean_trees),
        "n_prob_trees": None if model.prob_trees is None else len(model.prob_trees),
    }
    _dump_json(out / "train_summary.json", summary)
    print(f"trained {schema.family}: phi={model.phi:.6g}"
          + ("" if model.gamma_infl is None else f" gamma={model.gamma_infl:.6g}")
          + f" test deviance={test_dev:.6g}; model written to {model_path}")
    return 0


# --------------------------------------------------------------------------
# evaluate / compare
# --------------------------------------------------------------------------

def _model_dataset(model: BoostedModel, table: RawTable):
    meta = model.metadata.get("schema")
    if meta is None:
        raise ConfigError("model has no stored schema; it was not trained by this tool")
    schema = SchemaConfig.from_dict(meta)
    return build_dataset(table, schema, schema.composition_blocks)


def _scores(label, model: BoostedModel, table: RawTable):
    data = _model_dataset(model, table)
    pr = model.predict(data)
    return ModelScores(
        label=label,
        loglik=zitw_logpdf(data.target, pr.mu, model.phi, model.p, pr.q),
        y_hat=pr.expected,
        deviance=mean_deviance(data.target, pr.mu, model.phi, model.p, pr.q),
    ), data, pr


def _write_report(out: Path, report, stem: str):
    _write_text(out / f"{stem}.json", report.to_json())
    _write_text(out / f"{stem}.txt", report.to_text())
    rows = [{"model": lab, "mad": report.mad[lab], "mean_deviance": report.mean_deviance[lab],
             "gini_a": report.gini_a[lab]} for lab in report.labels]
    write_records(out / f"{stem}_table.csv", rows, ["model", "mad", "mean_deviance", "gini_a"])


def cmd_evaluate(args) -> int:
    model = BoostedModel.load(args.model)
    table = read_csv(args.data)
    label = Path(args.model).stem
    scores, data, pr = _scores(label, model, table)
    report = build_report(data.target, [scores], pairwise=False)
    out = _outdir(args.out)
    _write_report(out, report, "metrics")
    if args.predictions:
        write_table(out / "predictions.csv",
                    {"mu": pr.mu, "q": pr.q, "expected": pr.expected})
    sys.stdout.write(report.to_text())
    return 0


def _labels(paths) -> List[str]:
    labels, seen = [], {}
    for p in paths:
        stem = Path(p).stem
        seen[stem] = seen.get(stem, 0) + 1
        labels.append(stem if seen[stem] == 1 else f"{stem}#{seen[stem]}")
    return labels


def cmd_compare(args) -> int:
    if len(args.model) < 2:
        raise ConfigError("compare needs at least two models")
    table = read_csv(args.data)
    scores, target = [], None
    for label, path in zip(_labels(args.model), args.model):
        s, data, _ = _scores(label, BoostedModel.load(path), table)
        scores.append(s)
        target = data.target
    report = build_report(target, scores, pairwise=True)
    out = _outdir(args.out)
    _write_report(out, report, "comparison")
    k = len(scores)
    vuong_rows, gini_rows = [], []
    for i in range(k):
        v = {"first_model": report.labels[i]}
        g = {"base_model": report.labels[i]}
        for j in range(k):
            r = report.vuong[i][j]
            v[report.labels[j]] = "" if r is None or not r.defined \
                else f"{format_float(r.statistic)} ({format_float(r.p_value)})"
            g[report.labels[j]] = "" if report.gini_b[i][j] is None \
                else format_float(report.gini_b[i][j])
        vuong_rows.append(v)
        gini_rows.append(g)
    write_records(out / "vuong_matrix.csv", vuong_rows, ["first_model"] + report.labels)
    write_records(out / "gini_b_matrix.csv", gini_rows, ["base_model"] + report.labels)
    sys.stdout.write(report.to_text())
    return 0


# --------------------------------------------------------------------------
# transform
# --------------------------------------------------------------------------

def cmd_transform(args) -> int:
    schema = SchemaConfig.load(args.config)
    table = read_csv(args.data)
    blocks = [CompositionBlock.from_dict(b.to_dict()) for b in schema.composition_blocks]
    for b in blocks:
        missing = [c for c in b.columns if c not in table.cells]
        if missing:
            raise DataError(f"block {b.name!r}: columns {missing} not in the data")
    parsed = {c: table.numeric(c) for b in blocks for c in b.columns}
    for b in blocks:
        b.fit(parsed)
    # pass-through columns keep their original strings
    cells = {h: table.cells[h] for h in table.header}
    derived = apply_blocks(cells, [_StringBlock(b, parsed) for b in blocks], table.header)
    header = list(derived)
    write_csv(args.out, header, [derived[h] for h in header])
    print(f"wrote {table.n_rows} rows and {len(header)} columns to {args.out}")
    return 0


class _StringBlock:
    """Adapter that lets :func:`apply_blocks` work on string columns."""

    def __init__(self, block: CompositionBlock, parsed):
        self.block = block
        self.name = block.name
        self.columns = block.columns
        self.parsed = parsed

    def transform(self, table):
        if self.block.treatment == "none":
            return {c: table[c] for c in self.columns}
        out = self.block.transform(self.parsed)
        return {k: [format_float(v) for v in col] for k, col in out.items()}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zitboost",
        description="Tweedie and zero-inflated Tweedie boosted trees for claim data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    p.add_argument("--config", required=True, help="simulation document (JSON)")
    p.add_argument("--out", required=True, help="output CSV; the sidecar goes next to it")
    p.add_argument("--seed", type=int, help="override the document's seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="cross-validate a grid and fit the winner")
    p.add_argument("--config", required=True, help="schema and protocol config (JSON)")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--out", required=True, help="directory for tables, log and test split")
    p.add_argument("--model", help="model output path (default: OUT/model.json)")
    p.add_argument("--seed", type=int, help="override the config's seed")
    p.add_argument("--threads", type=int, default=1, help="parallel training runs")
    p.add_argument("--family", choices=["tweedie", "zitw_s1", "zitw_s2"],
                   help="override the config's objective family")
    p.add_argument("--select-by", choices=["deviance", "mad"],
                   help="cross-validation selection metric")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score one model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--predictions", action="store_true", help="also write per-row predictions")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="pairwise comparison of two or more models")
    p.add_argument("--model", required=True, nargs="+")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("transform", help="apply composition treatments to a CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_transform)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, DataError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
