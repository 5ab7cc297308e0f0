"""Command-line interface.

Subcommands: synth, binarize, fit, predict, eval, similarity, bench.  Every
command is deterministic given its flags, input files and seed (wall-clock
timings excluded).  Failures exit nonzero with a single machine-parsable
``error: ...`` line on stderr, and output files the failing command had
started writing are removed.  Set ``QDT_LOG=INFO`` (or DEBUG) for progress
logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .dataset import (
    BinarizeConfig,
    BinaryDataset,
    TableSchema,
    apply_binarization,
    binarize,
    load_csv,
    save_csv,
)
from .density import kde_from_quantiles, save_curve_csv
from .metrics import build_report, report_json, report_table
from .model import (
    deserialize,
    format_tree,
    jaccard_matrix,
    predict_batch,
    serialize,
    tree_depth,
    zone_summary,
)
from .quantiles import LEAF_VALUE_MODES, INTERPOLATED, QuantileGrid
from .search import FEATURE_ORDERS, STATIC, SearchConfig, fit_naive, fit_simultaneous
from .synth import SynthConfig, generate, load_ground_truth, save_ground_truth

log = logging.getLogger("qdtrees.cli")


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse's default error handler prints usage plus a message; keep the
    # contract of exactly one parsable line on stderr instead.
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


class _Outputs:
    """Tracks files a command is writing so failures leave no partial output."""

    def __init__(self) -> None:
        self.paths: list[Path] = []

    def declare(self, path) -> Path:
        p = Path(path)
        self.paths.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.paths:
            try:
                p.unlink(missing_ok=True)
            except OSError:  # cleanup is best-effort
                pass


def _setup_logging() -> None:
    level = os.environ.get("QDT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _resolve_grid(args) -> QuantileGrid:
    if args.quantiles is not None:
        try:
            levels = [float(tok) for tok in args.quantiles.split(",") if tok.strip()]
        except ValueError:
            raise CliError(f"could not parse --quantiles {args.quantiles!r}") from None
        return QuantileGrid(levels)
    if args.num_quantiles is not None:
        return QuantileGrid.evenly_spaced(args.num_quantiles)
    raise CliError("one of --quantiles / --num-quantiles is required")


def _search_config(args) -> SearchConfig:
    return SearchConfig(
        max_depth=args.max_depth,
        min_sup=args.min_sup,
        timeout_s=args.timeout_s,
        feature_order=args.feature_order,
        leaf_value=args.leaf_value,
    )


def _load_training(path, target: str, bins: int) -> BinaryDataset:
    raw = load_csv(path, TableSchema(target=target))
    return binarize(raw, BinarizeConfig(bins=bins))


def _load_model(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read model {path}: {exc}") from exc
    return deserialize(data)


def _model_dataset(model, raw) -> BinaryDataset:
    """Rebuild a BinaryDataset in the model's feature space from a raw table."""
    x = apply_binarization(model.binarization, raw)
    y = np.asarray(raw.require_target(), dtype=np.float64)
    return BinaryDataset.from_arrays(x, y, model.binarization)


def _predictions(model, raw, rearrange: bool) -> np.ndarray:
    x = apply_binarization(model.binarization, raw)
    preds = predict_batch(model, x)
    if rearrange:
        preds = np.sort(preds, axis=1)
    return preds


def cmd_synth(args, out: _Outputs) -> None:
    cfg = SynthConfig(
        n_samples=args.n,
        n_category_features=args.category_bits,
        n_noise_features=args.noise_bits,
        n_categories=args.categories,
        seed=args.seed,
    )
    table, truth = generate(cfg)
    csv_path = out.declare(args.out)
    truth_path = out.declare(args.truth_out or Path(args.out).with_suffix(".truth.json"))
    save_csv(table, csv_path)
    save_ground_truth(truth, cfg, truth_path)
    log.info("wrote %s (%d samples) and %s", csv_path, cfg.n_samples, truth_path)


def cmd_binarize(args, out: _Outputs) -> None:
    raw = load_csv(args.data, TableSchema(target=args.target))
    ds = binarize(raw, BinarizeConfig(bins=args.bins))
    x = apply_binarization(ds.feature_map, raw)  # original row order
    csv_path = out.declare(args.out)
    map_path = out.declare(args.map_out or Path(args.out).with_suffix(".map.json"))
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.feature_names + [args.target])
        target = raw.require_target()
        for i in range(raw.n_rows):
            writer.writerow([int(v) for v in x[i]] + [repr(float(target[i]))])
    map_path.write_text(json.dumps(ds.feature_map, indent=1), encoding="utf-8")
    log.info("wrote %s (%d features) and %s", csv_path, ds.n_features, map_path)


def cmd_fit(args, out: _Outputs) -> None:
    grid = _resolve_grid(args)
    ds = _load_training(args.data, args.target, args.bins)
    cfg = _search_config(args)
    t0 = time.monotonic()
    if args.naive:
        model = fit_naive(ds, grid, cfg, parallel=args.parallel_naive)
    else:
        model = fit_simultaneous(ds, grid, cfg)
    elapsed = time.monotonic() - t0
    model_path = out.declare(args.out)
    model_path.write_bytes(serialize(model))
    for q, err, opt in zip(grid, model.train_errors, model.optimal):
        print(f"q={q:.6f} loss={err:.6f} optimal={'true' if opt else 'false'}")
    log.info("fit %d trees in %.3fs -> %s", len(grid), elapsed, model_path)
    if args.print_trees:
        for q, tree in zip(grid, model.trees):
            print(f"# tree for q={q:.6f} (depth {tree_depth(tree)})")
            print(format_tree(tree, model.feature_names))


def cmd_predict(args, out: _Outputs) -> None:
    model = _load_model(args.model)
    raw = load_csv(args.data, TableSchema(target=args.target, target_required=False))
    preds = _predictions(model, raw, args.rearrange)
    pred_path = out.declare(args.out)
    with pred_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row"] + [f"q={q:g}" for q in model.grid])
        for i, row in enumerate(preds):
            writer.writerow([i] + [repr(float(v)) for v in row])
    if args.curves_dir is not None:
        curves = Path(args.curves_dir)
        curves.mkdir(parents=True, exist_ok=True)
        for i, row in enumerate(preds):
            save_curve_csv(kde_from_quantiles(row), out.declare(curves / f"curve_{i}.csv"))
    log.info("wrote %d prediction rows -> %s", len(preds), pred_path)


def cmd_eval(args, out: _Outputs) -> None:
    model = _load_model(args.model)
    raw = load_csv(args.data, TableSchema(target=args.target))
    targets = np.asarray(raw.require_target(), dtype=np.float64)
    preds = _predictions(model, raw, rearrange=False)
    density_preds = np.sort(preds, axis=1) if args.rearrange else preds
    densities = [kde_from_quantiles(row) for row in density_preds]
    true_pdfs = None
    integration_range = None
    if args.truth is not None:
        truth = load_ground_truth(args.truth)
        if truth.mu.size != targets.size:
            raise CliError(
                f"ground truth has {truth.mu.size} samples, data has {targets.size}"
            )
        true_pdfs = truth.true_pdfs()
        integration_range = truth.integration_range()
    report = build_report(preds, targets, model.grid, densities, true_pdfs, integration_range)
    print(report_table(report))
    if args.out is not None:
        out.declare(args.out).write_text(report_json(report, model.grid), encoding="utf-8")


def cmd_similarity(args, out: _Outputs) -> None:
    model = _load_model(args.model)
    raw = load_csv(args.data, TableSchema(target=args.target))
    ds = _model_dataset(model, raw)
    matrix = jaccard_matrix(model, ds)
    matrix_path = out.declare(args.out)
    with matrix_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q"] + [f"{q:g}" for q in model.grid])
        for q, row in zip(model.grid, matrix):
            writer.writerow([f"{q:g}"] + [repr(float(v)) for v in row])
    levels = list(model.grid)
    for z, (lo, hi) in enumerate(zone_summary(matrix, args.zone_threshold)):
        print(
            f"zone {z}: trees {lo}..{hi} (q {levels[lo]:g}..{levels[hi]:g},"
            f" {hi - lo + 1} trees)"
        )
    log.info("wrote %dx%d similarity matrix -> %s", len(levels), len(levels), matrix_path)


def cmd_bench(args, out: _Outputs) -> None:
    try:
        counts = [int(tok) for tok in args.tree_counts.split(",") if tok.strip()]
    except ValueError:
        raise CliError(f"could not parse --tree-counts {args.tree_counts!r}") from None
    if not counts or any(k < 1 for k in counts):
        raise CliError("--tree-counts needs positive integers")
    ds = _load_training(args.data, args.target, args.bins)
    cfg = _search_config(args)

    if not args.no_warmup:  # one untimed run so allocator/cache effects settle
        fit_simultaneous(ds, QuantileGrid.evenly_spaced(counts[0]), cfg)

    rows = []
    for k in counts:
        grid = QuantileGrid.evenly_spaced(k)
        t0 = time.monotonic()
        sim = fit_simultaneous(ds, grid, cfg)
        t_sim = time.monotonic() - t0
        t0 = time.monotonic()
        naive = fit_naive(ds, grid, cfg, parallel=args.parallel_naive)
        t_naive = time.monotonic() - t0
        if not np.array_equal(sim.train_errors, naive.train_errors):
            raise CliError(f"per-quantile losses differ between engines at k={k}")
        rows.append(
            {
                "k": k,
                "t_simultaneous": round(t_sim, 3),
                "t_naive": round(t_naive, 3),
                "speedup": round(t_naive / t_sim, 3) if t_sim > 0 else float("inf"),
                "sim_timed_out": not all(sim.optimal),
                "naive_timed_out": not all(naive.optimal),
                "naive_parallel": bool(args.parallel_naive),
            }
        )
        log.info("k=%d t_sim=%.3fs t_naive=%.3fs", k, t_sim, t_naive)
    bench_path = out.declare(args.out)
    with bench_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: str(v).lower() if isinstance(v, bool) else v for k, v in row.items()})
    for row in rows:
        print(
            f"k={row['k']} t_simultaneous={row['t_simultaneous']}"
            f" t_naive={row['t_naive']} speedup={row['speedup']}"
        )


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-depth", type=int, default=4, help="maximum tree depth (default 4)")
    p.add_argument("--min-sup", type=int, default=1, help="minimum samples per leaf (default 1)")
    p.add_argument("--timeout-s", type=float, default=None, help="search time budget in seconds")
    p.add_argument(
        "--leaf-value",
        choices=LEAF_VALUE_MODES,
        default=INTERPOLATED,
        help="leaf prediction: interpolated quantile or exact minimizing order statistic",
    )
    p.add_argument(
        "--feature-order",
        choices=FEATURE_ORDERS,
        default=STATIC,
        help="feature exploration order (affects speed, never the optimum)",
    )
    p.add_argument("--bins", type=int, default=4, help="thresholds per numeric column (default 4)")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--quantiles", help="comma-separated levels, e.g. 0.1,0.5,0.9")
    g.add_argument(
        "--num-quantiles", type=int, help="k evenly spaced levels j/(k+1), j=1..k"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdt", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark CSV + ground truth")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--categories", type=int, default=15)
    p.add_argument("--category-bits", type=int, default=4)
    p.add_argument("--noise-bits", type=int, default=5)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--truth-out", default=None, help="sidecar path (default <out>.truth.json)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("binarize", help="binarize a CSV and write the feature map")
    p.add_argument("data", help="input CSV")
    p.add_argument("--target", default="y")
    p.add_argument("--bins", type=int, default=4)
    p.add_argument("--out", required=True, help="binarized CSV path")
    p.add_argument("--map-out", default=None, help="map path (default <out>.map.json)")
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("fit", help="train one optimal tree per quantile level")
    p.add_argument("data", help="training CSV")
    p.add_argument("--target", default="y")
    _add_grid_flags(p)
    _add_search_flags(p)
    p.add_argument("--naive", action="store_true", help="independent search per quantile")
    p.add_argument(
        "--parallel-naive", action="store_true", help="run naive searches in a thread pool"
    )
    p.add_argument("--print-trees", action="store_true", help="dump fitted trees to stdout")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="per-sample quantile vectors for a CSV")
    p.add_argument("data", help="input CSV (target column optional)")
    p.add_argument("--model", required=True)
    p.add_argument("--target", default="y")
    p.add_argument(
        "--rearrange", action="store_true", help="sort each sample's quantile vector ascending"
    )
    p.add_argument("--curves-dir", default=None, help="also write per-sample density curve CSVs")
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score a model on labelled data")
    p.add_argument("data", help="labelled CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--truth", default=None, help="ground-truth sidecar JSON (enables MISE)")
    p.add_argument(
        "--rearrange", action="store_true", help="sort quantile vectors before density estimation"
    )
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("similarity", help="Jaccard matrix of the per-quantile partitions")
    p.add_argument("data", help="training CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--zone-threshold", type=float, default=0.1)
    p.add_argument("--out", required=True, help="matrix CSV path")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("bench", help="time simultaneous vs naive fits over tree counts")
    p.add_argument("data", help="training CSV")
    p.add_argument("--target", default="y")
    p.add_argument("--tree-counts", required=True, help="comma-separated grid sizes, e.g. 5,25,100")
    _add_search_flags(p)
    p.add_argument("--parallel-naive", action="store_true")
    p.add_argument("--no-warmup", action="store_true", help="skip the untimed warm-up fit")
    p.add_argument("--out", required=True, help="timings CSV path")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    outputs = _Outputs()
    try:
        args.func(args, outputs)
    except (ValueError, OSError) as exc:
        outputs.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
