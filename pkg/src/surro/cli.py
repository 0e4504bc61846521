"""Command-line pipeline: DOE emission, crash-metric extraction, surrogate
training, prediction, cross-validation and Monte Carlo propagation.

Every run is reproducible from (config, seed); the resolved configuration
is echoed next to each output artifact as ``<out>.run.json``. Set SURRO_LOG
(DEBUG/INFO/WARNING) to control verbosity.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .crash import extract_batch
from .data import (INPUT_COLUMNS, OUTPUT_COLUMNS, load_dataset,
                   read_input_matrix, train_test_split, write_csv)
from .doe import default_design_space, lhs_sample
from .kernels import FAMILIES
from .metrics import CV_METRICS, repeated_kfold
from .propagation import InputDistributions, propagate
from .surrogate import (MODEL_KINDS, SurrogateConfig, fit_surrogate,
                        holdout_report, load_model, save_model)

logger = logging.getLogger(__name__)

REPORT_HEADER = ("output", "r2_train", "r2_test", "mae", "rmse", "mape",
                 "max_abs_pct_error")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {text}")
    return value


def _echo_config(out_path, command, options):
    """Write the resolved run configuration next to an output artifact."""
    doc = {"tool": f"surro {__version__}", "command": command,
           "options": {k: v for k, v in sorted(options.items())
                       if k not in ("func",)}}
    with open(f"{out_path}.run.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def _surrogate_config(args) -> SurrogateConfig:
    return SurrogateConfig(kind=args.kind, kernel=args.kernel, ard=args.ard,
                           n_restarts=args.restarts, lam=args.lam)


def cmd_doe(args):
    space = default_design_space()
    matrix = lhs_sample(space, args.n, args.seed)
    write_csv(args.out, space.column_names, matrix)
    _echo_config(args.out, "doe", {"n": args.n, "seed": args.seed})
    print(f"wrote {args.n} design points -> {args.out}")
    return 0


def cmd_extract_metrics(args):
    rows = extract_batch(args.manifest, args.out, threads=args.threads)
    _echo_config(args.out, "extract-metrics", {"manifest": args.manifest})
    print(f"extracted {len(rows)} runs -> {args.out}")
    return 0


def cmd_train(args):
    started = time.perf_counter()
    dataset = load_dataset(args.data)
    train, test = train_test_split(dataset, args.test_fraction, args.seed)
    config = _surrogate_config(args)
    model = fit_surrogate(config, train.inputs, train.outputs,
                          dataset.input_names, dataset.output_names,
                          seed=args.seed)
    save_model(model, args.out)
    _echo_config(args.out, "train", {
        "data": args.data, "kind": args.kind, "kernel": args.kernel,
        "ard": args.ard, "restarts": args.restarts, "lam": args.lam,
        "test_fraction": args.test_fraction, "seed": args.seed})
    rows = holdout_report(model, train, test)
    if args.report:
        write_csv(args.report, REPORT_HEADER, rows)
        _echo_config(args.report, "train", {"model": args.out})
    elapsed = time.perf_counter() - started
    print(f"trained {args.kind} on {train.n} rows "
          f"({dataset.dropped_rows} dropped at ingestion), "
          f"holdout {test.n} rows, {elapsed:.2f} s")
    for row in rows:
        print("  {:>8s}: R2_train={:.3f} R2_test={:.3f} MAE={:.4g} "
              "RMSE={:.4g} MAPE={:.2f}%".format(
                  row[0], row[1], row[2], row[3], row[4], row[5]))
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    X, dropped = read_input_matrix(args.data, model.input_names)
    if X.shape[0] == 0:
        raise ValueError(f"{args.data}: no valid input rows")
    started = time.perf_counter()
    mean, std = model.predict(X, include_noise=args.include_noise)
    elapsed = time.perf_counter() - started
    header = list(model.input_names)
    for name in model.output_names:
        header += [f"{name}_mean", f"{name}_std", f"{name}_lo95", f"{name}_hi95"]
    rows = []
    for i in range(X.shape[0]):
        row = list(X[i])
        for j in range(len(model.output_names)):
            m, s = mean[i, j], std[i, j]
            row += [m, s, m - 1.96 * s, m + 1.96 * s]
        rows.append(row)
    write_csv(args.out, header, rows)
    _echo_config(args.out, "predict", {
        "model": args.model, "data": args.data,
        "include_noise": args.include_noise, "dropped_rows": dropped})
    print(f"predicted {X.shape[0]} points in {elapsed * 1e3:.1f} ms -> {args.out}")
    return 0


def cmd_cv(args):
    dataset = load_dataset(args.data)
    config = _surrogate_config(args)
    result = repeated_kfold(config, dataset, k=args.k, repeats=args.repeats,
                            seed=args.seed, threads=args.threads)
    header = ("repeat", "output") + CV_METRICS
    rows = list(result.repeat_rows()) + list(result.aggregate_rows())
    write_csv(args.out, header, rows)
    _echo_config(args.out, "cv", {
        "data": args.data, "kind": args.kind, "kernel": args.kernel,
        "ard": args.ard, "restarts": args.restarts, "lam": args.lam,
        "k": args.k, "repeats": args.repeats, "seed": args.seed})
    print(f"cross-validated {args.k}-fold x {args.repeats} repeats -> {args.out}")
    for name in result.output_names:
        agg = result.aggregate[name]
        print("  {:>8s}: R2={:.3f}+/-{:.3f} MAE={:.4g} RMSE={:.4g}".format(
            name, agg["r2"][0], agg["r2"][1], agg["mae"][0], agg["rmse"][0]))
    return 0


def cmd_propagate(args):
    model = load_model(args.model)
    dists = InputDistributions.from_json_file(args.spec, model.input_names)
    results = propagate(model, dists, n_samples=args.n_samples,
                        seed=args.seed, batch_size=args.batch_size)
    header = ("output", "n_samples", "mean", "std", "std_pct_of_mean",
              "skewness", "excess_kurtosis")
    rows = [(r.output_name, str(r.n_samples), r.mean, r.std,
             r.std_pct_of_mean, r.skewness, r.excess_kurtosis)
            for r in results]
    write_csv(args.out, header, rows)
    base, _ = os.path.splitext(args.out)
    for r in results:
        hist_rows = [(r.hist_edges[i], r.hist_edges[i + 1], str(int(c)))
                     for i, c in enumerate(r.hist_counts)]
        write_csv(f"{base}.hist.{r.output_name}.csv",
                  ("bin_lo", "bin_hi", "count"), hist_rows)
    _echo_config(args.out, "propagate", {
        "model": args.model, "spec": args.spec, "n_samples": args.n_samples,
        "batch_size": args.batch_size, "seed": args.seed})
    print(f"propagated {args.n_samples} samples -> {args.out}")
    for r in results:
        print(f"  {r.output_name:>8s}: mean={r.mean:.6g} std={r.std:.6g} "
              f"({r.std_pct_of_mean:.4g}% of mean)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="master seed; every stage derives from it")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="worker cap for parallel sections "
                             "(default: machine parallelism)")

    model_opts = argparse.ArgumentParser(add_help=False)
    model_opts.add_argument("--kind", choices=MODEL_KINDS, default="gpr")
    model_opts.add_argument("--kernel", choices=FAMILIES, default="MATERN32")
    model_opts.add_argument("--ard", action="store_true",
                            help="one length-scale per input dimension")
    model_opts.add_argument("--restarts", type=int, default=10,
                            help="extra optimizer restarts for GP training")
    model_opts.add_argument("--lam", type=float, default=0.01,
                            help="regularization strength for ridge/lasso")

    parser = argparse.ArgumentParser(
        prog="surro",
        description="surrogate-model pipeline for crashworthiness DOE studies")
    parser.add_argument("--version", action="version",
                        version=f"surro {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("doe", parents=[common],
                       help="emit a Latin hypercube DOE matrix")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_doe)

    p = sub.add_parser("extract-metrics", parents=[common],
                       help="compute crash metrics from a manifest of "
                            "time-series CSVs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_metrics)

    p = sub.add_parser("train", parents=[common, model_opts],
                       help="fit per-output surrogates and report holdout "
                            "metrics")
    p.add_argument("--data", required=True, help="CSV with input and output columns")
    p.add_argument("--test-fraction", type=_fraction, default=0.2)
    p.add_argument("--out", required=True, help="model file path (JSON)")
    p.add_argument("--report", default=None, help="holdout metrics CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common],
                       help="predict new points with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV with input columns")
    p.add_argument("--include-noise", action="store_true",
                   help="add the fitted noise variance to predictive variance")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", parents=[common, model_opts],
                       help="repeated K-fold cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=_positive_int, default=5)
    p.add_argument("--repeats", type=_positive_int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("propagate", parents=[common],
                       help="Monte Carlo input-uncertainty propagation")
    p.add_argument("--model", required=True)
    p.add_argument("--spec", required=True,
                   help="JSON file with per-input probability laws")
    p.add_argument("--n-samples", type=_positive_int, default=100_000)
    p.add_argument("--batch-size", type=_positive_int, default=16_384)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SURRO_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
