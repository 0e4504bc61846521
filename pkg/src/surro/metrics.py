"""Regression metrics and repeated K-fold cross-validation.

R^2 is taken about the evaluation-set mean; percent errors are
100*|pred - true|/|true| with zero-valued truths excluded (and counted)
from MAPE. Cross-validation macro-averages fold metrics within a repeat
and reports mean/std across repeats.
"""

import logging
import os

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

logger = logging.getLogger(__name__)

CV_METRICS = ("r2", "mae", "rmse", "mape")


@dataclass(frozen=True)
class RegressionMetrics:
    r2: float
    mae: float
    rmse: float
    mape: float
    max_abs_pct_error: float
    n_zero_true_excluded: int = 0


def percent_errors(y_true, y_pred) -> np.ndarray:
    """Pointwise 100*|pred - true|/|true|; infinite where true == 0."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 100.0 * np.abs(y_pred - y_true) / np.abs(y_true)


def _checked(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.size != y_pred.size:
        raise ValueError("y_true and y_pred lengths differ")
    if y_true.size < 2:
        raise ValueError("need at least 2 points to score")
    return y_true, y_pred


def r2_score(y_true, y_pred) -> float:
    """1 - SS_res/SS_tot; undefined (error) for zero-variance truths."""
    y_true, y_pred = _checked(y_true, y_pred)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined: y_true has zero variance")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / ss_tot


def compute_metrics(y_true, y_pred) -> RegressionMetrics:
    """Score one prediction set (see module docstring for conventions)."""
    y_true, y_pred = _checked(y_true, y_pred)
    err = y_pred - y_true
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err ** 2)))
    pct = percent_errors(y_true, y_pred)
    nonzero = y_true != 0.0
    excluded = int(np.count_nonzero(~nonzero))
    if excluded:
        logger.warning("MAPE: excluded %d zero-valued truths", excluded)
    if np.any(nonzero):
        mape = float(np.mean(pct[nonzero]))
        max_pct = float(np.max(pct[nonzero]))
    else:
        mape = float("nan")
        max_pct = float("nan")
    return RegressionMetrics(r2_score(y_true, y_pred), mae, rmse, mape,
                             max_pct, excluded)


def _fold_metrics(y_true, y_pred):
    """Per-fold metric dict; degenerate folds yield NaN instead of raising."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    err = y_pred - y_true
    out = {
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(np.sqrt(np.mean(err ** 2))),
    }
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if y_true.size >= 2 and ss_tot > 0.0:
        out["r2"] = 1.0 - float(np.sum(err ** 2)) / ss_tot
    else:
        out["r2"] = float("nan")
    nonzero = y_true != 0.0
    pct = percent_errors(y_true, y_pred)
    out["mape"] = (float(np.mean(pct[nonzero]))
                   if np.any(nonzero) else float("nan"))
    return out


@dataclass(frozen=True)
class CrossValidationResult:
    """per_repeat[r][output][metric] and aggregate[output][metric] ->
    (mean, std)."""

    k: int
    repeats: int
    seed: int
    output_names: tuple
    per_repeat: tuple
    aggregate: dict

    def repeat_rows(self):
        """Rows (repeat, output, r2, mae, rmse, mape) for CSV emission."""
        for r, by_output in enumerate(self.per_repeat):
            for name in self.output_names:
                m = by_output[name]
                yield (str(r), name) + tuple(m[k] for k in CV_METRICS)

    def aggregate_rows(self):
        for name in self.output_names:
            agg = self.aggregate[name]
            yield ("mean", name) + tuple(agg[k][0] for k in CV_METRICS)
            yield ("std", name) + tuple(agg[k][1] for k in CV_METRICS)


def _fold_indices(n, k, rng):
    return np.array_split(rng.permutation(n), k)


def repeated_kfold(config, dataset: Dataset, k: int = 5, repeats: int = 10,
                   seed: int = 0, threads=None) -> CrossValidationResult:
    """Repeated K-fold cross-validation of a surrogate configuration.

    Every repeat reshuffles with a seed derived from (seed, repeat); each
    fold trains a fresh surrogate on the remaining folds (fit seed derived
    from (seed, repeat, fold)) and scores the held-out fold. Fold metrics
    are macro-averaged per repeat; the aggregate is mean/std across
    repeats. Deterministic for a fixed seed regardless of thread count.
    """
    from .surrogate import fit_surrogate  # deferred to avoid an import cycle

    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    n = dataset.n
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} rows")
    if n - max(len(f) for f in _fold_indices(n, k, np.random.default_rng(0))) < 2:
        raise ValueError("training folds would have fewer than 2 rows")

    tasks = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        folds = _fold_indices(n, k, rng)
        for i, fold in enumerate(folds):
            tasks.append((r, i, fold))

    def run(task):
        r, i, fold = task
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        train = dataset.take(np.flatnonzero(mask))
        model = fit_surrogate(config, train.inputs, train.outputs,
                              dataset.input_names, dataset.output_names,
                              seed=(seed, r, i))
        mean, _ = model.predict(dataset.inputs[fold])
        return {name: _fold_metrics(dataset.outputs[fold][:, j], mean[:, j])
                for j, name in enumerate(dataset.output_names)}

    if threads is None:
        threads = os.cpu_count() or 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fold_results = list(pool.map(run, tasks))
    else:
        fold_results = [run(t) for t in tasks]

    per_repeat = []
    for r in range(repeats):
        chunk = fold_results[r * k:(r + 1) * k]
        by_output = {}
        for name in dataset.output_names:
            by_output[name] = {
                m: float(np.mean([c[name][m] for c in chunk]))
                for m in CV_METRICS}
        per_repeat.append(by_output)

    aggregate = {}
    for name in dataset.output_names:
        aggregate[name] = {}
        for m in CV_METRICS:
            vals = np.array([rep[name][m] for rep in per_repeat])
            std = float(np.std(vals, ddof=1)) if repeats > 1 else 0.0
            aggregate[name][m] = (float(np.mean(vals)), std)

    return CrossValidationResult(k, repeats, seed, dataset.output_names,
                                 tuple(per_repeat), aggregate)
