"""Multi-output surrogate assembly and model-file persistence.

A surrogate couples Z-scoring of inputs and outputs (statistics from the
training split only) with one independently fitted single-output model per
response column: either an exact GP or a linear baseline. Model files are
single JSON documents; the GP Cholesky factor is never stored but
recomputed and verified on load.
"""

import json
import logging
import time

from dataclasses import dataclass, field

import numpy as np

from . import gp
from .data import Standardizer, fit_standardizer
from .kernels import Hyperparameters, KernelSpec
from .linear import LinearModel, fit_linear
from .metrics import compute_metrics

logger = logging.getLogger(__name__)

MODEL_FORMAT_GP = "surro-gp/1"
MODEL_FORMAT_LINEAR = "surro-linear/1"

MODEL_KINDS = ("gpr", "ols", "ridge", "lasso")
_PENALTY_FOR_KIND = {"ols": "none", "ridge": "l2", "lasso": "l1"}


@dataclass(frozen=True)
class SurrogateConfig:
    """What to fit: model kind plus its knobs."""

    kind: str = "gpr"
    kernel: str = "MATERN32"
    ard: bool = True
    n_restarts: int = 10
    lam: float = 0.01

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "kernel": self.kernel, "ard": self.ard,
                "n_restarts": self.n_restarts, "lam": self.lam}

    @classmethod
    def from_dict(cls, obj: dict) -> "SurrogateConfig":
        return cls(**obj)


@dataclass
class SurrogateModel:
    """Trained multi-output surrogate (immutable once fitted)."""

    config: SurrogateConfig
    input_names: tuple
    output_names: tuple
    x_scaler: Standardizer
    y_means: np.ndarray
    y_stds: np.ndarray
    models: tuple  # one FittedGP or LinearModel per output

    @property
    def is_gp(self) -> bool:
        return self.config.kind == "gpr"

    def _check_columns(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.input_names):
            raise ValueError(
                f"schema mismatch: model expects {len(self.input_names)} "
                f"input columns {list(self.input_names)}, got {X.shape[1]}")
        return X

    def predict(self, X, include_noise: bool = False):
        """Destandardized (mean, std) per output; std is 0 for linear kinds."""
        X = self._check_columns(X)
        Z = self.x_scaler.transform(X)
        means = np.empty((X.shape[0], len(self.models)))
        stds = np.zeros_like(means)
        for j, model in enumerate(self.models):
            if self.is_gp:
                post = model.predict(Z, include_noise=include_noise)
                means[:, j] = post.mean
                stds[:, j] = post.std
            else:
                means[:, j] = model.predict(Z)
        return (means * self.y_stds + self.y_means, stds * self.y_stds)

    def predict_mean(self, X) -> np.ndarray:
        """Posterior-mean-only fast path (used by Monte Carlo propagation)."""
        X = self._check_columns(X)
        Z = self.x_scaler.transform(X)
        means = np.empty((X.shape[0], len(self.models)))
        for j, model in enumerate(self.models):
            means[:, j] = model.predict_mean(Z) if self.is_gp else model.predict(Z)
        return means * self.y_stds + self.y_means


def _spawn_seeds(seed, count):
    """Derive independent integer child seeds from any SeedSequence entropy."""
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(count)]


def fit_surrogate(config: SurrogateConfig, X, y, input_names, output_names,
                  seed=0) -> SurrogateModel:
    """Standardize on the given training data and fit one model per output."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    x_scaler = fit_standardizer(X, input_names)
    y_means = y.mean(axis=0)
    y_stds = y.std(axis=0, ddof=1)
    # Constant outputs are fit in raw offset form rather than erroring out:
    # the GP zero-mean prior recovers a constant, and scaling by 1 is inert.
    constant = y_stds <= 0.0
    if np.any(constant):
        names = [output_names[j] for j in np.flatnonzero(constant)]
        logger.warning("constant output columns left unscaled: %s", names)
        y_stds = np.where(constant, 1.0, y_stds)
    Z = x_scaler.transform(X)
    Y = (y - y_means) / y_stds

    models = []
    seeds = _spawn_seeds(seed, y.shape[1])
    for j in range(y.shape[1]):
        t0 = time.perf_counter()
        if config.kind == "gpr":
            spec = KernelSpec(config.kernel, config.ard, X.shape[1])
            model = gp.fit(spec, Z, Y[:, j], n_restarts=config.n_restarts,
                           seed=seeds[j])
            logger.info("fit %s GP for %s in %.2fs (lml=%.3f)", config.kernel,
                        output_names[j], time.perf_counter() - t0, model.lml)
        else:
            model = fit_linear(Z, Y[:, j], _PENALTY_FOR_KIND[config.kind],
                               config.lam if config.kind != "ols" else 0.0)
        models.append(model)
    return SurrogateModel(config, tuple(input_names), tuple(output_names),
                          x_scaler, y_means, y_stds, tuple(models))


def holdout_report(model: SurrogateModel, train: "Dataset", test: "Dataset"):
    """Per-output rows: (output, r2_train, r2_test, mae, rmse, mape,
    max_abs_pct_error), with MAE/RMSE/MAPE on the raw-unit test set."""
    mean_tr, _ = model.predict(train.inputs)
    mean_te, _ = model.predict(test.inputs)
    rows = []
    for j, name in enumerate(model.output_names):
        m_tr = compute_metrics(train.outputs[:, j], mean_tr[:, j])
        m_te = compute_metrics(test.outputs[:, j], mean_te[:, j])
        rows.append((name, m_tr.r2, m_te.r2, m_te.mae, m_te.rmse, m_te.mape,
                     m_te.max_abs_pct_error))
    return rows


def save_model(model: SurrogateModel, path):
    """Serialize to the single-document JSON model format."""
    doc = {
        "format": MODEL_FORMAT_GP if model.is_gp else MODEL_FORMAT_LINEAR,
        "config": model.config.to_dict(),
        "input_names": list(model.input_names),
        "output_names": list(model.output_names),
        "x_scaler": {"mean": model.x_scaler.mean.tolist(),
                     "std": model.x_scaler.std.tolist()},
        "y_means": model.y_means.tolist(),
        "y_stds": model.y_stds.tolist(),
    }
    if model.is_gp:
        doc["X_train"] = model.models[0].X_train.tolist()
        doc["outputs"] = [{
            "name": name,
            "kernel": m.spec.to_dict(),
            "log_lengthscales": m.hp.log_lengthscales.tolist(),
            "log_sigma_f": m.hp.log_sigma_f,
            "log_sigma_n": m.hp.log_sigma_n,
            "jitter_used": m.jitter_used,
            "lml": m.lml,
            "y_train": m.y_train.tolist(),
        } for name, m in zip(model.output_names, model.models)]
    else:
        doc["outputs"] = [{
            "name": name,
            "coefficients": m.coefficients.tolist(),
            "intercept": m.intercept,
            "penalty": m.penalty,
            "lambda": m.lam,
        } for name, m in zip(model.output_names, model.models)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    logger.info("saved model -> %s", path)


def load_model(path) -> SurrogateModel:
    """Load a model file; GP factorizations are recomputed and verified."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    fmt = doc.get("format")
    if fmt not in (MODEL_FORMAT_GP, MODEL_FORMAT_LINEAR):
        raise ValueError(f"{path}: unsupported model format {fmt!r}")
    config = SurrogateConfig.from_dict(doc["config"])
    x_scaler = Standardizer(np.array(doc["x_scaler"]["mean"]),
                            np.array(doc["x_scaler"]["std"]))
    models = []
    if fmt == MODEL_FORMAT_GP:
        X_train = np.array(doc["X_train"], dtype=float)
        for entry in doc["outputs"]:
            spec = KernelSpec.from_dict(entry["kernel"])
            hp = Hyperparameters(np.array(entry["log_lengthscales"]),
                                 entry["log_sigma_f"], entry["log_sigma_n"])
            fitted = gp.make_fitted(spec, hp, X_train,
                                    np.array(entry["y_train"], dtype=float),
                                    lml=entry.get("lml", float("nan")))
            fitted.verify()
            if fitted.jitter_used != entry["jitter_used"]:
                logger.warning(
                    "%s: recomputed jitter %.3e differs from stored %.3e",
                    entry["name"], fitted.jitter_used, entry["jitter_used"])
            models.append(fitted)
    else:
        for entry in doc["outputs"]:
            models.append(LinearModel(np.array(entry["coefficients"]),
                                      entry["intercept"], entry["penalty"],
                                      entry["lambda"]))
    return SurrogateModel(config, tuple(doc["input_names"]),
                          tuple(doc["output_names"]), x_scaler,
                          np.array(doc["y_means"], dtype=float),
                          np.array(doc["y_stds"], dtype=float),
                          tuple(models))
