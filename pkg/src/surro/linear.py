"""Linear baselines: ordinary least squares, ridge and lasso.

The penalized objective is (1/2n)*RSS + lam*||b||_1 for lasso and
(1/2n)*RSS + (lam/2)*||b||_2^2 for ridge, with the intercept never
penalized. Stating the scaling matters: it fixes which lam values are
comparable across dataset sizes.
"""

import logging

from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

PENALTIES = ("none", "l1", "l2")

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4, 1, 11))

_CD_TOL = 1e-8          # max coefficient change per sweep
_CD_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    penalty: str
    lam: float

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float, copy=True)
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "lam", float(self.lam))

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        # einsum keeps per-row results independent of batch partitioning,
        # which the Monte Carlo propagation relies on.
        return np.einsum("ij,j->i", X, self.coefficients) + self.intercept


def _soft_threshold(value, threshold):
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _lasso_cd(Xc, yc, lam):
    """Coordinate descent on centered data (cyclic, warm zero start)."""
    n, d = Xc.shape
    col_sq = np.einsum("ij,ij->j", Xc, Xc) / n
    beta = np.zeros(d)
    resid = yc.copy()
    for sweep in range(_CD_MAX_SWEEPS):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = (Xc[:, j] @ resid) / n + col_sq[j] * old
            new = _soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                resid -= (new - old) * Xc[:, j]
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < _CD_TOL:
            break
    else:
        logger.warning("lasso coordinate descent hit the sweep limit (%d)",
                       _CD_MAX_SWEEPS)
    return beta


def fit_linear(X, y, penalty: str = "none", lam: float = 0.0) -> LinearModel:
    """Fit a linear model with the requested penalty.

    OLS and ridge are solved in closed form through the normal equations;
    lasso by cyclic coordinate descent (tolerance 1e-8 on the largest
    coefficient change, at most 10^4 sweeps).
    """
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}, got {penalty!r}")
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if y.size != n:
        raise ValueError("X and y row counts differ")
    if penalty == "none" and n <= d:
        raise ValueError(f"OLS needs n > d (got n={n}, d={d}); "
                         "consider penalty='l2'")

    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean

    if penalty == "l1" and lam > 0.0:
        beta = _lasso_cd(Xc, yc, lam)
    else:
        gram = (Xc.T @ Xc) / n
        if penalty == "l2":
            gram = gram + lam * np.eye(d)
        rhs = (Xc.T @ yc) / n
        try:
            beta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "singular normal equations for OLS; the design matrix is "
                "rank-deficient -- try penalty='l2'") from exc
        if penalty == "none" and not np.all(
                np.isclose(gram @ beta, rhs, rtol=1e-6, atol=1e-8)):
            raise ValueError(
                "normal equations solved inaccurately (near-singular "
                "design); try penalty='l2'")

    intercept = y_mean - float(x_mean @ beta)
    return LinearModel(beta, intercept, penalty, lam)


def lasso_kkt_residual(model: LinearModel, X, y) -> float:
    """Largest violation of the lasso subgradient optimality conditions.

    For the (1/2n)*RSS + lam*||b||_1 objective: active coordinates must have
    gradient -lam*sign(b_j); inactive ones gradient magnitude <= lam.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    resid = y - model.predict(X)
    grad = -(X - X.mean(axis=0)).T @ resid / n
    worst = 0.0
    for j, b in enumerate(model.coefficients):
        if b != 0.0:
            worst = max(worst, abs(grad[j] + model.lam * np.sign(b)))
        else:
            worst = max(worst, max(abs(grad[j]) - model.lam, 0.0))
    return worst


def _r2_score(y_true, y_pred) -> float:
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - np.mean(y_true)) ** 2))
    if ss_tot == 0.0:
        return float("nan")
    return 1.0 - ss_res / ss_tot


def grid_search_lambda(X, y, penalty: str, grid=None, k: int = 5, seed=0):
    """K-fold grid search for the regularization strength.

    Returns (best_lambda, table) where table rows are
    (lambda, mean_val_r2, std_val_r2). The best lambda maximizes mean
    validation R^2; exact ties go to the larger lambda.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    grid = DEFAULT_LAMBDA_GRID if grid is None else tuple(grid)
    if not grid:
        raise ValueError("lambda grid must be non-empty")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    folds = np.array_split(rng.permutation(n), k)

    table = []
    best_lam, best_score = None, -np.inf
    for lam in sorted(grid):
        scores = []
        for fold in folds:
            mask = np.ones(n, dtype=bool)
            mask[fold] = False
            model = fit_linear(X[mask], y[mask], penalty, lam)
            scores.append(_r2_score(y[fold], model.predict(X[fold])))
        mean_r2 = float(np.mean(scores))
        std_r2 = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
        table.append((float(lam), mean_r2, std_r2))
        if mean_r2 >= best_score:  # >= so ties prefer larger lambda
            best_lam, best_score = float(lam), mean_r2
    return best_lam, table
