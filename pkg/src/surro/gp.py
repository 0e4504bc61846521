"""Exact Gaussian-process regression: jittered Cholesky factorization,
posterior mean/variance, log marginal likelihood with analytic gradients,
and multi-start quasi-Newton hyperparameter training.
"""

import logging
import math

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.linalg.lapack import dpotri
from scipy.optimize import minimize

from .kernels import (Hyperparameters, KernelSpec, _family_values,
                      _gradient_factor, _lengthscale_per_dim, kernel_diag,
                      kernel_gradients, kernel_matrix)

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)

# Jitter ladder, as fractions of mean(diag(K)): 0, then 1e-10 growing
# tenfold up to 1e-2.
_JITTER_START = 1e-10
_JITTER_MAX = 1e-2
_JITTER_GROWTH = 10.0

# Multi-start sampling bounds (natural units, drawn log-uniform).
_LENGTHSCALE_RANGE = (1e-2, 1e2)
_SIGMA_F_RANGE = (1e-1, 1e1)
_SIGMA_N_RANGE = (1e-4, 1.0)

# Hard optimizer box in log-space; wide enough to be inert for any sane
# problem, present only to keep exp() finite.
_LOG_BOUND = 20.0

_FAILED_OBJECTIVE = 1e25


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Covariance matrix could not be factorized at any jitter level."""


def cholesky_with_jitter(K, sigma_n2: float, validate: bool = True):
    """Lower Cholesky factor of K + sigma_n2*I, escalating diagonal jitter.

    Tries jitter 0 first, then mean(diag(K)) scaled by 1e-10, 1e-9, ...,
    1e-2, returning the first factor that succeeds as (L, jitter_used).
    ``validate=False`` skips the finiteness/symmetry checks for callers that
    construct K themselves (the training loop).
    """
    K = np.asarray(K, dtype=float)
    if validate:
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"K must be square, got shape {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValueError("K contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(K))))
        if not np.allclose(K, K.T, rtol=0.0, atol=1e-10 * scale):
            raise ValueError("K is not symmetric within 1e-10")

    n = K.shape[0]
    base = float(np.trace(K)) / n
    jitters = [0.0]
    level = _JITTER_START
    while level <= _JITTER_MAX * (1.0 + 1e-12):
        jitters.append(level * base)
        level *= _JITTER_GROWTH
    eye = np.eye(n)
    for jitter in jitters:
        try:
            L = cholesky(K + (sigma_n2 + jitter) * eye, lower=True)
            if jitter > 0.0:
                logger.debug("cholesky succeeded with jitter %.3e", jitter)
            return L, jitter
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(
        "matrix not positive definite: factorization failed at every jitter "
        f"level (tried {[f'{j:.3e}' for j in jitters]})")


def log_marginal_likelihood(spec: KernelSpec, hp: Hyperparameters, X, y):
    """Value and gradient of the log marginal likelihood.

    value = -1/2 y^T (K + sn^2 I)^-1 y - 1/2 log|K + sn^2 I| - n/2 log(2 pi),
    computed through the (jittered) Cholesky factor. The gradient follows the
    trace identity 1/2 tr((alpha alpha^T - K^-1) dK/dtheta) and is ordered as
    [log_l..., log_sigma_f, log_sigma_n].
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y row counts differ")
    n = y.size

    K = kernel_matrix(spec, hp, X)
    L, _ = cholesky_with_jitter(K, hp.sigma_n ** 2)
    alpha = cho_solve((L, True), y)
    value = (-0.5 * float(y @ alpha)
             - float(np.sum(np.log(np.diag(L))))
             - 0.5 * n * _LOG_2PI)

    K_inv = cho_solve((L, True), np.eye(n))
    inner = np.outer(alpha, alpha) - K_inv
    grad = [0.5 * float(np.sum(inner * G))
            for G in kernel_gradients(spec, hp, X)]
    grad.append(hp.sigma_n ** 2 * float(np.trace(inner)))
    return value, np.array(grad)


@dataclass(frozen=True)
class Posterior:
    """Predictive mean/variance at a set of points.

    ``n_clamped`` counts variances that came out of the subtraction slightly
    negative and were clamped to zero.
    """

    mean: np.ndarray
    variance: np.ndarray
    n_clamped: int = 0

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def interval95(self):
        """(lower, upper) bounds of the central 95% interval."""
        half = 1.96 * self.std
        return self.mean - half, self.mean + half


@dataclass(frozen=True)
class FittedGP:
    """Trained single-output GP state.

    Stores the standardized training set plus the Cholesky factor ``L`` of
    K + sigma_n^2 I + jitter I and the precomputed solve ``alpha`` so
    prediction needs no further factorizations.
    """

    spec: KernelSpec
    hp: Hyperparameters
    X_train: np.ndarray
    y_train: np.ndarray
    L: np.ndarray
    alpha: np.ndarray
    jitter_used: float
    lml: float

    def predict(self, X_new, include_noise: bool = False) -> Posterior:
        """Posterior mean and (diagonal) variance at the new points.

        Variance is the latent-function variance; the fitted noise variance
        is added only when ``include_noise`` is set.
        """
        X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
        Ks = kernel_matrix(self.spec, self.hp, self.X_train, X_new)  # (n, m)
        mean = Ks.T @ self.alpha
        v = solve_triangular(self.L, Ks, lower=True)
        var = kernel_diag(self.spec, self.hp, X_new.shape[0]) - np.einsum(
            "ij,ij->j", v, v)
        n_clamped = int(np.count_nonzero(var < 0.0))
        if n_clamped:
            logger.debug("clamped %d negative predictive variances", n_clamped)
            var = np.maximum(var, 0.0)
        if include_noise:
            var = var + self.hp.sigma_n ** 2
        return Posterior(mean, var, n_clamped)

    def predict_mean(self, X_new) -> np.ndarray:
        """Posterior mean only, on a reduction path whose per-row result is
        independent of how the query rows are batched (einsum, no BLAS)."""
        X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
        Ks = kernel_matrix(self.spec, self.hp, X_new, self.X_train)  # (m, n)
        return np.einsum("mn,n->m", Ks, self.alpha)

    def verify(self, rtol: float = 1e-8):
        """Check the stored factorization against its defining identities."""
        K = kernel_matrix(self.spec, self.hp, self.X_train)
        A = K + (self.hp.sigma_n ** 2 + self.jitter_used) * np.eye(K.shape[0])
        recon = self.L @ self.L.T
        err = np.linalg.norm(recon - A) / max(np.linalg.norm(A), 1e-300)
        if err > rtol:
            raise ValueError(f"Cholesky reconstruction error {err:.3e} > {rtol}")
        resid = np.linalg.norm(A @ self.alpha - self.y_train)
        bound = rtol * max(np.linalg.norm(self.y_train), 1e-300)
        if resid > bound:
            raise ValueError(f"alpha residual {resid:.3e} exceeds {bound:.3e}")


def make_fitted(spec: KernelSpec, hp: Hyperparameters, X, y,
                lml: float = math.nan) -> FittedGP:
    """Build the FittedGP state (factorization + solves) at fixed
    hyperparameters."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    K = kernel_matrix(spec, hp, X)
    L, jitter = cholesky_with_jitter(K, hp.sigma_n ** 2)
    alpha = cho_solve((L, True), y)
    return FittedGP(spec, hp, X.copy(), y.copy(), L, alpha, jitter, lml)


def _sq_diffs_per_dim(X):
    """Unscaled per-dimension squared differences; hyperparameter-free, so
    the training loop computes them once per dataset."""
    return [(X[:, i, None] - X[None, :, i]) ** 2 for i in range(X.shape[1])]


def _lml_fused(spec, hp, sq_diffs, y):
    """Value/gradient of the marginal likelihood from precomputed squared
    differences. Same math as log_marginal_likelihood, restructured so no
    per-hyperparameter gradient matrix is materialized; this is the
    optimizer's hot path.
    """
    n = y.size
    ls = _lengthscale_per_dim(spec, hp)
    inv_l2 = 1.0 / (ls * ls)
    r2 = np.zeros((n, n))
    for i in range(len(sq_diffs)):
        r2 += sq_diffs[i] * inv_l2[i]
    sf2 = hp.sigma_f ** 2
    K = _family_values(spec.family, sf2, r2)
    L, _ = cholesky_with_jitter(K, hp.sigma_n ** 2, validate=False)
    alpha = cho_solve((L, True), y)
    value = (-0.5 * float(y @ alpha)
             - float(np.sum(np.log(np.diag(L))))
             - 0.5 * n * _LOG_2PI)

    K_inv, info = dpotri(L, lower=True)
    if info != 0:
        raise NotPositiveDefiniteError(f"dpotri failed with info={info}")
    K_inv = K_inv + np.tril(K_inv, -1).T
    inner = np.outer(alpha, alpha) - K_inv
    weighted = inner * _gradient_factor(spec.family, sf2, K, r2)
    if spec.ard:
        grad_ls = [0.5 * inv_l2[i] * float(np.einsum("ij,ij->", weighted,
                                                     sq_diffs[i]))
                   for i in range(len(sq_diffs))]
    else:
        grad_ls = [0.5 * float(np.einsum("ij,ij->", weighted, r2))]
    grad = grad_ls + [float(np.einsum("ij,ij->", inner, K)),
                      hp.sigma_n ** 2 * float(np.trace(inner))]
    return value, np.array(grad)


def _initial_points(spec: KernelSpec, n_restarts: int, seed) -> list:
    """Canonical start (l = sf = 1, sn = 0.1) plus log-uniform restarts."""
    n_ls = spec.n_lengthscales
    starts = [np.concatenate([np.zeros(n_ls), [0.0, math.log(0.1)]])]
    rng = np.random.default_rng(seed)
    lo = np.concatenate([np.full(n_ls, math.log(_LENGTHSCALE_RANGE[0])),
                         [math.log(_SIGMA_F_RANGE[0]),
                          math.log(_SIGMA_N_RANGE[0])]])
    hi = np.concatenate([np.full(n_ls, math.log(_LENGTHSCALE_RANGE[1])),
                         [math.log(_SIGMA_F_RANGE[1]),
                          math.log(_SIGMA_N_RANGE[1])]])
    for _ in range(n_restarts):
        starts.append(rng.uniform(lo, hi))
    return starts


def fit(spec: KernelSpec, X, y, n_restarts: int = 10, seed=0,
        max_iter: int = 200, grad_tol: float = 1e-6) -> FittedGP:
    """Maximize the log marginal likelihood with L-BFGS-B from multiple
    starting points and return the best FittedGP.

    The caller is expected to pass standardized inputs and targets; the zero
    prior mean is only sensible in that frame. Deterministic for a fixed
    seed: candidates are ranked by (likelihood, then start index).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y row counts differ")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")

    failures = []
    sq_diffs = _sq_diffs_per_dim(X)

    def objective(theta):
        hp = Hyperparameters.from_vector(theta)
        try:
            value, grad = _lml_fused(spec, hp, sq_diffs, y)
        except NotPositiveDefiniteError as exc:
            failures.append(str(exc))
            return _FAILED_OBJECTIVE, np.zeros_like(theta)
        return -value, -grad

    n_params = spec.n_lengthscales + 2
    bounds = [(-_LOG_BOUND, _LOG_BOUND)] * n_params
    best = None
    for idx, theta0 in enumerate(_initial_points(spec, n_restarts, seed)):
        result = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                          bounds=bounds,
                          options={"maxiter": max_iter, "gtol": grad_tol})
        logger.debug("restart %d: lml=%.6f nit=%d", idx, -result.fun,
                     result.nit)
        if result.fun < _FAILED_OBJECTIVE and (best is None
                                               or result.fun < best[0]):
            best = (result.fun, idx, result.x)
    if best is None:
        raise NotPositiveDefiniteError(
            "every restart failed to factorize the covariance; jitter "
            "history:\n" + "\n".join(failures))
    hp = Hyperparameters.from_vector(best[2])
    return make_fitted(spec, hp, X, y, lml=-best[0])
