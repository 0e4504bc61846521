"""Stationary covariance functions with log-hyperparameter derivatives.

Four families over the scaled distance r, where
r^2 = sum_i (x_i - x_i')^2 / l_i^2 (a single l for isotropic kernels, one
l_i per input dimension with automatic relevance determination):

    RBF       sf^2 * exp(-r^2 / 2)
    EXP       sf^2 * exp(-r)
    MATERN32  sf^2 * (1 + sqrt(3) r) * exp(-sqrt(3) r)
    MATERN52  sf^2 * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r)

All hyperparameters are carried in log-space so length-scales, the signal
amplitude sf and the noise level are positive by construction. Distances
are scaled dimension-by-dimension before squaring, which keeps tiny
length-scales from overflowing and makes the isotropic path bit-identical
to ARD with equal scales.
"""

import math

from dataclasses import dataclass

import numpy as np

FAMILIES = ("RBF", "EXP", "MATERN32", "MATERN52")

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    """Covariance family, ARD flag and input dimension."""

    family: str
    ard: bool
    d: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}, "
                             f"expected one of {FAMILIES}")
        if self.d < 1:
            raise ValueError(f"input dimension must be >= 1, got {self.d}")

    @property
    def n_lengthscales(self) -> int:
        return self.d if self.ard else 1

    def to_dict(self) -> dict:
        return {"family": self.family, "ard": self.ard, "d": self.d}

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelSpec":
        return cls(family=obj["family"], ard=bool(obj["ard"]), d=int(obj["d"]))


@dataclass(frozen=True)
class Hyperparameters:
    """Log-space kernel and noise hyperparameters.

    ``log_lengthscales`` holds one value (isotropic) or d values (ARD);
    ``log_sigma_f`` is the log signal amplitude and ``log_sigma_n`` the log
    noise standard deviation.
    """

    log_lengthscales: np.ndarray
    log_sigma_f: float
    log_sigma_n: float

    def __post_init__(self):
        arr = np.atleast_1d(np.array(self.log_lengthscales, dtype=float))
        arr.setflags(write=False)
        object.__setattr__(self, "log_lengthscales", arr)
        object.__setattr__(self, "log_sigma_f", float(self.log_sigma_f))
        object.__setattr__(self, "log_sigma_n", float(self.log_sigma_n))

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def sigma_f(self) -> float:
        return math.exp(self.log_sigma_f)

    @property
    def sigma_n(self) -> float:
        return math.exp(self.log_sigma_n)

    def to_vector(self) -> np.ndarray:
        """Pack as [log_l..., log_sigma_f, log_sigma_n] for optimizers."""
        return np.concatenate([self.log_lengthscales,
                               [self.log_sigma_f, self.log_sigma_n]])

    @classmethod
    def from_vector(cls, vec) -> "Hyperparameters":
        vec = np.asarray(vec, dtype=float)
        if vec.size < 3:
            raise ValueError("hyperparameter vector needs at least 3 entries")
        return cls(vec[:-2], vec[-2], vec[-1])


def _check_inputs(spec, hp, X1, X2):
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X1.shape[1] != spec.d or X2.shape[1] != spec.d:
        raise ValueError(f"input dimension mismatch: kernel is {spec.d}-D, "
                         f"got {X1.shape[1]} and {X2.shape[1]}")
    if hp.log_lengthscales.size != spec.n_lengthscales:
        raise ValueError(f"expected {spec.n_lengthscales} length-scale(s), "
                         f"got {hp.log_lengthscales.size}")
    return X1, X2


def _lengthscale_per_dim(spec, hp) -> np.ndarray:
    ls = hp.lengthscales
    if spec.ard:
        return ls
    # Broadcast the single scale so both paths share one code path
    # (bit-identical isotropic vs equal-scale ARD).
    return np.full(spec.d, ls[0])


def _scaled_sq_dists(X1, X2, ls, per_dim=False):
    """r^2 between all row pairs; optionally the per-dimension terms too.

    Accumulates dimension-by-dimension so memory stays O(m*n) and per-entry
    summation order is fixed regardless of how rows are batched.
    """
    m, n = X1.shape[0], X2.shape[0]
    r2 = np.zeros((m, n))
    dims = [] if per_dim else None
    for i in range(X1.shape[1]):
        diff = (X1[:, i, None] - X2[None, :, i]) / ls[i]
        term = diff * diff
        r2 += term
        if per_dim:
            dims.append(term)
    return (r2, dims) if per_dim else r2


def _family_values(family, sf2, r2):
    """Covariance values from the scaled squared distance matrix."""
    if family == "RBF":
        return sf2 * np.exp(-0.5 * r2)
    r = np.sqrt(r2)
    if family == "EXP":
        return sf2 * np.exp(-r)
    if family == "MATERN32":
        return sf2 * (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
    if family == "MATERN52":
        return sf2 * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)
    raise ValueError(f"unknown kernel family {family!r}")


def kernel_matrix(spec: KernelSpec, hp: Hyperparameters, X1, X2=None) -> np.ndarray:
    """Covariance matrix K[i, j] = k(X1[i], X2[j]); X2 defaults to X1."""
    if X2 is None:
        X2 = X1
    X1, X2 = _check_inputs(spec, hp, X1, X2)
    ls = _lengthscale_per_dim(spec, hp)
    r2 = _scaled_sq_dists(X1, X2, ls)
    return _family_values(spec.family, hp.sigma_f ** 2, r2)


def kernel_eval(spec: KernelSpec, hp: Hyperparameters, x, x2) -> float:
    """Covariance between two single points."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    x2 = np.asarray(x2, dtype=float).reshape(1, -1)
    return float(kernel_matrix(spec, hp, x, x2)[0, 0])


def kernel_diag(spec: KernelSpec, hp: Hyperparameters, m: int) -> np.ndarray:
    """diag(K(X, X)) for any m points: sf^2 exactly for every family."""
    return np.full(m, hp.sigma_f ** 2)


def _gradient_factor(family, sf2, K, r2):
    """Common factor F so that dK/dlog l_i = F * p_i with
    p_i = (x_i - x_i')^2 / l_i^2 (and r^2 = sum_i p_i)."""
    if family == "RBF":
        return K
    r = np.sqrt(r2)
    if family == "EXP":
        return np.divide(K, r, out=np.zeros_like(K), where=r > 0)
    if family == "MATERN32":
        return 3.0 * sf2 * np.exp(-_SQRT3 * r)
    if family == "MATERN52":
        return (5.0 / 3.0) * sf2 * (1.0 + _SQRT5 * r) * np.exp(-_SQRT5 * r)
    raise ValueError(f"unknown kernel family {family!r}")


def kernel_gradients(spec: KernelSpec, hp: Hyperparameters, X) -> list:
    """dK/dtheta for each log-hyperparameter except the noise term.

    Returns one n-by-n matrix per entry of [log_l..., log_sigma_f]. The
    noise gradient 2*sigma_n^2*I is left to the marginal-likelihood code
    since it never touches the kernel itself.

    Closed forms, with p_i = (x_i - x_i')^2 / l_i^2 (so r^2 = sum_i p_i):

        dK/dlog sf   = 2 K                        (all families)
        dK/dlog l_i  = K * p_i                    (RBF)
                     = K * p_i / r                (EXP)
                     = 3 sf^2 exp(-sqrt(3) r) p_i (MATERN32)
                     = 5/3 sf^2 (1 + sqrt(5) r) exp(-sqrt(5) r) p_i (MATERN52)

    For isotropic kernels the single length-scale gradient is the same
    expression with p_i replaced by r^2.
    """
    X, _ = _check_inputs(spec, hp, X, X)
    ls = _lengthscale_per_dim(spec, hp)
    sf2 = hp.sigma_f ** 2
    r2, per_dim = _scaled_sq_dists(X, X, ls, per_dim=True)
    K = _family_values(spec.family, sf2, r2)
    factor = _gradient_factor(spec.family, sf2, K, r2)

    if spec.ard:
        grads = [factor * p for p in per_dim]
    else:
        grads = [factor * r2]
    grads.append(2.0 * K)
    return grads
