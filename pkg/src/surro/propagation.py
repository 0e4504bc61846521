"""Monte Carlo propagation of input uncertainty through a trained surrogate.

Input variables are independent and either held constant or normally
distributed (sigma given absolutely or as a percentage of the mean). Draws
come from a counter-based Philox stream transformed by the inverse normal
CDF, so the value of sample i depends only on (seed, i): batches of any
size reproduce the same per-sample draws, and with the einsum prediction
path the whole run is bit-identical for any batch size.

Only the posterior mean is pushed through the model: the study quantifies
how input variability moves the outputs, not the surrogate's own epistemic
variance. Moments accumulate in a single pass; per-output predictions are
retained for the Freedman-Diaconis histogram (8 bytes per sample per
output), while batching keeps the much larger input and kernel blocks
bounded.
"""

import json
import logging
import math

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

logger = logging.getLogger(__name__)

# Uniform draw slots consumed per sample row: 10 input columns plus 2 pad
# slots so every row starts on a Philox counter block (4 doubles/block moves
# -> 12 slots = 3 blocks) and any start index is reachable by advance().
_DRAW_SLOTS = 12

# Fixed folding granularity for the moment accumulator; independent of the
# caller's batch size so the merge sequence (and hence every bit of the
# result) does not depend on batching.
_FOLD_SIZE = 65536

_MAX_HIST_BINS = 512


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"normal law needs sigma > 0, got {self.sigma}")

    @classmethod
    def from_percent(cls, mu: float, sigma_pct: float) -> "Normal":
        return cls(mu, abs(mu) * sigma_pct / 100.0)


@dataclass(frozen=True)
class InputDistributions:
    """Ordered per-column probability laws for the model inputs."""

    names: tuple
    laws: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "laws", tuple(self.laws))
        if len(self.names) != len(self.laws):
            raise ValueError("names and laws must align")
        for law in self.laws:
            if not isinstance(law, (Constant, Normal)):
                raise TypeError(f"unsupported law {type(law)!r}")

    @classmethod
    def from_dict(cls, obj: dict, names=None) -> "InputDistributions":
        """Parse {"t_l": {"normal": {"mu": .., "sigma_pct": ..}},
        "n_ls": {"const": 4}, ...}; column order follows ``names`` when
        given, else the mapping order."""
        names = tuple(names) if names is not None else tuple(obj)
        missing = [n for n in names if n not in obj]
        if missing:
            raise ValueError(f"distribution spec missing variables: {missing}")
        laws = []
        for name in names:
            entry = obj[name]
            if "const" in entry:
                laws.append(Constant(float(entry["const"])))
            elif "normal" in entry:
                params = entry["normal"]
                mu = float(params["mu"])
                if "sigma" in params:
                    laws.append(Normal(mu, float(params["sigma"])))
                elif "sigma_pct" in params:
                    laws.append(Normal.from_percent(mu, float(params["sigma_pct"])))
                else:
                    raise ValueError(f"{name}: normal law needs sigma or sigma_pct")
            else:
                raise ValueError(f"{name}: law must be 'const' or 'normal'")
        return cls(names, tuple(laws))

    @classmethod
    def from_json_file(cls, path, names=None) -> "InputDistributions":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), names)


def sample_inputs(dists: InputDistributions, n_samples: int, seed=0,
                  start_index: int = 0) -> np.ndarray:
    """Draw rows [start_index, start_index + n_samples) of the sample stream.

    Constant columns are exact; normal columns are mu + sigma * ndtri(u).
    Every column consumes its uniform slot even when constant, so the
    stream layout never depends on the law mix.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    d = len(dists.laws)
    if d > _DRAW_SLOTS:
        raise ValueError(f"at most {_DRAW_SLOTS} input columns supported")
    bits = np.random.Philox(key=seed)
    bits.advance(start_index * (_DRAW_SLOTS // 4))
    u = np.random.Generator(bits).random((n_samples, _DRAW_SLOTS))
    # random() yields [0, 1); floor u away from 0 to keep ndtri finite.
    u = np.maximum(u, np.finfo(np.float64).tiny)
    X = np.empty((n_samples, d))
    for j, law in enumerate(dists.laws):
        if isinstance(law, Constant):
            X[:, j] = law.value
        else:
            X[:, j] = law.mu + law.sigma * ndtri(u[:, j])
    return X


class StreamingMoments:
    """Single-pass central-moment accumulator (Welford/Chan style) with an
    exact pairwise merge, tracking enough state for mean, variance,
    skewness and excess kurtosis."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m3 = 0.0
        self.m4 = 0.0

    def update(self, values):
        """Fold a block of values into the running moments."""
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return
        block = StreamingMoments()
        block.n = values.size
        if np.all(values == values[0]):
            # exact path: a constant block has zero central moments, and
            # summation rounding must not manufacture spurious variance
            block.mean = float(values[0])
        else:
            block.mean = float(values.mean())
            d = values - block.mean
            d2 = d * d
            block.m2 = float(np.sum(d2))
            block.m3 = float(np.sum(d2 * d))
            block.m4 = float(np.sum(d2 * d2))
        self.merge(block)

    def merge(self, other: "StreamingMoments"):
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean = other.n, other.mean
            self.m2, self.m3, self.m4 = other.m2, other.m3, other.m4
            return
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (self.m3 + other.m3
              + delta * d_n ** 2 * na * nb * (na - nb)
              + 3.0 * d_n * (na * other.m2 - nb * self.m2))
        m4 = (self.m4 + other.m4
              + delta * d_n ** 3 * na * nb * (na * na - na * nb + nb * nb)
              + 6.0 * d_n ** 2 * (na * na * other.m2 + nb * nb * self.m2)
              + 4.0 * d_n * (na * other.m3 - nb * self.m3))
        self.n, self.mean = n, self.mean + d_n * nb
        self.m2, self.m3, self.m4 = m2, m3, m4

    @property
    def variance(self) -> float:
        """Sample variance (ddof=1)."""
        if self.n < 2:
            return float("nan")
        return self.m2 / (self.n - 1)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def skewness(self) -> float:
        if self.n < 2 or self.m2 == 0.0:
            return float("nan")
        return math.sqrt(self.n) * self.m3 / self.m2 ** 1.5

    @property
    def excess_kurtosis(self) -> float:
        if self.n < 2 or self.m2 == 0.0:
            return float("nan")
        return self.n * self.m4 / (self.m2 * self.m2) - 3.0


class _FoldingAccumulator:
    """Feeds a StreamingMoments in fixed-size chunks regardless of how the
    incoming batches are sized, so moment bits never depend on batching."""

    def __init__(self, fold_size: int = _FOLD_SIZE):
        self.fold_size = fold_size
        self.moments = StreamingMoments()
        self._buffer = []
        self._buffered = 0

    def push(self, values: np.ndarray):
        self._buffer.append(values)
        self._buffered += values.size
        while self._buffered >= self.fold_size:
            data = np.concatenate(self._buffer)
            self.moments.update(data[:self.fold_size])
            rest = data[self.fold_size:]
            self._buffer = [rest] if rest.size else []
            self._buffered = rest.size

    def finalize(self) -> StreamingMoments:
        if self._buffered:
            self.moments.update(np.concatenate(self._buffer))
            self._buffer, self._buffered = [], 0
        return self.moments


def freedman_diaconis_histogram(values: np.ndarray):
    """(edges, counts) with the Freedman-Diaconis bin width
    2*IQR/n^(1/3), capped at 512 bins; degenerate data gets one bin."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        edges = np.array([lo - 0.5, hi + 0.5])
        return edges, np.array([values.size])
    q25, q75 = np.quantile(values, [0.25, 0.75])
    width = 2.0 * (q75 - q25) / values.size ** (1.0 / 3.0)
    if width <= 0.0:
        n_bins = _MAX_HIST_BINS
    else:
        n_bins = int(np.clip(math.ceil((hi - lo) / width), 1, _MAX_HIST_BINS))
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return edges, counts


@dataclass(frozen=True)
class PropagationResult:
    output_name: str
    n_samples: int
    mean: float
    std: float
    std_pct_of_mean: float
    skewness: float
    excess_kurtosis: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray


def propagate(model, dists: InputDistributions, n_samples: int = 100_000,
              seed=0, batch_size: int = 16_384):
    """Push input draws through the surrogate's posterior mean.

    Returns one PropagationResult per model output. For a fixed seed the
    result is bit-identical for every batch_size.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if tuple(model.input_names) != tuple(dists.names):
        raise ValueError(
            "schema mismatch: model inputs "
            f"{list(model.input_names)} vs distribution spec {list(dists.names)}")

    n_out = len(model.output_names)
    accumulators = [_FoldingAccumulator() for _ in range(n_out)]
    retained = [[] for _ in range(n_out)]
    for start in range(0, n_samples, batch_size):
        count = min(batch_size, n_samples - start)
        X = sample_inputs(dists, count, seed, start_index=start)
        mean = model.predict_mean(X)
        for j in range(n_out):
            accumulators[j].push(mean[:, j])
            retained[j].append(mean[:, j])

    results = []
    for j, name in enumerate(model.output_names):
        moments = accumulators[j].finalize()
        values = np.concatenate(retained[j])
        edges, counts = freedman_diaconis_histogram(values)
        std = moments.std if n_samples > 1 else 0.0
        pct = 100.0 * std / abs(moments.mean) if moments.mean != 0.0 else float("nan")
        results.append(PropagationResult(
            name, n_samples, moments.mean, std, pct, moments.skewness,
            moments.excess_kurtosis, edges, counts))
    logger.info("propagated %d samples through %d outputs", n_samples, n_out)
    return results
