"""Tabular DOE data: CSV ingestion, cleaning, splitting and Z-score standardization.

The canonical schema has ten input columns (layer count, layer thickness,
punch velocity, three process temperatures and four fiber orientations) and
four crash-response columns (peak load, crush load efficiency, specific
energy absorption and node intrusion).
"""

import csv
import logging
import math
import os

from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

INPUT_COLUMNS = ("n_ls", "t_l", "v_p", "T_i", "T_pd", "T_air",
                 "phi1", "phi2", "phi3", "phi4")
OUTPUT_COLUMNS = ("F_p", "CLE", "SEA", "dY_node")


def _frozen_array(values, ndim):
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable paired (inputs, outputs) table.

    ``dropped_rows`` counts malformed or non-finite rows discarded at
    ingestion; it is carried along so reports can surface it.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    input_names: tuple = INPUT_COLUMNS
    output_names: tuple = OUTPUT_COLUMNS
    dropped_rows: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inputs", _frozen_array(self.inputs, 2))
        object.__setattr__(self, "outputs", _frozen_array(self.outputs, 2))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "output_names", tuple(self.output_names))
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError("inputs and outputs must have equal row counts")
        if self.inputs.shape[1] != len(self.input_names):
            raise ValueError("input column count does not match input_names")
        if self.outputs.shape[1] != len(self.output_names):
            raise ValueError("output column count does not match output_names")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def column(self, name: str) -> np.ndarray:
        """Return one named column, searching outputs first, then inputs."""
        if name in self.output_names:
            return self.outputs[:, self.output_names.index(name)]
        if name in self.input_names:
            return self.inputs[:, self.input_names.index(name)]
        raise KeyError(f"column not found: {name!r}")

    def take(self, indices) -> "Dataset":
        """New Dataset holding the given rows (in the given order)."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.inputs[idx], self.outputs[idx],
                       self.input_names, self.output_names, self.dropped_rows)


def _read_columns(path, columns):
    """Read the named columns from a CSV file.

    Returns (matrix, dropped) where dropped counts rows that failed to parse
    or contained non-finite values. Extra columns in the file are ignored;
    missing ones are a header mismatch.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lstrip("﻿") for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, no header row") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise ValueError(
                f"{path}: header mismatch, missing columns {missing} "
                f"(found {header})")
        pick = [header.index(c) for c in columns]
        rows = []
        dropped = 0
        for raw in reader:
            if not raw or all(not cell.strip() for cell in raw):
                continue
            try:
                vals = [float(raw[i]) for i in pick]
            except (ValueError, IndexError):
                dropped += 1
                continue
            if not all(math.isfinite(v) for v in vals):
                dropped += 1
                continue
            rows.append(vals)
    matrix = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    return matrix, dropped


def load_dataset(path, input_columns=INPUT_COLUMNS,
                 output_columns=OUTPUT_COLUMNS) -> Dataset:
    """Load a Dataset from a CSV file with one header row.

    Rows with unparseable or non-finite entries are dropped and counted on
    the returned Dataset. Raises if the file is missing, the header lacks a
    schema column, or fewer than 2 valid rows remain.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset file not found: {path}")
    columns = tuple(input_columns) + tuple(output_columns)
    matrix, dropped = _read_columns(path, columns)
    if matrix.shape[0] < 2:
        raise ValueError(f"{path}: fewer than 2 valid rows "
                         f"({matrix.shape[0]} valid, {dropped} dropped)")
    if dropped:
        logger.info("%s: dropped %d malformed rows", path, dropped)
    d_in = len(input_columns)
    return Dataset(matrix[:, :d_in], matrix[:, d_in:],
                   tuple(input_columns), tuple(output_columns), dropped)


def read_input_matrix(path, input_columns=INPUT_COLUMNS):
    """Read an inputs-only CSV (e.g. a DOE file or new prediction points).

    Returns (matrix, dropped_row_count).
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    matrix, dropped = _read_columns(path, tuple(input_columns))
    if dropped:
        logger.warning("%s: dropped %d malformed rows", path, dropped)
    return matrix, dropped


def filter_outliers(d: Dataset, column: str, upper_quantile: float):
    """Drop rows whose ``column`` value exceeds the empirical upper quantile.

    Returns (filtered_dataset, removed_count). Values equal to the quantile
    are kept, so a constant column removes nothing.
    """
    if not 0.0 < upper_quantile < 1.0:
        raise ValueError(f"upper_quantile must be in (0, 1), got {upper_quantile}")
    values = d.column(column)  # raises KeyError if absent
    threshold = float(np.quantile(values, upper_quantile))
    keep = np.flatnonzero(values <= threshold)
    removed = d.n - keep.size
    if removed:
        logger.info("filter_outliers(%s, q=%g): removed %d of %d rows",
                    column, upper_quantile, removed, d.n)
    return d.take(keep), removed


def train_test_split(d: Dataset, test_fraction: float, seed: int):
    """Disjoint, exhaustive split with ceil(n*(1-f)) training rows.

    The partition is a seeded permutation; row order inside each part
    follows the original file order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(d.n)
    n_train = math.ceil(d.n * (1.0 - test_fraction))
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return d.take(train_idx), d.take(test_idx)


@dataclass(frozen=True)
class Standardizer:
    """Per-column Z-scoring statistics (sample std, ddof=1)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen_array(self.mean, 1))
        object.__setattr__(self, "std", _frozen_array(self.std, 1))

    def transform(self, m):
        return (np.asarray(m, dtype=float) - self.mean) / self.std

    def inverse_transform(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


def fit_standardizer(m, column_names=None) -> Standardizer:
    """Fit per-column mean/std. Zero-variance columns are an error."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2:
        raise ValueError("standardizer needs a 2-D matrix with at least 2 rows")
    mean = m.mean(axis=0)
    std = m.std(axis=0, ddof=1)
    bad = np.flatnonzero(std <= 0.0)
    if bad.size:
        if column_names is not None:
            names = [column_names[i] for i in bad]
        else:
            names = [f"column {i}" for i in bad]
        raise ValueError(f"zero-variance columns cannot be standardized: {names}")
    return Standardizer(mean, std)


def format_value(x) -> str:
    """Shortest round-trip decimal form, used for all CSV emission."""
    return repr(float(x))


def write_csv(path, header, rows):
    """Write a CSV with deterministic float formatting (repr round-trip)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else format_value(c)
                             for c in row])
