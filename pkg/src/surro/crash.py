"""Crash metrics from solver time-series exports.

Given the contact-force history, the absorbed-energy history and the two
sensor-node displacement histories of one impact run, computes:

  * peak load F_p: maximum of the contact force,
  * average load F_avg: time integral of the force over the duration,
  * crush load efficiency CLE = F_avg / F_p (1 is the theoretical maximum,
    higher means a more stable impact),
  * specific energy absorption SEA = EA / m_total,
  * intrusion dY_node: final displacement of the contact-side sensor node,
    with the contact-minus-far relative value kept as a secondary column.
"""

import json
import logging
import os

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import write_csv

logger = logging.getLogger(__name__)

TIMESERIES_HEADER = ("t_ms", "value")

METRIC_COLUMNS = ("F_p", "CLE", "SEA", "dY_node")
EXTRA_COLUMNS = ("dY_node_rel",)


@dataclass(frozen=True)
class TimeSeries:
    """Sampled signal with strictly increasing times (ms)."""

    t: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if t.ndim != 1 or v.ndim != 1 or t.size != v.size:
            raise ValueError("t and v must be 1-D arrays of equal length")
        if t.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("time series contains non-finite values")
        if not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])


class PeakLoad(NamedTuple):
    value: float
    time: float


class Intrusion(NamedTuple):
    node: float      # contact-side node, final displacement
    relative: float  # contact minus far node at the final time


@dataclass(frozen=True)
class CrashMetrics:
    F_p: float
    F_avg: float
    CLE: float
    SEA: float
    dY_node: float
    dY_node_rel: float

    def row(self) -> tuple:
        return (self.F_p, self.CLE, self.SEA, self.dY_node, self.dY_node_rel)


def peak_load(force: TimeSeries) -> PeakLoad:
    """Maximum force; ties resolve to the earliest time."""
    i = int(np.argmax(force.v))
    return PeakLoad(float(force.v[i]), float(force.t[i]))


def average_load(force: TimeSeries) -> float:
    """Trapezoidal time average of the force over the record."""
    return float(np.trapezoid(force.v, force.t)) / force.duration


def crush_load_efficiency(force: TimeSeries) -> float:
    """F_avg / F_p; requires a positive peak."""
    peak = peak_load(force).value
    if peak <= 0.0:
        raise ValueError(f"crush load efficiency needs a positive peak, got {peak}")
    return average_load(force) / peak


def specific_energy_absorption(energy_absorbed: float, total_mass: float) -> float:
    """EA / m_total (J/kg)."""
    if total_mass <= 0.0:
        raise ValueError(f"total mass must be positive, got {total_mass}")
    if energy_absorbed < 0.0:
        raise ValueError(f"absorbed energy must be >= 0, got {energy_absorbed}")
    return energy_absorbed / total_mass


def intrusion(node_contact: TimeSeries, node_far: TimeSeries) -> Intrusion:
    """Final displacement of the contact node, plus the relative value."""
    contact_end = float(node_contact.v[-1])
    far_end = float(node_far.v[-1])
    return Intrusion(contact_end, contact_end - far_end)


def compute_crash_metrics(force: TimeSeries, energy: TimeSeries,
                          node_contact: TimeSeries, node_far: TimeSeries,
                          mass_kg: float) -> CrashMetrics:
    """All metrics for one run; EA is the final value of the energy trace."""
    fp = peak_load(force).value
    favg = average_load(force)
    cle = crush_load_efficiency(force)
    sea = specific_energy_absorption(float(energy.v[-1]), mass_kg)
    dy = intrusion(node_contact, node_far)
    return CrashMetrics(fp, favg, cle, sea, dy.node, dy.relative)


def read_timeseries_csv(path) -> TimeSeries:
    """Read a two-column "t_ms,value" CSV export."""
    import csv
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if tuple(header) != TIMESERIES_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TIMESERIES_HEADER)}, "
                             f"got {','.join(header)}")
        pairs = [(float(row[0]), float(row[1])) for row in reader if row]
    if not pairs:
        raise ValueError(f"{path}: no samples")
    t, v = zip(*pairs)
    return TimeSeries(np.array(t), np.array(v))


def _run_metrics(base_dir, run_id, entry) -> CrashMetrics:
    def resolve(key):
        p = entry[key]
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    try:
        return compute_crash_metrics(
            force=read_timeseries_csv(resolve("force")),
            energy=read_timeseries_csv(resolve("energy")),
            node_contact=read_timeseries_csv(resolve("displacement_contact")),
            node_far=read_timeseries_csv(resolve("displacement_far")),
            mass_kg=float(entry["mass_kg"]),
        )
    except (KeyError, ValueError, OSError) as exc:
        raise ValueError(f"run {run_id!r}: {exc}") from exc


def extract_batch(manifest_path, out_path, threads=None):
    """Extract metrics for every run in a manifest and write one CSV row each.

    The manifest is a JSON object mapping run-id to file paths (relative to
    the manifest) for force, energy, displacement_contact and
    displacement_far, plus mass_kg. Rows are emitted in manifest order.
    """
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if not isinstance(manifest, dict) or not manifest:
        raise ValueError(f"{manifest_path}: manifest must be a non-empty JSON object")
    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    run_ids = list(manifest)
    with ThreadPoolExecutor(max_workers=threads or os.cpu_count()) as pool:
        results = list(pool.map(
            lambda rid: _run_metrics(base_dir, rid, manifest[rid]), run_ids))
    header = ("run_id",) + METRIC_COLUMNS + EXTRA_COLUMNS
    rows = [(rid,) + m.row() for rid, m in zip(run_ids, results)]
    write_csv(out_path, header, rows)
    logger.info("extracted %d runs -> %s", len(rows), out_path)
    return rows
