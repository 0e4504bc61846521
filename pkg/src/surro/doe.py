"""Design-of-experiments sampling over the enclosure design space.

Latin hypercube sampling places exactly one point per stratum in every
continuous dimension; the discrete layer count is stratified onto its
admissible values by proportional allocation, and the fiber layup is drawn
uniformly from the admissible configurations. Also provides the ply
cutout-relief sizing rule used when preparing thermoforming geometry.
"""

import math

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContinuousVariable:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: need lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class DiscreteVariable:
    name: str
    values: tuple

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError(f"{self.name}: empty value set")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class CategoricalGroup:
    """A block of columns chosen together from a fixed set of tuples."""

    names: tuple
    choices: tuple

    def __post_init__(self):
        if len(self.choices) == 0:
            raise ValueError("empty choice set")
        for c in self.choices:
            if len(c) != len(self.names):
                raise ValueError("every choice must cover all group columns")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(
            self, "choices",
            tuple(tuple(float(v) for v in c) for c in self.choices))


@dataclass(frozen=True)
class DesignSpace:
    variables: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def column_names(self) -> tuple:
        names = []
        for var in self.variables:
            if isinstance(var, CategoricalGroup):
                names.extend(var.names)
            else:
                names.append(var.name)
        return tuple(names)


LAYER_COUNTS = (4, 6, 8, 10, 12, 14, 16)
FIBER_LAYUPS = ((0.0, 45.0, -45.0, 90.0), (30.0, -30.0, 60.0, -60.0))


def default_design_space() -> DesignSpace:
    """The battery-enclosure thermoforming design space."""
    return DesignSpace((
        DiscreteVariable("n_ls", LAYER_COUNTS),
        ContinuousVariable("t_l", 0.1, 0.6),      # mm
        ContinuousVariable("v_p", 4.0, 6.5),      # m/s
        ContinuousVariable("T_i", 200.0, 400.0),  # degC
        ContinuousVariable("T_pd", 20.0, 220.0),  # degC
        ContinuousVariable("T_air", 10.0, 30.0),  # degC
        CategoricalGroup(("phi1", "phi2", "phi3", "phi4"), FIBER_LAYUPS),
    ))


def _stratified_uniform(rng, n):
    """One uniform draw per stratum [k/n, (k+1)/n), strata in random order."""
    perm = rng.permutation(n)
    return (perm + rng.random(n)) / n


def lhs_sample(space: DesignSpace, n: int, seed=0) -> np.ndarray:
    """n-by-d Latin hypercube sample over the design space.

    Deterministic for a fixed seed; the random stream is consumed in
    declaration order of the variables.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    columns = []
    for var in space.variables:
        if isinstance(var, ContinuousVariable):
            u = _stratified_uniform(rng, n)
            columns.append(var.lo + u * (var.hi - var.lo))
        elif isinstance(var, DiscreteVariable):
            u = _stratified_uniform(rng, n)
            idx = np.minimum((u * len(var.values)).astype(int),
                             len(var.values) - 1)
            columns.append(np.asarray(var.values)[idx])
        elif isinstance(var, CategoricalGroup):
            idx = rng.integers(len(var.choices), size=n)
            block = np.asarray(var.choices)[idx]
            columns.extend(block[:, j] for j in range(block.shape[1]))
        else:
            raise TypeError(f"unsupported variable spec {type(var)!r}")
    return np.column_stack(columns)


def cutout_length(punch_surface_area: float, sheet_area: float) -> float:
    """Side length c of the square ply cutout, c = sqrt((S_p - A_s) / 4).

    S_p is the punch outer surface area and A_s the composite sheet area,
    both in mm^2; the punch must wrap at least the sheet area.
    """
    if punch_surface_area < sheet_area:
        raise ValueError(
            f"punch surface area ({punch_surface_area}) smaller than sheet "
            f"area ({sheet_area}): negative radicand")
    return math.sqrt((punch_surface_area - sheet_area) / 4.0)
