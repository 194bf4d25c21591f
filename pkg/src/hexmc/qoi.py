"""Integrated density of states per unit area, smoothed, and its derivative.

The sharp indicator of the state count is replaced by the cubic
g(x) = 1/2 - (9/8) x + (5/8) x^3 on (-1, 1), g = 1 below, g = 0 above: the
unique cubic matching the two boundary values and the two vanishing-moment
conditions of the smoothing construction.  Smoothing is applied per sample,
before any averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .spectrum import BandGrid

__all__ = [
    "EnergyGrid",
    "SmoothingSpec",
    "IdosCurve",
    "smoothing_g",
    "idos",
    "idos_sharp",
    "dos_by_differentiation",
]

DEFAULT_DELTA = 0.01  # eV
DEFAULT_ENERGY_POINTS = 4096


@dataclass(frozen=True)
class SmoothingSpec:
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError(f"smoothing width must be positive, got {self.delta}")


@dataclass(frozen=True)
class EnergyGrid:
    """Uniform grid eps_0 < eps_1 < ... covering the computed energy range."""

    lo: float
    hi: float
    npoints: int = DEFAULT_ENERGY_POINTS

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("energy grid needs hi > lo")
        if self.npoints < 2:
            raise ValueError("energy grid needs at least two points")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.npoints - 1)

    @property
    def values(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.npoints)

    @classmethod
    def covering(cls, emin: float, emax: float, delta: float, npoints: int = DEFAULT_ENERGY_POINTS):
        """Grid over [emin - 2 delta, emax + 2 delta]."""
        return cls(emin - 2.0 * delta, emax + 2.0 * delta, npoints)


@dataclass(frozen=True, eq=False)
class IdosCurve:
    grid: EnergyGrid
    values: np.ndarray = field(repr=False)
    area: float = 1.0


def smoothing_g(x):
    """Smoothed step: 1 for x <= -1, 0 for x >= 1, moment-matched cubic between."""
    x = np.asarray(x, dtype=float)
    core = 0.5 + x * (-1.125 + 0.625 * x * x)
    out = np.where(x <= -1.0, 1.0, np.where(x >= 1.0, 0.0, core))
    return out if out.ndim else float(out)


def _counts(bands: BandGrid, grid: EnergyGrid, accumulate, *extra) -> np.ndarray:
    if bands.energies.size == 0:
        raise ValueError("band grid is empty")
    nk, nb = bands.energies.shape
    energies = bands.energies.reshape(-1)
    weights = np.repeat(bands.grid.weights, nb)
    out = np.zeros(grid.npoints)
    accumulate(energies, weights, grid.lo, grid.step, grid.npoints, *extra, out)
    return out


def idos(bands: BandGrid, grid: EnergyGrid, smoothing: SmoothingSpec, area: float) -> IdosCurve:
    """Smoothed integrated density of states per unit area on the energy grid.

    I(eps) = (1/area) sum_k w_k sum_n g((E_n(k) - eps)/delta).
    """
    counts = _counts(bands, grid, _kernels.smoothed_counts, smoothing.delta)
    return IdosCurve(grid=grid, values=counts / area, area=area)


def idos_sharp(bands: BandGrid, grid: EnergyGrid, area: float) -> IdosCurve:
    """Unsmoothed variant (indicator instead of g); monotone, used as oracle."""
    counts = _counts(bands, grid, _kernels.sharp_counts)
    return IdosCurve(grid=grid, values=counts / area, area=area)


def dos_by_differentiation(curve: IdosCurve, de: float) -> np.ndarray:
    """Density of states by central differences with step de.

    ``de`` must be a (positive integer) multiple of the grid step; endpoints
    fall back to one-sided differences.
    """
    step = curve.grid.step
    h = int(round(de / step))
    if h < 1 or abs(h * step - de) > 1e-9 * max(de, step):
        raise ValueError(
            f"differentiation step {de} is not an integer multiple of the grid step {step:.6g}"
        )
    v = curve.values
    m = len(v)
    if m <= 2 * h:
        raise ValueError("energy grid too short for the differentiation step")
    out = np.empty(m)
    out[h:-h or None] = (v[2 * h:] - v[: m - 2 * h]) / (2 * h * step)
    out[:h] = (v[h : 2 * h] - v[:h]) / (h * step)
    out[-h:] = (v[-h:] - v[-2 * h : -h]) / (h * step)
    return out
