"""Brillouin-zone discretization and band computation.

The k-grid lives on the rhombus spanned by the supercell reciprocal vectors
b1/n, b2/n with points at the sub-rhombus corners (i/q, j/q), i, j < q.
The half-open corner convention never double counts a point across periodic
images and makes uniform weights exact, and a grid built this way folds
consistently across supercell sizes whenever n*q is held constant (the
level-coupling identity the control variates rely on).  Full mode appends
the two copies of the grid rotated by +-120 degrees about Gamma.  Because
the rotations map the reciprocal lattice onto itself, the rotated copies
are periodic images of the base grid point for point, so full mode is a
threefold-redundant sampling of the same quadrature rule: it triples the
per-sample cost, matching the three-rhombi accounting of the zone, without
changing any computed curve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .tbmodel import CompiledCell, compile_cell

__all__ = [
    "BzGrid",
    "BandGrid",
    "SolverError",
    "make_bz_grid",
    "solve_bands",
    "estimate_solve_cost",
]


class SolverError(RuntimeError):
    """Eigensolver failure, tagged with the offending k-point."""


@dataclass(frozen=True, eq=False)
class BzGrid:
    n: int
    q: int
    mode: str
    kpoints: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def nk(self) -> int:
        return len(self.weights)


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def make_bz_grid(spec, n: int, q: int, mode: str = "full") -> BzGrid:
    """Uniform q x q corner grid on the supercell BZ rhombus.

    mode "reduced" keeps the single rhombus; mode "full" appends the two
    rotated rhombi, tripling the point count (and the solve cost).
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if n < 1:
        raise ValueError(f"supercell factor must be >= 1, got {n}")
    if mode not in ("reduced", "full"):
        raise ValueError(f"unknown BZ mode {mode!r}")
    b1, b2 = spec.reciprocal_vectors()
    ii, jj = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
    base = (
        ii.reshape(-1, 1) * (b1 / (n * q))[None, :]
        + jj.reshape(-1, 1) * (b2 / (n * q))[None, :]
    )
    if mode == "reduced":
        kpoints = base
    else:
        r1 = _rotation(2.0 * np.pi / 3.0)
        r2 = _rotation(4.0 * np.pi / 3.0)
        kpoints = np.concatenate([base, base @ r1.T, base @ r2.T])
    weights = np.full(len(kpoints), 1.0 / len(kpoints))
    return BzGrid(n=n, q=q, mode=mode, kpoints=kpoints, weights=weights)


@dataclass(frozen=True, eq=False)
class BandGrid:
    """Ascending eigenvalues per k-point; one row per grid point."""

    grid: BzGrid
    energies: np.ndarray = field(repr=False)  # (nk, nbands)
    solve_seconds: float = 0.0

    @property
    def nbands(self) -> int:
        return self.energies.shape[1]


def _eigvals(op, k: np.ndarray) -> np.ndarray:
    H = op.hamiltonian(k)
    if op.cell.model.overlap_is_identity:
        return np.linalg.eigvalsh(H)
    S = op.overlap(k)
    try:
        return scipy.linalg.eigh(
            H, S, eigvals_only=True, driver="gv", check_finite=False
        )
    except scipy.linalg.LinAlgError as exc:
        msg = str(exc)
        if "positive definite" in msg or "leading minor" in msg:
            raise SolverError(
                f"overlap matrix not positive definite at k=({k[0]:.6g}, {k[1]:.6g})"
            ) from exc
        raise SolverError(
            f"eigensolver failed at k=({k[0]:.6g}, {k[1]:.6g}): {msg}"
        ) from exc


def solve_bands(model, supercell, defects, grid: BzGrid, cell: CompiledCell | None = None) -> BandGrid:
    """Ascending generalized eigenvalues for every grid point.

    k-points of one sample are solved sequentially; parallelism belongs at
    the sample level.
    """
    if cell is None:
        cell = compile_cell(model, supercell)
    vacant = () if defects is None else defects.vacant
    op = cell.configure(vacant)
    energies = np.empty((grid.nk, op.dim))
    t0 = time.perf_counter()
    for idx, k in enumerate(grid.kpoints):
        energies[idx] = _eigvals(op, k)
    return BandGrid(grid=grid, energies=energies, solve_seconds=time.perf_counter() - t0)


def estimate_solve_cost(n: int, q: int, orbitals_per_cell: int, mode: str = "full", unit_cost: float = 1.0) -> float:
    """Work model: (n^2 * orbitals)^3 per k-point times the k-point count.

    ``unit_cost`` calibrates the model from one measured solve (seconds for
    the 1-orbital fundamental cell at one k-point).
    """
    nk = q * q * (3 if mode == "full" else 1)
    dim = n * n * orbitals_per_cell
    return unit_cost * nk * float(dim) ** 3
