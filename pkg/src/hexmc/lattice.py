"""Honeycomb lattice geometry, supercells and the quarter partition.

All values are immutable after construction and safe to share across
parallel workers.  The supercell site order is lexicographic in
(cell_i, cell_j, basis_index), which every other module relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LatticeSpec",
    "Supercell",
    "PartitionMap",
    "honeycomb",
    "build_supercell",
    "partition_quarters",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Primitive cell description: two lattice vectors plus a basis.

    ``basis`` holds ``(frac_coords, role)`` pairs, fractional coordinates in
    the (a1, a2) frame.  ``orbitals_per_site`` maps a role tag to the
    orbital count carried by sites of that role.  ``removable_roles`` lists
    the roles whose sites may be turned into vacancies (``None`` means all
    roles are removable).
    """

    a1: tuple[float, float]
    a2: tuple[float, float]
    basis: tuple[tuple[tuple[float, float], str], ...]
    orbitals_per_site: tuple[tuple[str, int], ...]
    removable_roles: tuple[str, ...] | None = None
    normalized_area: bool = True

    def __post_init__(self):
        if abs(self.cell_det) < 1e-12:
            raise ValueError("primitive vectors a1, a2 are linearly dependent")
        if not self.basis:
            raise ValueError("basis must contain at least one site")
        counts = dict(self.orbitals_per_site)
        for _, role in self.basis:
            if role not in counts:
                raise ValueError(f"no orbital count given for role {role!r}")
            if counts[role] < 0:
                raise ValueError(f"negative orbital count for role {role!r}")
        if self.removable_roles is not None:
            roles = {role for _, role in self.basis}
            unknown = set(self.removable_roles) - roles
            if unknown:
                raise ValueError(f"removable roles {sorted(unknown)} not in basis")

    @property
    def cell_det(self) -> float:
        return self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0]

    @property
    def cell_area(self) -> float:
        """Area of the fundamental cell, |det [a1 a2]|."""
        return abs(self.cell_det)

    @property
    def area_unit(self) -> float:
        """Area divisor for "per unit area" quantities.

        Defaults to the fundamental-cell area itself, so curves come out
        per fundamental cell; an explicit geometry (``normalized_area
        False``) switches to absolute units.
        """
        return self.cell_area if self.normalized_area else 1.0

    def orbitals_of_role(self, role: str) -> int:
        return dict(self.orbitals_per_site)[role]

    def reciprocal_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """b1, b2 with a_i . b_j = 2 pi delta_ij."""
        det = self.cell_det
        b1 = 2.0 * np.pi * np.array([self.a2[1], -self.a2[0]]) / det
        b2 = 2.0 * np.pi * np.array([-self.a1[1], self.a1[0]]) / det
        return b1, b2

    def is_removable(self, role: str) -> bool:
        return self.removable_roles is None or role in self.removable_roles


def honeycomb(
    lattice_constant: float = 1.0,
    orbitals: tuple[tuple[str, int], ...] = (("A", 1), ("B", 1)),
    removable_roles: tuple[str, ...] | None = None,
) -> LatticeSpec:
    """Standard honeycomb cell: A at (0,0), B at (1/3,1/3) in (a1, a2)."""
    half = 0.5 * lattice_constant
    rt3h = 0.5 * np.sqrt(3.0) * lattice_constant
    return LatticeSpec(
        a1=(rt3h, half),
        a2=(rt3h, -half),
        basis=(((0.0, 0.0), "A"), ((1.0 / 3.0, 1.0 / 3.0), "B")),
        orbitals_per_site=orbitals,
        removable_roles=removable_roles,
    )


@dataclass(frozen=True, eq=False)
class Supercell:
    """The fundamental cell extended n-fold along both primitive vectors.

    ``cells[s]`` is the (i, j) offset of site ``s``, ``basis_index[s]`` its
    basis slot, ``positions[s]`` its Cartesian position.  ``removable_units``
    groups the site indices removed together by one vacancy; for the models
    here every unit is a single site.
    """

    spec: LatticeSpec
    n: int
    cells: np.ndarray = field(repr=False)
    basis_index: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    removable_units: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def nsites(self) -> int:
        return len(self.basis_index)

    @property
    def area(self) -> float:
        """Supercell area in "per unit area" units (see LatticeSpec.area_unit)."""
        return self.n * self.n * self.spec.cell_area / self.spec.area_unit

    @property
    def nunits(self) -> int:
        return len(self.removable_units)

    def site_index(self, i: int, j: int, b: int) -> int:
        nb = len(self.spec.basis)
        return (int(i) % self.n * self.n + int(j) % self.n) * nb + b

    def site_roles(self) -> list[str]:
        return [self.spec.basis[b][1] for b in self.basis_index]

    def orbital_counts(self) -> np.ndarray:
        """Orbitals carried by each site, in site order."""
        counts = dict(self.spec.orbitals_per_site)
        return np.array([counts[self.spec.basis[b][1]] for b in self.basis_index])

    def unit_of_site(self) -> np.ndarray:
        """Site index -> removable-unit index, -1 for non-removable sites."""
        out = np.full(self.nsites, -1, dtype=np.int64)
        for u, group in enumerate(self.removable_units):
            for s in group:
                out[s] = u
        return out


def build_supercell(spec: LatticeSpec, n: int) -> Supercell:
    """Construct the n-by-n supercell with deterministic site ordering.

    Sites are ordered lexicographically by (i, j, basis index); positions are
    i*a1 + j*a2 + basis offset.  Removable units are the sites whose role is
    removable, in site order.
    """
    if n < 1:
        raise ValueError(f"supercell factor must be >= 1, got {n}")
    nb = len(spec.basis)
    a = np.array([spec.a1, spec.a2])  # rows a1, a2
    cells = []
    basis_index = []
    for i in range(n):
        for j in range(n):
            for b in range(nb):
                cells.append((i, j))
                basis_index.append(b)
    cells = np.array(cells, dtype=np.int64)
    basis_index = np.array(basis_index, dtype=np.int64)
    frac = np.array([spec.basis[b][0] for b in basis_index])
    positions = (cells + frac) @ a

    units = []
    for s in range(len(basis_index)):
        role = spec.basis[basis_index[s]][1]
        if spec.is_removable(role):
            units.append((s,))
    return Supercell(
        spec=spec,
        n=n,
        cells=cells,
        basis_index=basis_index,
        positions=positions,
        removable_units=tuple(units),
    )


@dataclass(frozen=True, eq=False)
class PartitionMap:
    """Quarter partition of an even supercell into four corner blocks.

    ``assignment[s]`` is the subdomain label in {1..4} of parent site ``s``;
    ``site_map[s]`` its site index inside the corresponding subcell.  The
    same pair of arrays is provided for removable units.
    """

    parent: Supercell
    subcells: tuple[Supercell, Supercell, Supercell, Supercell]
    assignment: np.ndarray = field(repr=False)
    site_map: np.ndarray = field(repr=False)
    unit_assignment: np.ndarray = field(repr=False)
    unit_map: np.ndarray = field(repr=False)

    R = 4

    def subcell(self, r: int) -> Supercell:
        if not 1 <= r <= 4:
            raise ValueError(f"subdomain label out of range: {r}")
        return self.subcells[r - 1]


def partition_quarters(parent: Supercell) -> PartitionMap:
    """Split an even n-by-n supercell into its four (n/2)-corner subcells."""
    n = parent.n
    if n % 2 != 0:
        raise ValueError(f"supercell factor {n} not divisible into quarters")
    h = n // 2
    nb = len(parent.spec.basis)
    sub = build_supercell(parent.spec, h)
    subcells = (sub, sub, sub, sub)

    cells = parent.cells
    bi, bj = cells[:, 0] // h, cells[:, 1] // h
    assignment = (1 + 2 * bi + bj).astype(np.int64)
    # site index inside the corner block, using the subcell's own ordering
    site_map = (
        (cells[:, 0] - bi * h) * h + (cells[:, 1] - bj * h)
    ) * nb + parent.basis_index

    parent_units = parent.unit_of_site()
    sub_units = sub.unit_of_site()
    unit_assignment = np.empty(parent.nunits, dtype=np.int64)
    unit_map = np.empty(parent.nunits, dtype=np.int64)
    for u, group in enumerate(parent.removable_units):
        s = group[0]
        unit_assignment[u] = assignment[s]
        unit_map[u] = sub_units[site_map[s]]
        if unit_map[u] < 0:
            raise AssertionError("removable site mapped to non-removable slot")
        if parent_units[s] != u:
            raise AssertionError("unit table out of order")
    return PartitionMap(
        parent=parent,
        subcells=subcells,
        assignment=assignment,
        site_map=site_map,
        unit_assignment=unit_assignment,
        unit_map=unit_map,
    )
