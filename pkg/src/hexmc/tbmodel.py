"""Tight-binding models and Bloch-operator assembly on defected supercells.

Models are described by displacement-indexed coupling tables: an entry
``(di, dj, src_basis, src_orb, dst_basis, dst_orb, amp)`` couples an orbital
to one in the cell shifted by ``di*a1 + dj*a2``.  On small supercells a pair
of sites can interact through several periodic images; every image within
coupling range enters the Bloch sum with its own phase, which is automatic
in this representation (one instance per table entry per source site).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .lattice import LatticeSpec, Supercell, honeycomb

__all__ = [
    "GrapheneNNModel",
    "MultiOrbitalModel",
    "BlochOperatorPair",
    "CompiledCell",
    "ConfiguredOperator",
    "compile_cell",
    "assemble_bloch",
    "hermiticity_check",
    "load_coupling_table",
]

#: eV parameters of the nearest-neighbor pi-band model.
GRAPHENE_EPS_2P = 0.0
GRAPHENE_T = -3.033
GRAPHENE_S = 0.129

MAX_COUPLING_RANGE = 3


@dataclass(frozen=True)
class GrapheneNNModel:
    """Nearest-neighbor two-band model: hopping t, overlap s, on-site eps_2p."""

    eps_2p: float = GRAPHENE_EPS_2P
    t: float = GRAPHENE_T
    s: float = GRAPHENE_S

    def __post_init__(self):
        # the fundamental-cell overlap matrix has eigenvalues 1 +- |s w(k)|,
        # w in [0, 3]; positive definiteness needs |3 s| < 1
        if abs(3.0 * self.s) >= 1.0:
            raise ValueError(f"overlap parameter s={self.s} makes S(k) singular")

    def key(self):
        return ("graphene", self.eps_2p, self.t, self.s)

    def lattice_spec(self) -> LatticeSpec:
        return honeycomb()

    @property
    def overlap_is_identity(self) -> bool:
        return False

    # A (basis 0) couples to the B sites (basis 1) of its own cell and of
    # the two cells behind it along a1 and a2.
    _NEIGHBOR_CELLS = ((0, 0), (-1, 0), (0, -1))

    def hop_entries(self):
        fwd = [(di, dj, 0, 0, 1, 0, complex(self.t)) for di, dj in self._NEIGHBOR_CELLS]
        bwd = [(-di, -dj, 1, 0, 0, 0, complex(self.t)) for di, dj in self._NEIGHBOR_CELLS]
        return tuple(fwd + bwd)

    def overlap_entries(self):
        fwd = [(di, dj, 0, 0, 1, 0, complex(self.s)) for di, dj in self._NEIGHBOR_CELLS]
        bwd = [(-di, -dj, 1, 0, 0, 0, complex(self.s)) for di, dj in self._NEIGHBOR_CELLS]
        return tuple(fwd + bwd)

    def onsite_energies(self):
        return ((0, 0, self.eps_2p), (1, 0, self.eps_2p))


def _check_hermitian_closure(entries, what: str):
    sums: dict[tuple, complex] = {}
    for di, dj, bs, os_, bd, od, amp in entries:
        key = (di, dj, bs, os_, bd, od)
        sums[key] = sums.get(key, 0.0) + complex(amp)
    for (di, dj, bs, os_, bd, od), amp in sums.items():
        mirror = sums.get((-di, -dj, bd, od, bs, os_))
        if mirror is None or abs(np.conj(mirror) - amp) > 1e-12 * max(1.0, abs(amp)):
            raise ValueError(
                f"{what} table not closed under Hermitian conjugation at "
                f"displacement ({di},{dj}) basis {bs}/{os_} -> {bd}/{od}"
            )


@dataclass(frozen=True)
class MultiOrbitalModel:
    """Honeycomb model with per-role orbital blocks loaded from a table.

    ``orbitals`` maps roles to orbital counts; ``onsite`` holds
    ``(basis_index, orbital, energy)``; ``hops`` and ``overlap``
    (``None`` = identity) hold displacement-indexed coupling entries.
    ``removable`` names the roles whose sites vacancies may remove.
    """

    orbitals: tuple[tuple[str, int], ...]
    onsite: tuple[tuple[int, int, float], ...]
    hops: tuple[tuple[int, int, int, int, int, int, complex], ...]
    overlap: tuple[tuple[int, int, int, int, int, int, complex], ...] | None = None
    removable: tuple[str, ...] = ("B",)
    label: str = "table"

    def __post_init__(self):
        counts = dict(self.orbitals)
        for entries, what in ((self.hops, "hopping"), (self.overlap or (), "overlap")):
            for di, dj, bs, os_, bd, od, amp in entries:
                if max(abs(di), abs(dj)) > MAX_COUPLING_RANGE:
                    raise ValueError(
                        f"{what} displacement ({di},{dj}) beyond third neighbors"
                    )
                if (di, dj) == (0, 0) and (bs, os_) == (bd, od):
                    raise ValueError(f"{what} entry duplicates an on-site term")
            _check_hermitian_closure(entries, what)
        roles = [r for r, _ in self.orbitals]
        for b, o, _ in self.onsite:
            if not 0 <= b < len(roles) or not 0 <= o < counts[roles[b]]:
                raise ValueError(f"on-site term for unknown orbital ({b},{o})")

    def key(self):
        return ("multiorbital", self.orbitals, self.onsite, self.hops, self.overlap, self.removable)

    def lattice_spec(self) -> LatticeSpec:
        return honeycomb(orbitals=self.orbitals, removable_roles=self.removable)

    @property
    def overlap_is_identity(self) -> bool:
        return self.overlap is None

    def hop_entries(self):
        return self.hops

    def overlap_entries(self):
        return self.overlap

    def onsite_energies(self):
        return self.onsite


@dataclass(frozen=True, eq=False)
class BlochOperatorPair:
    """Hermitian H(k), S(k) for one k-point, after vacancy removal.

    ``dof_index[row]`` is the (site, orbital) pair the row corresponds to.
    """

    k: tuple[float, float]
    H: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    dof_index: tuple[tuple[int, int], ...] = field(repr=False)


class CompiledCell:
    """Coupling instances of a model expanded on one supercell.

    Built once per (model, supercell) and reused across defect
    configurations and k-points: per-instance source/target orbital
    indices, complex amplitudes and true Cartesian displacements.
    """

    def __init__(self, model, supercell: Supercell):
        self.model = model
        self.supercell = supercell
        counts = supercell.orbital_counts()
        self.site_offset = np.concatenate(([0], np.cumsum(counts)))
        self.dim = int(self.site_offset[-1])
        self.dof_site = np.repeat(np.arange(supercell.nsites), counts)
        self.dof_orb = np.concatenate([np.arange(c) for c in counts]) if self.dim else np.zeros(0, dtype=np.int64)

        self.onsite = np.zeros(self.dim)
        for b, o, e in model.onsite_energies():
            for s in np.flatnonzero(supercell.basis_index == b):
                self.onsite[self.site_offset[s] + o] = e

        self.h_src, self.h_dst, self.h_amp, self.h_disp = self._expand(model.hop_entries())
        ov = model.overlap_entries()
        if ov is None:
            self.s_src = self.s_dst = self.s_amp = self.s_disp = None
        else:
            self.s_src, self.s_dst, self.s_amp, self.s_disp = self._expand(ov)

        self.unit_dofs = tuple(
            np.concatenate(
                [np.arange(self.site_offset[s], self.site_offset[s + 1]) for s in group]
            )
            for group in supercell.removable_units
        )

    def _expand(self, entries):
        sc = self.supercell
        spec = sc.spec
        a = np.array([spec.a1, spec.a2])
        frac = np.array([site[0] for site in spec.basis])
        src, dst, amp, disp = [], [], [], []
        by_basis: dict[int, list] = {}
        for e in entries:
            by_basis.setdefault(e[2], []).append(e)
        for s in range(sc.nsites):
            b = int(sc.basis_index[s])
            i, j = (int(v) for v in sc.cells[s])
            for di, dj, _, os_, bd, od, amp_e in by_basis.get(b, ()):
                sd = sc.site_index(i + di, j + dj, bd)
                src.append(self.site_offset[s] + os_)
                dst.append(self.site_offset[sd] + od)
                amp.append(amp_e)
                disp.append((np.array([di, dj]) + frac[bd] - frac[b]) @ a)
        return (
            np.array(src, dtype=np.int64),
            np.array(dst, dtype=np.int64),
            np.array(amp, dtype=np.complex128),
            np.array(disp, dtype=np.float64).reshape(-1, 2),
        )

    def configure(self, vacant_units=()) -> "ConfiguredOperator":
        return ConfiguredOperator(self, frozenset(vacant_units))


class ConfiguredOperator:
    """A compiled cell with one vacancy outcome applied; assembles per k."""

    def __init__(self, cell: CompiledCell, vacant: frozenset):
        self.cell = cell
        self.vacant = vacant
        keep = np.ones(cell.dim, dtype=bool)
        for u in vacant:
            keep[cell.unit_dofs[u]] = False
        self.dim = int(np.count_nonzero(keep))
        if self.dim == 0:
            raise ValueError("empty system: all orbitals removed by vacancies")
        new_index = np.cumsum(keep) - 1
        self.keep = keep
        self.onsite = cell.onsite[keep]
        self.dof_index = tuple(
            (int(s), int(o)) for s, o in zip(cell.dof_site[keep], cell.dof_orb[keep])
        )

        def _filter(src, dst, amp, disp):
            ok = keep[src] & keep[dst]
            return new_index[src[ok]], new_index[dst[ok]], amp[ok], disp[ok]

        self.h = _filter(cell.h_src, cell.h_dst, cell.h_amp, cell.h_disp)
        self.s = None if cell.s_src is None else _filter(
            cell.s_src, cell.s_dst, cell.s_amp, cell.s_disp
        )

    def hamiltonian(self, k: np.ndarray) -> np.ndarray:
        H = np.zeros((self.dim, self.dim), dtype=np.complex128)
        src, dst, amp, disp = self.h
        _kernels.accumulate_couplings(src, dst, amp, disp, k, H)
        H = 0.5 * (H + H.conj().T)
        H[np.diag_indices_from(H)] = self.onsite
        return H

    def overlap(self, k: np.ndarray) -> np.ndarray:
        S = np.zeros((self.dim, self.dim), dtype=np.complex128)
        if self.s is not None:
            src, dst, amp, disp = self.s
            _kernels.accumulate_couplings(src, dst, amp, disp, k, S)
            S = 0.5 * (S + S.conj().T)
        S[np.diag_indices_from(S)] = 1.0
        return S


def compile_cell(model, supercell: Supercell) -> CompiledCell:
    return CompiledCell(model, supercell)


def assemble_bloch(model, supercell: Supercell, defects, k) -> BlochOperatorPair:
    """Assemble H(k), S(k) with the rows/columns of vacant units removed.

    ``defects`` is a DefectConfiguration on the same supercell (or None for
    the unperturbed operator).
    """
    k = np.asarray(k, dtype=float)
    if k.shape != (2,) or not np.all(np.isfinite(k)):
        raise ValueError(f"k must be a finite 2-vector, got {k!r}")
    vacant = () if defects is None else defects.vacant
    op = compile_cell(model, supercell).configure(vacant)
    return BlochOperatorPair(
        k=(float(k[0]), float(k[1])),
        H=op.hamiltonian(k),
        S=op.overlap(k),
        dof_index=op.dof_index,
    )


def hermiticity_check(pair: BlochOperatorPair) -> float:
    """Largest entrywise deviation |H - H^dagger|; diagnostic for tests."""
    return float(np.max(np.abs(pair.H - pair.H.conj().T))) if pair.H.size else 0.0


# ---------------------------------------------------------------------------
# Coupling-table file format
#
# Line-oriented text, '#' starts a comment.  First non-comment line must be
# the version header "tbcoupling v1".  Directives:
#
#   orbitals <role> <count>
#   removable <role> [<role> ...]
#   onsite <role> <orb> <energy_eV>
#   overlap identity
#   coupling <di> <dj> <src_role> <src_orb> <dst_role> <dst_orb> <re> <im>
#   overlap_coupling <di> <dj> <src_role> <src_orb> <dst_role> <dst_orb> <re> <im>
#
# Roles must be A or B (honeycomb).  The coupling list must be closed under
# Hermitian conjugation; both directions are written explicitly.
# ---------------------------------------------------------------------------

_ROLE_TO_BASIS = {"A": 0, "B": 1}


def load_coupling_table(path) -> MultiOrbitalModel:
    """Parse a versioned coupling-table file into a MultiOrbitalModel."""
    orbitals: dict[str, int] = {}
    onsite = []
    hops = []
    overlap_entries = []
    overlap_identity = False
    removable = None
    header_seen = False

    def fail(lineno, msg):
        raise ValueError(f"{path}:{lineno}: {msg}")

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if not header_seen:
                if line != "tbcoupling v1":
                    fail(lineno, f"expected header 'tbcoupling v1', got {line!r}")
                header_seen = True
                continue
            tok = line.split()
            kind = tok[0]
            try:
                if kind == "orbitals":
                    role, count = tok[1], int(tok[2])
                    orbitals[role] = count
                elif kind == "removable":
                    removable = tuple(tok[1:])
                elif kind == "onsite":
                    role, orb, e = tok[1], int(tok[2]), float(tok[3])
                    onsite.append((_ROLE_TO_BASIS[role], orb, e))
                elif kind == "overlap":
                    if tok[1] != "identity":
                        fail(lineno, "only 'overlap identity' is supported here")
                    overlap_identity = True
                elif kind in ("coupling", "overlap_coupling"):
                    di, dj = int(tok[1]), int(tok[2])
                    bs, os_ = _ROLE_TO_BASIS[tok[3]], int(tok[4])
                    bd, od = _ROLE_TO_BASIS[tok[5]], int(tok[6])
                    amp = complex(float(tok[7]), float(tok[8]))
                    entry = (di, dj, bs, os_, bd, od, amp)
                    (hops if kind == "coupling" else overlap_entries).append(entry)
                else:
                    fail(lineno, f"unknown directive {kind!r}")
            except (IndexError, KeyError, ValueError) as exc:
                if isinstance(exc, ValueError) and str(exc).startswith(str(path)):
                    raise
                fail(lineno, f"malformed {kind!r} line: {exc}")
    if not header_seen:
        raise ValueError(f"{path}: empty coupling table")
    if set(orbitals) != {"A", "B"}:
        raise ValueError(f"{path}: orbital counts must be given for roles A and B")
    if overlap_entries and overlap_identity:
        raise ValueError(f"{path}: both 'overlap identity' and overlap couplings given")
    return MultiOrbitalModel(
        orbitals=(("A", orbitals["A"]), ("B", orbitals["B"])),
        onsite=tuple(onsite),
        hops=tuple(hops),
        overlap=None if (overlap_identity or not overlap_entries) else tuple(overlap_entries),
        removable=("B",) if removable is None else removable,
        label=str(path),
    )
