"""Vacancy configurations: sampling, restriction, enumeration, dedup.

A configuration is identified by a bitmask over the supercell's removable
units (bit u set = unit u vacant), which doubles as the dedup cache key.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .lattice import PartitionMap, Supercell

__all__ = [
    "DefectConfiguration",
    "SeedSpec",
    "sample_defects",
    "restrict",
    "enumerate_configs",
    "translation_orbits",
    "DedupCache",
]

ENUMERATION_CAP = 24  # default limit on removable units for exhaustive mode


@dataclass(frozen=True, eq=False)
class DefectConfiguration:
    """One outcome of the random vacancies on a given supercell."""

    supercell: Supercell
    vacant: frozenset[int]

    def __post_init__(self):
        if self.vacant and (min(self.vacant) < 0 or max(self.vacant) >= self.supercell.nunits):
            raise ValueError("vacant unit index out of range")

    @property
    def key(self) -> int:
        """Canonical bitmask over removable units."""
        mask = 0
        for u in self.vacant:
            mask |= 1 << u
        return mask

    @classmethod
    def from_key(cls, supercell: Supercell, key: int) -> "DefectConfiguration":
        vacant = frozenset(u for u in range(supercell.nunits) if key >> u & 1)
        return cls(supercell, vacant)

    def __len__(self) -> int:
        return len(self.vacant)


@dataclass(frozen=True)
class SeedSpec:
    """Deterministic stream id: distinct (level, replicate) pairs give
    statistically independent generators for one master seed."""

    master_seed: int
    level: int = 0
    replicate: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.level, self.replicate))
        return np.random.default_rng(seq)


def sample_defects(supercell: Supercell, p_vac: float, seed: SeedSpec) -> DefectConfiguration:
    """Draw each removable unit vacant independently with probability p_vac.

    Unit draws are consumed in canonical unit order, so the outcome is a
    pure function of the SeedSpec.
    """
    if not 0.0 <= p_vac <= 1.0:
        raise ValueError(f"p_vac must be in [0, 1], got {p_vac}")
    draws = seed.generator().random(supercell.nunits)
    vacant = frozenset(int(u) for u in np.flatnonzero(draws < p_vac))
    return DefectConfiguration(supercell, vacant)


def restrict(config: DefectConfiguration, partition: PartitionMap, r: int) -> DefectConfiguration:
    """Restrict a parent outcome to quarter r, re-indexed onto the subcell."""
    if config.supercell is not partition.parent:
        raise ValueError("configuration does not live on the partition's parent")
    if not 1 <= r <= partition.R:
        raise ValueError(f"subdomain label out of range: {r}")
    sub = partition.subcell(r)
    vacant = frozenset(
        int(partition.unit_map[u]) for u in config.vacant if partition.unit_assignment[u] == r
    )
    return DefectConfiguration(sub, vacant)


def enumerate_configs(
    supercell: Supercell, p_vac: float, cap: int = ENUMERATION_CAP
) -> Iterator[tuple[DefectConfiguration, float]]:
    """Yield all 2^N configurations with their binomial probability weights."""
    if not 0.0 <= p_vac <= 1.0:
        raise ValueError(f"p_vac must be in [0, 1], got {p_vac}")
    n = supercell.nunits
    if n > cap:
        raise ValueError(
            f"{n} removable units exceed the enumeration cap of {cap}; "
            "use Monte Carlo sampling instead"
        )
    # p^j (1-p)^(n-j), computed once per vacancy count
    wts = [p_vac**j * (1.0 - p_vac) ** (n - j) for j in range(n + 1)]
    for mask in range(1 << n):
        j = bin(mask).count("1")
        yield DefectConfiguration.from_key(supercell, mask), wts[j]


def _translate_mask(supercell: Supercell, unit_sites, site_units, mask: int, di: int, dj: int) -> int:
    n = supercell.n
    out = 0
    for u in range(supercell.nunits):
        if mask >> u & 1:
            s = unit_sites[u]
            i, j = supercell.cells[s]
            b = supercell.basis_index[s]
            out |= 1 << int(site_units[supercell.site_index(i + di, j + dj, b)])
    return out


def translation_orbits(supercell: Supercell, masks) -> dict[int, int]:
    """Map each mask to a canonical representative of its translation orbit.

    Translating a vacancy pattern by a lattice vector is a relabeling of the
    supercell sites, so all masks in one orbit share the same spectra; used
    by the optional symmetry reduction of exhaustive enumeration.
    """
    unit_sites = [g[0] for g in supercell.removable_units]
    site_units = supercell.unit_of_site()
    canon: dict[int, int] = {}
    for mask in masks:
        if mask in canon:
            continue
        images = [
            _translate_mask(supercell, unit_sites, site_units, mask, di, dj)
            for di in range(supercell.n)
            for dj in range(supercell.n)
        ]
        rep = min(images)
        for img in images:
            canon[img] = rep
    return canon


class DedupCache:
    """Associative store keyed by (supercell id, bitmask).

    Best effort: a hit returns the previously stored per-sample quantity, a
    miss lets the caller compute and insert.  Plain dict semantics; parallel
    runs shard one instance per worker and merge, which still guarantees
    every key is computed at least once.
    """

    def __init__(self):
        self._store: dict = {}
        self.hits = 0
        self.misses = 0

    def lookup(self, key):
        if key in self._store:
            self.hits += 1
            return self._store[key]
        self.misses += 1
        return None

    def insert(self, key, value):
        self._store[key] = value

    def get_or_compute(self, key, compute):
        value = self.lookup(key)
        if value is None:
            value = compute()
            self.insert(key, value)
        return value

    def __len__(self):
        return len(self._store)
