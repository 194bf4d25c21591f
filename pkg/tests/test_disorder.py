import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexmc import build_supercell, honeycomb, partition_quarters
from hexmc.disorder import (
    DedupCache,
    DefectConfiguration,
    SeedSpec,
    enumerate_configs,
    restrict,
    sample_defects,
    translation_orbits,
)


def test_sampling_extremes(graphene_cells):
    sc = graphene_cells[2]
    assert sample_defects(sc, 0.0, SeedSpec(1, 0, 0)).vacant == frozenset()
    assert sample_defects(sc, 1.0, SeedSpec(1, 0, 0)).vacant == frozenset(range(sc.nunits))


def test_sampling_probability_rejected(graphene_cells):
    with pytest.raises(ValueError):
        sample_defects(graphene_cells[1], 1.5, SeedSpec(1, 0, 0))


def test_sampling_reproducible(graphene_cells):
    sc = graphene_cells[4]
    a = sample_defects(sc, 0.3, SeedSpec(123, 2, 7))
    b = sample_defects(sc, 0.3, SeedSpec(123, 2, 7))
    c = sample_defects(sc, 0.3, SeedSpec(123, 2, 8))
    assert a.vacant == b.vacant
    assert a.key == b.key
    assert a.vacant != c.vacant  # different replicate, different stream


def test_sampling_binomial_moments(graphene):
    sc = build_supercell(graphene.lattice_spec(), 8)
    p = 0.0625
    draws = 10_000
    counts = np.array(
        [len(sample_defects(sc, p, SeedSpec(99, 0, m)).vacant) for m in range(draws)]
    )
    n = sc.nunits
    assert n == 128
    se = math.sqrt(n * p * (1 - p) / draws)
    assert abs(counts.mean() - n * p) <= 3 * se


def test_restrict_trivial_cases(graphene_cells):
    sc = graphene_cells[2]
    part = partition_quarters(sc)
    empty = DefectConfiguration(sc, frozenset())
    full = DefectConfiguration(sc, frozenset(range(sc.nunits)))
    for r in range(1, 5):
        assert restrict(empty, part, r).vacant == frozenset()
        sub = restrict(full, part, r)
        assert sub.vacant == frozenset(range(sub.supercell.nunits))


def test_restrict_label_out_of_range(graphene_cells):
    sc = graphene_cells[2]
    part = partition_quarters(sc)
    with pytest.raises(ValueError):
        restrict(DefectConfiguration(sc, frozenset()), part, 5)


def test_restrict_seven_vacancies_split(graphene):
    # an 8x8 outcome with seven vacancies: the four 4x4 restrictions hold
    # vacancy counts summing to seven
    sc = build_supercell(graphene.lattice_spec(), 8)
    part = partition_quarters(sc)
    cfg = DefectConfiguration(sc, frozenset({0, 17, 40, 63, 77, 101, 127}))
    counts = [len(restrict(cfg, part, r).vacant) for r in range(1, 5)]
    assert sum(counts) == 7


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_restrict_consistency(graphene, seed):
    """Unit u vacant in the parent iff its image is vacant in its quarter."""
    sc = build_supercell(graphene.lattice_spec(), 4)
    part = partition_quarters(sc)
    cfg = sample_defects(sc, 0.4, SeedSpec(seed, 0, 0))
    subs = {r: restrict(cfg, part, r) for r in range(1, 5)}
    for u in range(sc.nunits):
        r = int(part.unit_assignment[u])
        image_vacant = int(part.unit_map[u]) in subs[r].vacant
        assert image_vacant == (u in cfg.vacant)


def test_enumerate_counts_and_weights(graphene_cells):
    sc1 = graphene_cells[1]
    pairs = list(enumerate_configs(sc1, 0.5))
    assert len(pairs) == 4
    assert all(w == pytest.approx(0.25, abs=1e-15) for _, w in pairs)

    sc2 = graphene_cells[2]
    pairs2 = list(enumerate_configs(sc2, 0.3))
    assert len(pairs2) == 256
    assert math.fsum(w for _, w in pairs2) == pytest.approx(1.0, abs=1e-12)
    # expectation of the vacant count is N p exactly
    expect = math.fsum(w * len(c.vacant) for c, w in pairs2)
    assert expect == pytest.approx(sc2.nunits * 0.3, abs=1e-12)


def test_enumerate_multiorbital_b_units():
    spec = honeycomb(orbitals=(("A", 5), ("B", 6)), removable_roles=("B",))
    sc = build_supercell(spec, 2)
    pairs = list(enumerate_configs(sc, 0.05))
    assert len(pairs) == 16
    empty_weight = next(w for c, w in pairs if not c.vacant)
    assert empty_weight == pytest.approx(0.95**4, rel=1e-14)


def test_enumerate_cap(graphene):
    sc = build_supercell(graphene.lattice_spec(), 4)  # 32 units
    with pytest.raises(ValueError, match="sampling"):
        list(enumerate_configs(sc, 0.1))


def test_distributional_consistency(graphene_cells):
    """Restriction of the parent law to a quarter equals the subcell law."""
    sc = graphene_cells[2]
    part = partition_quarters(sc)
    p = 0.35
    for r in range(1, 5):
        dist: dict[int, float] = {}
        for cfg, w in enumerate_configs(sc, p):
            key = restrict(cfg, part, r).key
            dist[key] = dist.get(key, 0.0) + w
        sub = part.subcell(r)
        for cfg, w in enumerate_configs(sub, p):
            assert dist[cfg.key] == pytest.approx(w, abs=1e-12)


def test_translation_orbits_group_structure(graphene_cells):
    sc = graphene_cells[2]
    masks = [c.key for c, _ in enumerate_configs(sc, 0.5)]
    canon = translation_orbits(sc, masks)
    assert set(canon) == set(masks)
    # orbit sizes divide the translation-group order n^2 = 4
    from collections import Counter

    orbit_sizes = Counter(canon.values())
    assert all(4 % size == 0 for size in orbit_sizes.values())
    # canonical representative is idempotent and preserves the vacancy count
    for mask, rep in canon.items():
        assert canon[rep] == rep
        assert bin(mask).count("1") == bin(rep).count("1")


def test_dedup_cache_counts():
    cache = DedupCache()
    calls = []

    def compute(key):
        calls.append(key)
        return key * 2

    assert cache.get_or_compute(5, lambda: compute(5)) == 10
    assert cache.get_or_compute(5, lambda: compute(5)) == 10
    assert cache.get_or_compute(7, lambda: compute(7)) == 14
    assert calls == [5, 7]
    assert cache.hits == 1
    assert cache.misses == 2
    assert len(cache) == 2


def test_defect_configuration_key_roundtrip(graphene_cells):
    sc = graphene_cells[2]
    cfg = DefectConfiguration(sc, frozenset({0, 3, 7}))
    again = DefectConfiguration.from_key(sc, cfg.key)
    assert again.vacant == cfg.vacant
    with pytest.raises(ValueError):
        DefectConfiguration(sc, frozenset({99}))
