import numpy as np
import pytest
import scipy.linalg

from hexmc import (
    GrapheneNNModel,
    MultiOrbitalModel,
    assemble_bloch,
    build_supercell,
    hermiticity_check,
    load_coupling_table,
)
from hexmc.disorder import DefectConfiguration, SeedSpec, sample_defects
from hexmc.tbmodel import compile_cell

from conftest import SYNTHETIC_TABLE


def pair_eigs(pair):
    return scipy.linalg.eigh(pair.H, pair.S, eigvals_only=True)


def test_gamma_point_matrices(graphene, graphene_cells):
    pair = assemble_bloch(graphene, graphene_cells[1], None, (0.0, 0.0))
    t3 = 3 * graphene.t
    s3 = 3 * graphene.s
    assert np.allclose(pair.H, [[0.0, t3], [t3, 0.0]], atol=1e-12)
    assert np.allclose(pair.S, [[1.0, s3], [s3, 1.0]], atol=1e-12)
    assert t3 == pytest.approx(-9.099)
    assert s3 == pytest.approx(0.387)


def test_k_corner_phase_cancellation(graphene, graphene_cells):
    b1, b2 = graphene.lattice_spec().reciprocal_vectors()
    pair = assemble_bloch(graphene, graphene_cells[1], None, (b1 + 2 * b2) / 3)
    assert np.max(np.abs(pair.H)) < 1e-12
    assert np.allclose(pair_eigs(pair), [graphene.eps_2p, graphene.eps_2p], atol=1e-12)


def test_vacancy_removes_row_and_column(graphene, graphene_cells):
    sc = graphene_cells[2]
    cfg = DefectConfiguration(sc, frozenset({3}))
    pair = assemble_bloch(graphene, sc, cfg, (0.1, -0.2))
    assert pair.H.shape == (7, 7)
    assert len(pair.dof_index) == 7
    assert all(site != 3 for site, _ in pair.dof_index)


def test_empty_system_rejected(graphene, graphene_cells):
    sc = graphene_cells[1]
    cfg = DefectConfiguration(sc, frozenset({0, 1}))
    with pytest.raises(ValueError, match="empty system"):
        assemble_bloch(graphene, sc, cfg, (0.0, 0.0))


def test_nonfinite_k_rejected(graphene, graphene_cells):
    with pytest.raises(ValueError):
        assemble_bloch(graphene, graphene_cells[1], None, (np.nan, 0.0))


def test_hermiticity_assembled_and_corrupted(graphene, graphene_cells):
    pair = assemble_bloch(graphene, graphene_cells[2], None, (0.37, 0.81))
    assert hermiticity_check(pair) <= 1e-12
    bad = pair.H.copy()
    bad[0, 1] += 0.5
    corrupted = type(pair)(k=pair.k, H=bad, S=pair.S, dof_index=pair.dof_index)
    assert hermiticity_check(corrupted) > 0.0


def test_hermiticity_random_defects(graphene):
    sc = build_supercell(graphene.lattice_spec(), 4)
    rng = np.random.default_rng(5)
    for rep in range(100):
        cfg = sample_defects(sc, 0.2, SeedSpec(17, 0, rep))
        if len(cfg.vacant) == sc.nunits:
            continue
        k = rng.normal(size=2) * 4.0
        pair = assemble_bloch(graphene, sc, cfg, k)
        assert hermiticity_check(pair) <= 1e-12
        assert np.max(np.abs(pair.S - pair.S.conj().T)) <= 1e-12


def test_gauge_shift_by_supercell_reciprocal(graphene):
    spec = graphene.lattice_spec()
    b1, b2 = spec.reciprocal_vectors()
    rng = np.random.default_rng(3)
    for n in (1, 2):
        sc = build_supercell(spec, n)
        cfg = sample_defects(sc, 0.3, SeedSpec(9, n, 0))
        if len(cfg.vacant) == sc.nunits:
            cfg = None
        for _ in range(5):
            k = rng.normal(size=2)
            e1 = pair_eigs(assemble_bloch(graphene, sc, cfg, k))
            e2 = pair_eigs(assemble_bloch(graphene, sc, cfg, k + b1 / n))
            e3 = pair_eigs(assemble_bloch(graphene, sc, cfg, k - b2 / n))
            assert np.allclose(e1, e2, atol=1e-9)
            assert np.allclose(e1, e3, atol=1e-9)


def test_conjugation_symmetry(graphene, graphene_cells):
    rng = np.random.default_rng(4)
    sc = graphene_cells[2]
    cfg = sample_defects(sc, 0.25, SeedSpec(13, 1, 1))
    for _ in range(5):
        k = rng.normal(size=2)
        ep = pair_eigs(assemble_bloch(graphene, sc, cfg, k))
        em = pair_eigs(assemble_bloch(graphene, sc, cfg, -k))
        assert np.allclose(ep, em, atol=1e-9)


def test_no_vacancies_reproduces_unperturbed(graphene, graphene_cells):
    sc = graphene_cells[2]
    none = assemble_bloch(graphene, sc, None, (0.7, 0.1))
    empty = assemble_bloch(graphene, sc, DefectConfiguration(sc, frozenset()), (0.7, 0.1))
    assert np.array_equal(none.H, empty.H)
    assert np.array_equal(none.S, empty.S)


def test_overlap_guard():
    with pytest.raises(ValueError, match="singular"):
        GrapheneNNModel(s=0.34)


def test_synthetic_table_loads_and_removes_blocks():
    model = load_coupling_table(SYNTHETIC_TABLE)
    assert dict(model.orbitals) == {"A": 5, "B": 6}
    assert model.overlap_is_identity
    sc = build_supercell(model.lattice_spec(), 2)
    assert sc.nunits == 4  # B sites only
    pair = assemble_bloch(model, sc, None, (0.2, 0.4))
    assert pair.H.shape == (44, 44)
    one = assemble_bloch(model, sc, DefectConfiguration(sc, frozenset({0})), (0.2, 0.4))
    assert one.H.shape == (38, 38)
    assert hermiticity_check(pair) <= 1e-12


def test_dimension_counts_surviving_orbitals():
    model = load_coupling_table(SYNTHETIC_TABLE)
    sc = build_supercell(model.lattice_spec(), 2)
    cell = compile_cell(model, sc)
    counts = sc.orbital_counts()
    units = sc.removable_units
    cfg = DefectConfiguration(sc, frozenset({1, 3}))
    survivors = set(range(sc.nsites)) - {units[u][0] for u in cfg.vacant}
    expected = sum(int(counts[s]) for s in survivors)
    pair = assemble_bloch(model, sc, cfg, (0.0, 0.0))
    assert pair.H.shape[0] == expected == cell.dim - 12


def test_table_rejects_broken_hermiticity(tmp_path):
    path = tmp_path / "bad.tbc"
    path.write_text(
        "tbcoupling v1\n"
        "orbitals A 1\norbitals B 1\n"
        "overlap identity\n"
        "coupling 0 0 A 0 B 0 -1.0 0.0\n"
    )
    with pytest.raises(ValueError, match="Hermitian"):
        load_coupling_table(path)


def test_table_rejects_unknown_directive(tmp_path):
    path = tmp_path / "bad.tbc"
    path.write_text("tbcoupling v1\nhopping 0 0 A 0 B 0 1 0\n")
    with pytest.raises(ValueError, match="unknown directive"):
        load_coupling_table(path)


def test_table_requires_version_header(tmp_path):
    path = tmp_path / "bad.tbc"
    path.write_text("orbitals A 1\n")
    with pytest.raises(ValueError, match="tbcoupling v1"):
        load_coupling_table(path)


def test_model_rejects_long_range():
    with pytest.raises(ValueError, match="third neighbors"):
        MultiOrbitalModel(
            orbitals=(("A", 1), ("B", 1)),
            onsite=(),
            hops=((4, 0, 0, 0, 1, 0, 1.0 + 0j), (-4, 0, 1, 0, 0, 0, 1.0 + 0j)),
        )


def test_model_rejects_onsite_duplicate():
    with pytest.raises(ValueError, match="on-site"):
        MultiOrbitalModel(
            orbitals=(("A", 1), ("B", 1)),
            onsite=(),
            hops=((0, 0, 0, 0, 0, 0, 1.0 + 0j),),
        )
