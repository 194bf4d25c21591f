import numpy as np
import pytest

from hexmc import GrapheneNNModel, build_supercell

DATA = __import__("pathlib").Path(__file__).resolve().parent.parent / "data"
SYNTHETIC_TABLE = DATA / "synthetic_11band.tbc"


@pytest.fixture(scope="session")
def graphene():
    return GrapheneNNModel()


@pytest.fixture(scope="session")
def graphene_cells(graphene):
    spec = graphene.lattice_spec()
    return {n: build_supercell(spec, n) for n in (1, 2, 4, 8)}


def analytic_graphene_bands(model, k):
    """Two-band closed form: eps = (eps_2p +- t w) / (1 +- s w), w = |phase sum|."""
    spec = model.lattice_spec()
    a1, a2 = np.asarray(spec.a1), np.asarray(spec.a2)
    k = np.asarray(k, dtype=float)
    w = abs(1.0 + np.exp(-1j * k @ a1) + np.exp(-1j * k @ a2))
    lo = (model.eps_2p + model.t * w) / (1.0 + model.s * w)
    hi = (model.eps_2p - model.t * w) / (1.0 - model.s * w)
    return np.sort([lo, hi])


def allocation_instance(seed):
    """A randomized 2-level (V, W, tol) allocation problem.

    The tolerance is normalized so the continuous optimum lands around a
    hundred samples on the larger level, keeping the integer ceiling a
    small correction as in practical runs.
    """
    from hexmc.mlmc import DEFAULT_C_ALPHA

    rng = np.random.default_rng(1000 + seed)
    V = 10.0 ** rng.uniform(-2.0, 0.5, size=2)
    W = 10.0 ** rng.uniform(-1.0, 1.5, size=2)
    theta = rng.uniform(0.3, 0.9)
    m_unit = np.sqrt(V / W) * np.sum(np.sqrt(W * V))
    # put the continuous optimum near 100 samples on the larger level
    tol = DEFAULT_C_ALPHA / theta * np.sqrt(m_unit.max() / 100.0)
    budget = (theta * tol / DEFAULT_C_ALPHA) ** 2
    return V, W, tol, theta, budget


def allocation_brute_force(V, W, budget):
    """Exact minimal-work integer allocation meeting the variance budget."""
    import math

    best = math.inf
    m1 = int(V[0] / budget) + 1
    cap = max(4 * m1, 4000)
    while m1 <= cap:
        rem = budget - V[0] / m1
        if rem > 0:
            m2 = max(1, math.ceil(V[1] / rem - 1e-12))
            while V[0] / m1 + V[1] / m2 > budget:
                m2 += 1
            best = min(best, W[0] * m1 + W[1] * m2)
            # work is increasing in m1 once m2 has bottomed out
            if m2 == 1 and W[0] * (m1 + 1) + W[1] > best:
                break
        m1 += 1
    return best
