import os
import subprocess
import sys

import numpy as np
import pytest

from hexmc import _kernels


def _random_assembly(seed, dim=12, entries=60):
    rng = np.random.default_rng(seed)
    src = rng.integers(0, dim, size=entries)
    dst = rng.integers(0, dim, size=entries)
    amps = rng.normal(size=entries) + 1j * rng.normal(size=entries)
    disps = rng.normal(size=(entries, 2))
    k = rng.normal(size=2)
    return src, dst, amps, disps, k


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_assembly_paths_agree(seed):
    src, dst, amps, disps, k = _random_assembly(seed)
    a = np.zeros((12, 12), dtype=np.complex128)
    b = np.zeros((12, 12), dtype=np.complex128)
    _kernels._accumulate_couplings_np(src, dst, amps, disps, k, a)
    if _kernels.HAVE_NUMBA:
        _kernels._accumulate_couplings_nb(src, dst, amps, disps, k, b)
        assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("seed", [3, 4])
def test_counting_paths_agree(seed):
    rng = np.random.default_rng(seed)
    energies = rng.normal(size=400) * 3.0
    weights = rng.random(400)
    e0, step, npts, delta = -8.0, 16.0 / 511, 512, 0.05
    a = np.zeros(npts)
    _kernels._smoothed_counts_np(energies, weights, e0, step, npts, delta, a)
    if _kernels.HAVE_NUMBA:
        b = np.zeros(npts)
        _kernels._smoothed_counts_nb(energies, weights, e0, step, npts, delta, b)
        assert np.allclose(a, b, atol=1e-12)
    a2 = np.zeros(npts)
    _kernels._sharp_counts_np(energies, weights, e0, step, npts, a2)
    if _kernels.HAVE_NUMBA:
        b2 = np.zeros(npts)
        _kernels._sharp_counts_nb(energies, weights, e0, step, npts, b2)
        assert np.allclose(a2, b2, atol=1e-12)


def test_smoothed_counts_against_direct_sum():
    rng = np.random.default_rng(7)
    energies = rng.normal(size=50)
    weights = rng.random(50)
    e0, step, npts, delta = -4.0, 8.0 / 127, 128, 0.3
    out = np.zeros(npts)
    _kernels.smoothed_counts(energies, weights, e0, step, npts, delta, out)
    grid = e0 + step * np.arange(npts)
    from hexmc.qoi import smoothing_g

    direct = np.array(
        [np.sum(weights * smoothing_g((energies - eps) / delta)) for eps in grid]
    )
    assert np.allclose(out, direct, atol=1e-10)


def test_sharp_counts_against_direct_sum():
    rng = np.random.default_rng(8)
    energies = rng.normal(size=50)
    weights = rng.random(50)
    e0, step, npts = -4.0, 8.0 / 127, 128
    out = np.zeros(npts)
    _kernels.sharp_counts(energies, weights, e0, step, npts, out)
    grid = e0 + step * np.arange(npts)
    direct = np.array([np.sum(weights * (energies < eps)) for eps in grid])
    assert np.allclose(out, direct, atol=1e-10)


def test_env_flag_selects_numpy_path():
    env = dict(os.environ, HEXMC_NO_NUMBA="1")
    code = "from hexmc import _kernels; print(_kernels.HAVE_NUMBA)"
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "False"


def test_warmup_runs_on_active_path():
    _kernels.warmup()
