"""Hot numeric kernels: Bloch-matrix accumulation and smoothed state counting.

Each kernel has a numba @njit implementation and a pure-numpy one.  The
active implementation is chosen at import time: numba when it is importable
and the environment variable ``HEXMC_NO_NUMBA`` is unset/0, numpy otherwise.
Both paths stay importable so tests and benchmarks can compare them.

The numba kernels iterate in a fixed order, so results are reproducible for
a given input regardless of worker count.  The numpy fallbacks may differ
from the numba path in the last few ulps (different summation order).
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("HEXMC_NO_NUMBA", "").strip()
_want_numba = _flag in ("", "0")

try:
    if not _want_numba:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _accumulate_couplings_np(src, dst, amps, disps, k, out):
    phases = np.exp(1j * (disps @ k))
    np.add.at(out, (src, dst), amps * phases)


def _smoothed_counts_np(energies, weights, e0, step, npts, delta, out):
    # states fully below a grid point contribute their whole weight
    lo = np.clip(np.ceil((energies + delta - e0) / step), 0, npts).astype(np.int64)
    suffix = np.zeros(npts + 1)
    np.add.at(suffix, lo, weights)
    out += np.cumsum(suffix[:npts])
    # transition band: grid points strictly inside (E - delta, E + delta)
    first = np.maximum(np.floor((energies - delta - e0) / step).astype(np.int64) + 1, 0)
    for e, w, m0, m1 in zip(energies, weights, first, lo):
        if m1 > m0:
            x = (e - (e0 + step * np.arange(m0, m1))) / delta
            out[m0:m1] += w * (0.5 + x * (-1.125 + 0.625 * x * x))


def _sharp_counts_np(energies, weights, e0, step, npts, out):
    # weight counts at grid points strictly above the state energy
    idx = np.clip(np.floor((energies - e0) / step).astype(np.int64) + 1, 0, npts)
    suffix = np.zeros(npts + 1)
    np.add.at(suffix, idx, weights)
    out += np.cumsum(suffix[:npts])


if HAVE_NUMBA:

    @njit(cache=True)
    def _accumulate_couplings_nb(src, dst, amps, disps, k, out):  # pragma: no cover
        for i in range(src.shape[0]):
            phase = disps[i, 0] * k[0] + disps[i, 1] * k[1]
            out[src[i], dst[i]] += amps[i] * complex(np.cos(phase), np.sin(phase))

    @njit(cache=True)
    def _smoothed_counts_nb(energies, weights, e0, step, npts, delta, out):  # pragma: no cover
        suffix = np.zeros(npts + 1)
        for i in range(energies.shape[0]):
            e = energies[i]
            w = weights[i]
            lo = int(np.ceil((e + delta - e0) / step))
            if lo < 0:
                lo = 0
            if lo <= npts:
                suffix[lo] += w
            m0 = int(np.floor((e - delta - e0) / step)) + 1
            if m0 < 0:
                m0 = 0
            m1 = lo if lo < npts else npts
            for m in range(m0, m1):
                x = (e - (e0 + step * m)) / delta
                out[m] += w * (0.5 + x * (-1.125 + 0.625 * x * x))
        total = 0.0
        for m in range(npts):
            total += suffix[m]
            out[m] += total

    @njit(cache=True)
    def _sharp_counts_nb(energies, weights, e0, step, npts, out):  # pragma: no cover
        suffix = np.zeros(npts + 1)
        for i in range(energies.shape[0]):
            idx = int(np.floor((energies[i] - e0) / step)) + 1
            if idx < 0:
                idx = 0
            if idx <= npts:
                suffix[idx] += weights[i]
        total = 0.0
        for m in range(npts):
            total += suffix[m]
            out[m] += total

    accumulate_couplings = _accumulate_couplings_nb
    smoothed_counts = _smoothed_counts_nb
    sharp_counts = _sharp_counts_nb
else:
    accumulate_couplings = _accumulate_couplings_np
    smoothed_counts = _smoothed_counts_np
    sharp_counts = _sharp_counts_np


def warmup():
    """Trigger JIT compilation on tiny inputs (no-op on the numpy path)."""
    out = np.zeros((2, 2), dtype=np.complex128)
    accumulate_couplings(
        np.array([0], dtype=np.int64),
        np.array([1], dtype=np.int64),
        np.array([1.0 + 0j]),
        np.array([[0.5, 0.5]]),
        np.array([0.1, 0.2]),
        out,
    )
    buf = np.zeros(4)
    smoothed_counts(np.array([0.5]), np.array([1.0]), 0.0, 0.5, 4, 0.25, buf)
    buf[:] = 0.0
    sharp_counts(np.array([0.5]), np.array([1.0]), 0.0, 0.5, 4, buf)
