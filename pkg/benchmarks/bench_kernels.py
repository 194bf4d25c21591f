#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

The two hot loops are the per-k Bloch-matrix accumulation and the smoothed
state counting that turns eigenvalues into an IDoS curve.  Representative
sizes follow the graphene levels (n = 8: 128 sites, 768 coupling
instances; n = 16: 512 sites, 3072 instances; counting: 24576 eigenvalues
onto a 4096-point grid).

Run:  python benchmarks/bench_kernels.py [--repeats 20]

The active path in production is selected at import time by the
HEXMC_NO_NUMBA environment variable; this script imports both
implementations explicitly so one process can time them side by side.
"""

import argparse
import time

import numpy as np

from hexmc import _kernels


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_assembly(dim, entries, nk, repeats):
    rng = np.random.default_rng(0)
    src = rng.integers(0, dim, size=entries)
    dst = rng.integers(0, dim, size=entries)
    amps = rng.normal(size=entries) + 1j * rng.normal(size=entries)
    disps = rng.normal(size=(entries, 2))
    ks = rng.normal(size=(nk, 2))

    def run(kernel):
        def body():
            for k in ks:
                out = np.zeros((dim, dim), dtype=np.complex128)
                kernel(src, dst, amps, disps, k, out)

        return body

    rows = []
    t_np = _time(run(_kernels._accumulate_couplings_np), repeats)
    rows.append(("assembly", f"dim={dim} entries={entries} nk={nk}", "numpy", t_np))
    if _kernels.HAVE_NUMBA:
        _kernels.warmup()
        t_nb = _time(run(_kernels._accumulate_couplings_nb), repeats)
        rows.append(("assembly", f"dim={dim} entries={entries} nk={nk}", "numba", t_nb))
    return rows


def bench_counts(nstates, npts, repeats):
    rng = np.random.default_rng(1)
    energies = rng.normal(size=nstates) * 4.0
    weights = rng.random(nstates)
    e0, step, delta = -10.0, 24.0 / (npts - 1), 0.01

    rows = []

    def run(kernel):
        def body():
            out = np.zeros(npts)
            kernel(energies, weights, e0, step, npts, delta, out)

        return body

    t_np = _time(run(_kernels._smoothed_counts_np), repeats)
    rows.append(("smoothed counts", f"states={nstates} grid={npts}", "numpy", t_np))
    if _kernels.HAVE_NUMBA:
        _kernels.warmup()
        t_nb = _time(run(_kernels._smoothed_counts_nb), repeats)
        rows.append(("smoothed counts", f"states={nstates} grid={npts}", "numba", t_nb))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=10)
    args = parser.parse_args()

    rows = []
    rows += bench_assembly(dim=128, entries=768, nk=48, repeats=args.repeats)
    rows += bench_assembly(dim=512, entries=3072, nk=12, repeats=args.repeats)
    rows += bench_counts(nstates=24576, npts=4096, repeats=args.repeats)
    rows += bench_counts(nstates=1536, npts=4096, repeats=args.repeats)

    print(f"{'kernel':<16} {'case':<34} {'path':<6} {'best (ms)':>10}")
    by_case = {}
    for kernel, case, path, t in rows:
        print(f"{kernel:<16} {case:<34} {path:<6} {t * 1e3:>10.3f}")
        by_case.setdefault((kernel, case), {})[path] = t
    print()
    for (kernel, case), paths in by_case.items():
        if "numba" in paths:
            print(f"{kernel:<16} {case:<34} speedup x{paths['numpy'] / paths['numba']:.1f}")
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled (HEXMC_NO_NUMBA); numpy path only")


if __name__ == "__main__":
    main()
