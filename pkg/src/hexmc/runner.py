"""Run orchestration: sample scheduling, deduplication, parallel execution.

Every eigensolve job is identified by (supercell factor, k-resolution,
vacancy bitmask).  Identical outcomes are grouped before any work is
scheduled, so each distinct configuration is solved once per run (the
dedup cache) and results are assembled back in sample-index order.  This
makes curves bit-identical for any worker count: workers only change who
computes a job, never which jobs exist or how results are combined.

Wall time is recorded per job inside the worker; level cost bookkeeping
distinguishes the time actually spent (deduplicated) from the nominal
per-sample production cost used by the rate fits.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed, parallel_config
from threadpoolctl import threadpool_limits

from . import _kernels
from .disorder import DefectConfiguration, SeedSpec, enumerate_configs, restrict, sample_defects, translation_orbits
from .lattice import build_supercell, partition_quarters
from .mlmc import (
    LevelPlan,
    LevelStats,
    MlmcEstimate,
    RateEstimates,
    combine_levels,
    fit_rates,
    mean_and_variance,
    window_mask,
)
from .qoi import EnergyGrid, SmoothingSpec, idos
from .spectrum import make_bz_grid, solve_bands
from .tbmodel import compile_cell

__all__ = [
    "Engine",
    "TaskError",
    "parallel_map",
    "ExhaustiveResult",
    "RatesResult",
    "SLMC_STREAM_OFFSET",
]

#: seed-stream level id offset for the single-level comparison samples,
#: keeping them independent of every MLMC level stream.
SLMC_STREAM_OFFSET = 10_000


class TaskError(RuntimeError):
    """One or more parallel tasks failed; message names the task ids."""

    def __init__(self, failures):
        self.failures = failures
        names = ", ".join(str(tid) for tid, _ in failures[:4])
        more = "" if len(failures) <= 4 else f" (+{len(failures) - 4} more)"
        super().__init__(
            f"{len(failures)} task(s) failed: {names}{more}; first error: {failures[0][1]!r}"
        )


def _call_task(func, task, task_id):
    try:
        return task_id, func(task), None
    except Exception as exc:  # noqa: BLE001 - reported with task identity
        return task_id, None, exc


def parallel_map(func, tasks, workers: int = 1, task_ids=None):
    """Apply ``func`` to tasks, results in task order for any worker count."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    tasks = list(tasks)
    if task_ids is None:
        task_ids = list(range(len(tasks)))
    if workers == 1 or len(tasks) <= 1:
        with threadpool_limits(limits=1):
            triples = [_call_task(func, t, tid) for t, tid in zip(tasks, task_ids)]
    else:
        with parallel_config(backend="loky", inner_max_num_threads=1):
            triples = Parallel(n_jobs=workers)(
                delayed(_call_task)(func, t, tid) for t, tid in zip(tasks, task_ids)
            )
    failures = [(tid, err) for tid, _, err in triples if err is not None]
    if failures:
        raise TaskError(failures)
    return [result for _, result, _ in triples]


# --- worker side -----------------------------------------------------------

_WORKER_STATE: dict = {}


def _worker_context(model, n: int, q: int, bz_mode: str):
    key = (model.key(), n)
    ctx = _WORKER_STATE.get(key)
    if ctx is None:
        supercell = build_supercell(model.lattice_spec(), n)
        ctx = {"supercell": supercell, "cell": compile_cell(model, supercell), "grids": {}}
        _WORKER_STATE[key] = ctx
    gkey = (q, bz_mode)
    if gkey not in ctx["grids"]:
        ctx["grids"][gkey] = make_bz_grid(model.lattice_spec(), n, q, bz_mode)
    return ctx["supercell"], ctx["cell"], ctx["grids"][gkey]


def _eval_job(args):
    """Compute one smoothed IDoS curve; returns (values, solve seconds)."""
    model, n, q, mask, grid, delta, bz_mode = args
    if not _WORKER_STATE.get("warm"):
        _kernels.warmup()
        _WORKER_STATE["warm"] = True
    supercell, cell, bz = _worker_context(model, n, q, bz_mode)
    config = DefectConfiguration.from_key(supercell, mask)
    removed = sum(len(cell.unit_dofs[u]) for u in config.vacant)
    if removed >= cell.dim:
        # every orbital removed: no states, a zero curve at zero solve cost
        return np.zeros(grid.npoints), 0.0
    t0 = time.perf_counter()
    bands = solve_bands(model, supercell, config, bz, cell=cell)
    curve = idos(bands, grid, SmoothingSpec(delta), supercell.area)
    return curve.values, time.perf_counter() - t0


# --- engine ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelSampleSet:
    """Per-sample curves of one level: the level terms and their parts."""

    stats: LevelStats
    terms: np.ndarray = field(repr=False)  # (M, npoints) level terms
    full: np.ndarray = field(repr=False)  # (M, npoints) Q_l alone
    cv: np.ndarray | None = field(repr=False, default=None)  # (M, npoints)


class Engine:
    """Shared context of one run: model, grids, dedup cache, workers."""

    def __init__(
        self,
        model,
        nq: int,
        delta: float,
        master_seed: int,
        workers: int = 1,
        bz_mode: str = "full",
        energy_points: int = 4096,
        energy_range: tuple[float, float] | None = None,
        dedup: bool = True,
    ):
        self.model = model
        self.nq = nq
        self.delta = delta
        self.master_seed = master_seed
        self.workers = workers
        self.bz_mode = bz_mode
        self.dedup = dedup
        self._cache: dict[tuple, tuple[np.ndarray, float]] = {}
        self._supercells: dict[int, object] = {}
        if energy_range is None:
            emin, emax = self.detect_energy_range()
        else:
            emin, emax = energy_range
            if not emax > emin:
                raise ValueError("energy range needs max > min")
        self.grid = EnergyGrid(emin - 2.0 * delta, emax + 2.0 * delta, energy_points)

    # -- geometry/caches --

    def supercell(self, n: int):
        if n not in self._supercells:
            self._supercells[n] = build_supercell(self.model.lattice_spec(), n)
        return self._supercells[n]

    def q_of(self, n: int) -> int:
        if self.nq % n:
            raise ValueError(f"n*q constant {self.nq} is not divisible by n = {n}")
        return self.nq // n

    def detect_energy_range(self) -> tuple[float, float]:
        """Unperturbed band range over the shared folded k-grid.

        With n*q held constant every level's folded k-points live on the
        same fundamental-cell grid, and vacancies only shrink the spectral
        range (eigenvalues of a principal subpencil stay inside the full
        range), so this bounds every sample of the run.
        """
        spec = self.model.lattice_spec()
        grid = make_bz_grid(spec, 1, self.nq, self.bz_mode)
        cell = compile_cell(self.model, self.supercell(1))
        with threadpool_limits(limits=1):
            bands = solve_bands(self.model, self.supercell(1), None, grid, cell=cell)
        return float(bands.energies.min()), float(bands.energies.max())

    # -- job scheduling --

    def evaluate_masks(self, requests):
        """Evaluate (n, q, mask) jobs with dedup; returns per-request results.

        ``requests`` is a list of (n, q, mask, task_id); returns aligned
        [(values, seconds)] plus the count of evaluations satisfied from the
        dedup store and the wall time newly spent.
        """
        new_jobs = []
        new_ids = []
        owners: dict[tuple, int] = {}
        placement = []
        hits = 0
        for n, q, mask, task_id in requests:
            key = (n, q, mask)
            if self.dedup and key in self._cache:
                hits += 1
                placement.append(("cache", key))
                continue
            if self.dedup and key in owners:
                hits += 1
                placement.append(("job", owners[key]))
                continue
            idx = len(new_jobs)
            if self.dedup:
                owners[key] = idx
            new_jobs.append((self.model, n, q, mask, self.grid, self.delta, self.bz_mode))
            new_ids.append(task_id)
            placement.append(("job", idx))
        results = parallel_map(_eval_job, new_jobs, workers=self.workers, task_ids=new_ids)
        spent = 0.0
        for job, (values, secs) in zip(new_jobs, results):
            if self.dedup:
                self._cache[(job[1], job[2], job[3])] = (values, secs)
            spent += secs
        out = [
            self._cache[ref] if kind == "cache" else results[ref]
            for kind, ref in placement
        ]
        return out, hits, spent

    # -- level sampling --

    def draw_configs(self, supercell, p_vac: float, stream_level: int, count: int):
        return [
            sample_defects(supercell, p_vac, SeedSpec(self.master_seed, stream_level, m))
            for m in range(count)
        ]

    def sample_level(
        self,
        level: int,
        n: int,
        nsamples: int,
        p_vac: float,
        with_cv: bool,
        stream_level: int | None = None,
    ) -> LevelSampleSet:
        """Draw outcomes and evaluate the level terms (with CV when asked)."""
        q = self.q_of(n)
        supercell = self.supercell(n)
        stream = level if stream_level is None else stream_level
        configs = self.draw_configs(supercell, p_vac, stream, nsamples)

        requests = [(n, q, c.key, (level, m, "Q")) for m, c in enumerate(configs)]
        if with_cv:
            partition = partition_quarters(supercell)
            nsub = n // 2
            qsub = self.q_of(nsub)
            for m, c in enumerate(configs):
                for r in range(1, 5):
                    sub = restrict(c, partition, r)
                    requests.append((nsub, qsub, sub.key, (level, m, f"CV{r}")))

        results, hits, spent = self.evaluate_masks(requests)

        npts = self.grid.npoints
        full = np.empty((nsamples, npts))
        nominal = 0.0
        for m in range(nsamples):
            full[m] = results[m][0]
            nominal += results[m][1]
        cv = None
        if with_cv:
            cv = np.zeros((nsamples, npts))
            base = nsamples
            for m in range(nsamples):
                for r in range(4):
                    values, secs = results[base + m * 4 + r]
                    cv[m] += values
                    nominal += secs
                cv[m] *= 0.25
        terms = full - cv if cv is not None else full

        mean, variance = mean_and_variance(terms)
        stats = LevelStats(
            level=level,
            n=n,
            q=q,
            nsamples=nsamples,
            mean=mean,
            sample_variance=variance,
            work_per_sample=nominal / nsamples,
            wall_seconds=spent,
            cache_hits=hits,
        )
        return LevelSampleSet(stats=stats, terms=terms, full=full, cv=cv)

    # -- mode drivers --

    def run_mc(self, plan: LevelPlan) -> tuple[MlmcEstimate, LevelSampleSet]:
        """Plain Monte Carlo on the plan's last level."""
        level = plan.num_levels
        n = plan.ns[-1]
        sset = self.sample_level(level, n, plan.samples[-1], plan.p_vac, with_cv=False)
        est = combine_levels(self.grid, [sset.stats], total_wall_seconds=sset.stats.wall_seconds)
        return est, sset

    def run_mlmc(self, plan: LevelPlan) -> tuple[MlmcEstimate, list[LevelSampleSet]]:
        """Level 1 plain mean plus coupled CV corrections on finer levels."""
        sets = []
        total = 0.0
        for idx, (n, m) in enumerate(zip(plan.ns, plan.samples), start=1):
            with_cv = idx > 1
            sset = self.sample_level(idx, n, m, plan.p_vac, with_cv=with_cv)
            sets.append(sset)
            total += sset.stats.wall_seconds
        est = combine_levels(self.grid, [s.stats for s in sets], total_wall_seconds=total)
        return est, sets

    def run_slmc_reference(self, plan: LevelPlan, nsamples: int) -> LevelSampleSet:
        """Independent single-level samples at the finest level, for comparisons."""
        level = plan.num_levels
        return self.sample_level(
            level,
            plan.ns[-1],
            nsamples,
            plan.p_vac,
            with_cv=False,
            stream_level=SLMC_STREAM_OFFSET + level,
        )

    def run_rates(self, plan: LevelPlan, window=None) -> "RatesResult":
        """Standalone per-level statistics and the fitted model exponents."""
        mask = window_mask(self.grid, window)
        records = []
        means = []
        for idx, (n, m) in enumerate(zip(plan.ns, plan.samples), start=1):
            if n % 2:
                raise ValueError("rate estimation needs even supercell factors for the CV")
            sset = self.sample_level(idx, n, m, plan.p_vac, with_cv=True)
            _, var_q = mean_and_variance(sset.full)
            mean_q = np.mean(sset.full, axis=0)
            means.append(mean_q)
            records.append(
                {
                    "set": sset,
                    "n": n,
                    "variance_q": float(np.mean(var_q[mask])),
                    "variance_diff": float(np.mean(sset.stats.sample_variance[mask])),
                    "seconds_per_sample": sset.stats.work_per_sample,
                }
            )
        proxies = [
            float(np.mean(np.abs(means[i] - means[i + 1])[mask])) for i in range(len(means) - 1)
        ]
        rates = fit_rates(
            plan.ns,
            bias_proxies=proxies if len(proxies) >= 2 else None,
            variances=[r["variance_q"] for r in records],
            cv_diff_variances=[r["variance_diff"] for r in records],
            work=[r["seconds_per_sample"] for r in records],
        )
        return RatesResult(records=records, rates=rates, bias_proxies=proxies)

    def run_exhaustive(self, n: int, p_vac: float, symmetry_reduce: bool = False, cap: int = 24) -> "ExhaustiveResult":
        """Exact expectation over all 2^N outcomes with binomial weights."""
        supercell = self.supercell(n)
        q = self.q_of(n)
        pairs = list(enumerate_configs(supercell, p_vac, cap=cap))
        weight_sum = math.fsum(w for _, w in pairs)
        masks = [c.key for c, _ in pairs]
        if symmetry_reduce:
            canon = translation_orbits(supercell, masks)
            eval_masks = sorted(set(canon.values()))
        else:
            canon = {m: m for m in masks}
            eval_masks = masks
        if abs(weight_sum - 1.0) > 1e-12:
            raise ArithmeticError(f"enumeration weights sum to {weight_sum!r}, not 1")
        requests = [(n, q, m, ("exhaustive", m)) for m in eval_masks]
        results, hits, spent = self.evaluate_masks(requests)
        curve_of = {m: r[0] for m, r in zip(eval_masks, results)}
        m1 = np.zeros(self.grid.npoints)
        m2 = np.zeros(self.grid.npoints)
        for (config, w) in pairs:
            c = curve_of[canon[config.key]]
            m1 += w * c
            m2 += w * c * c
        variance = np.maximum(m2 - m1 * m1, 0.0)
        return ExhaustiveResult(
            mean=m1,
            variance=variance,
            weight_sum=weight_sum,
            nconfigs=len(pairs),
            evaluations=len(requests) - hits,
            cache_hits=hits,
            wall_seconds=spent,
            n=n,
            q=q,
        )

    def unperturbed_curve(self, n: int) -> np.ndarray:
        results, _, _ = self.evaluate_masks([(n, self.q_of(n), 0, ("unperturbed", n))])
        return results[0][0]


@dataclass(frozen=True, eq=False)
class ExhaustiveResult:
    mean: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)
    weight_sum: float = 1.0
    nconfigs: int = 0
    evaluations: int = 0
    cache_hits: int = 0
    wall_seconds: float = 0.0
    n: int = 1
    q: int = 1


@dataclass(frozen=True, eq=False)
class RatesResult:
    records: list
    rates: RateEstimates
    bias_proxies: list
