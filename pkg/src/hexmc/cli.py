"""Command-line entry points and artifact emission.

Artifacts written into the output directory:

  idos.csv        energy_eV,idos_mean,idos_variance,dos
  unperturbed.csv energy_eV,idos,dos           (defect-free reference curve)
  slmc.csv        energy_eV,idos_mean,idos_variance,dos   (mlmc + slmc_samples)
  bands.csv       kx,ky,band,energy_eV          (bands mode)
  levels.jsonl    one record per level: level, n, q, nsamples,
                  mean_level_variance, wall_time_s, cache_hits
                  (+ variance_q, variance_diff, seconds_per_sample in rates mode)
  summary.json    run metadata: seed, grid, rates, exponents, timings, config echo

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  Failures
also emit a machine-readable error record on stderr (and error.json when the
output directory is writable).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .mlmc import (
    complexity_exponents,
    mean_and_variance,
    slmc_comparison,
    splitting_theta,
    window_mask,
)
from .qoi import IdosCurve, dos_by_differentiation
from .runner import Engine, TaskError
from .spectrum import SolverError, make_bz_grid, solve_bands

__all__ = ["main", "execute"]


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: str, columns) -> None:
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, allow_nan=False) + "\n")


def _dos_step(cfg: RunConfig, grid) -> tuple[int, float]:
    """Snap the configured differentiation step to a grid-step multiple."""
    if cfg.dos_step is None:
        return 1, grid.step
    h = max(1, round(cfg.dos_step / grid.step))
    return h, h * grid.step


def _level_record(stats, window_variance) -> dict:
    return {
        "level": stats.level,
        "n": stats.n,
        "q": stats.q,
        "nsamples": stats.nsamples,
        "mean_level_variance": window_variance,
        "wall_time_s": stats.wall_seconds,
        "cache_hits": stats.cache_hits,
    }


def execute(cfg: RunConfig) -> dict:
    """Run one configured job and write all artifacts; returns the summary."""
    t_start = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    engine = Engine(
        model=cfg.model,
        nq=cfg.nq,
        delta=cfg.delta,
        master_seed=cfg.master_seed,
        workers=cfg.workers,
        bz_mode=cfg.bz_mode,
        energy_points=cfg.energy_points,
        energy_range=cfg.energy_range,
        dedup=cfg.dedup,
    )
    grid = engine.grid
    h, de = _dos_step(cfg, grid)
    wmask = window_mask(grid, cfg.energy_window)

    summary: dict = {
        "mode": cfg.mode,
        "master_seed": cfg.master_seed,
        "workers": cfg.workers,
        "energy_grid": {
            "min": grid.lo,
            "max": grid.hi,
            "points": grid.npoints,
            "step": grid.step,
        },
        "dos_step": de,
        "energy_window": list(cfg.energy_window) if cfg.energy_window else None,
        "rates": None,
        "complexity_exponents": None,
        "theta": None,
        "mlmc_benefit": None,
        "mc_benefit": None,
        "slmc_comparison": None,
    }
    levels_records: list[dict] = []

    def window_mean(values) -> float | None:
        return None if values is None else float(np.mean(values[wmask]))

    def dos_of(values) -> np.ndarray:
        return dos_by_differentiation(IdosCurve(grid=grid, values=values), de)

    n_top = cfg.ns[-1]
    if cfg.mode == "bands":
        supercell = engine.supercell(n_top)
        bz = make_bz_grid(cfg.model.lattice_spec(), n_top, engine.q_of(n_top), cfg.bz_mode)
        bands = solve_bands(cfg.model, supercell, None, bz)
        kx = np.repeat(bz.kpoints[:, 0], bands.nbands)
        ky = np.repeat(bz.kpoints[:, 1], bands.nbands)
        idx = np.tile(np.arange(1, bands.nbands + 1), bz.nk)
        _write_csv(out / "bands.csv", "kx,ky,band,energy_eV", (kx, ky, idx, bands.energies.reshape(-1)))
        mean = engine.unperturbed_curve(n_top)
        variance = np.zeros(grid.npoints)
        levels_records.append(
            {
                "level": 1,
                "n": n_top,
                "q": engine.q_of(n_top),
                "nsamples": 1,
                "mean_level_variance": 0.0,
                "wall_time_s": bands.solve_seconds,
                "cache_hits": 0,
            }
        )
    elif cfg.mode == "exhaustive":
        res = engine.run_exhaustive(
            n_top, cfg.p_vac, symmetry_reduce=cfg.symmetry_reduce, cap=cfg.enumeration_cap
        )
        mean, variance = res.mean, res.variance
        summary["exhaustive"] = {
            "configurations": res.nconfigs,
            "evaluations": res.evaluations,
            "weight_sum": res.weight_sum,
            "symmetry_reduced": cfg.symmetry_reduce,
        }
        levels_records.append(
            {
                "level": 1,
                "n": res.n,
                "q": res.q,
                "nsamples": res.nconfigs,
                "mean_level_variance": window_mean(variance),
                "wall_time_s": res.wall_seconds,
                "cache_hits": res.cache_hits,
            }
        )
    elif cfg.mode == "mc":
        est, _ = engine.run_mc(cfg.plan())
        mean, variance = est.mean, est.estimator_variance
        for stats in est.levels:
            levels_records.append(_level_record(stats, window_mean(stats.sample_variance)))
    elif cfg.mode == "mlmc":
        est, _ = engine.run_mlmc(cfg.plan())
        mean, variance = est.mean, est.estimator_variance
        for stats in est.levels:
            levels_records.append(_level_record(stats, window_mean(stats.sample_variance)))
        if cfg.slmc_samples:
            ref = engine.run_slmc_reference(cfg.plan(), cfg.slmc_samples)
            comp = slmc_comparison(
                est, ref.terms, ref.stats.work_per_sample, window=cfg.energy_window
            )
            ref_mean = np.mean(ref.terms, axis=0)
            _write_csv(
                out / "slmc.csv",
                "energy_eV,idos_mean,idos_variance,dos",
                (grid.values, ref_mean, comp.slmc_variance, dos_of(ref_mean)),
            )
            summary["slmc_comparison"] = {
                "rescale_factor": comp.rescale_factor,
                "slmc_samples": comp.slmc_samples,
                "slmc_samples_needed": comp.slmc_samples_needed,
                "seconds_per_slmc_sample": ref.stats.work_per_sample,
                "work_ratio": comp.work_ratio,
            }
    elif cfg.mode == "rates":
        rr = engine.run_rates(cfg.plan(), window=cfg.energy_window)
        top = rr.records[-1]["set"]
        mean = np.mean(top.full, axis=0)
        _, var_q = mean_and_variance(top.full)
        variance = var_q / top.stats.nsamples if var_q is not None else None
        for rec in rr.records:
            stats = rec["set"].stats
            row = _level_record(stats, window_mean(stats.sample_variance))
            row["variance_q"] = rec["variance_q"]
            row["variance_diff"] = rec["variance_diff"]
            row["seconds_per_sample"] = rec["seconds_per_sample"]
            levels_records.append(row)
        summary["rates"] = _rates_dict(rr.rates)
        summary["bias_proxies"] = rr.bias_proxies
        summary["mlmc_benefit"] = rr.rates.mlmc_benefit
        summary["mc_benefit"] = rr.rates.mc_benefit
        have_all = all(f is not None for f in (rr.rates.w, rr.rates.s, rr.rates.d, rr.rates.c))
        if not have_all:
            summary["complexity_exponents_error"] = "bias rate needs at least three levels"
        else:
            try:
                exps = complexity_exponents(
                    rr.rates.w.value, rr.rates.s.value, rr.rates.d.value, rr.rates.c.value
                )
                summary["complexity_exponents"] = {
                    "fixed_sample": exps.ac_fs,
                    "mc": exps.ac_slmc,
                    "mlmc": exps.ac_mlmc,
                }
            except ValueError as exc:
                summary["complexity_exponents_error"] = str(exc)
            try:
                summary["theta"] = splitting_theta(
                    rr.rates.w.value, rr.rates.s.value, rr.rates.c.value
                )
            except ValueError as exc:
                summary["theta_error"] = str(exc)
    else:  # pragma: no cover - modes are validated upstream
        raise ConfigError(f"unhandled mode {cfg.mode!r}")

    unperturbed = engine.unperturbed_curve(n_top)
    _write_csv(
        out / "unperturbed.csv",
        "energy_eV,idos,dos",
        (grid.values, unperturbed, dos_of(unperturbed)),
    )
    if variance is None:
        variance = np.full(grid.npoints, np.nan)
    _write_csv(
        out / "idos.csv",
        "energy_eV,idos_mean,idos_variance,dos",
        (grid.values, mean, variance, dos_of(mean)),
    )
    _write_jsonl(out / "levels.jsonl", levels_records)
    summary["levels"] = [
        {k: rec[k] for k in ("level", "n", "q", "nsamples")} for rec in levels_records
    ]
    summary["total_wall_s"] = time.perf_counter() - t_start
    summary["config"] = cfg.echo
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False)
        fh.write("\n")
    return summary


def _rates_dict(rates) -> dict:
    def one(fit):
        if fit is None:
            return None
        stderr = None if math.isnan(fit.stderr) else fit.stderr
        return {"value": fit.value, "stderr": stderr}

    return {"W": one(rates.w), "S": one(rates.s), "D": one(rates.d), "C": one(rates.c)}


def _error_record(code: int, kind: str, message: str, out_dir: str | None) -> None:
    record = {"error": {"exit_code": code, "type": kind, "message": message}}
    print(json.dumps(record), file=sys.stderr)
    if out_dir:
        try:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            with open(path / "error.json", "w", encoding="utf-8") as fh:
                json.dump(record, fh, indent=2)
        except OSError:
            pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hexmc",
        description="Expected integrated density of states of honeycomb "
        "tight-binding models with random vacancies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run the mode given in the config file"),
        ("rates", "empirical convergence/cost rate estimation"),
        ("exhaustive", "exact enumeration over all vacancy outcomes"),
        ("bands", "unperturbed band-structure dump"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override disorder.master_seed")
        p.add_argument("--workers", type=int, default=None, help="override run.workers")
        p.add_argument("--out", default=None, help="override run.out_dir")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {
        "workers": args.workers,
        "out_dir": args.out,
        "master_seed": args.seed,
    }
    if args.command != "run":
        overrides["mode"] = args.command
    out_dir = args.out
    try:
        cfg = load_config(args.config, overrides)
        out_dir = cfg.out_dir
        execute(cfg)
    except ConfigError as exc:
        _error_record(2, "config", str(exc), out_dir)
        return 2
    except (SolverError, TaskError, ArithmeticError, ValueError) as exc:
        _error_record(3, "numerical", str(exc), out_dir)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
