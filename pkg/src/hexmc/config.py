"""Run configuration: a single TOML file with strictly validated keys.

Unknown sections or keys are errors, as are out-of-range values; silent
typos in quantities like p_vac would corrupt an experiment.  All randomness
derives from the one master seed given here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .mlmc import LevelPlan
from .tbmodel import GrapheneNNModel, load_coupling_table

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]

MODES = ("mc", "mlmc", "exhaustive", "rates", "bands")

_SCHEMA = {
    "material": {"kind", "coupling_file", "eps_2p", "t", "s"},
    "disorder": {"p_vac", "master_seed"},
    "levels": {"nq", "ns", "c", "num_levels", "samples"},
    "qoi": {
        "delta",
        "energy_points",
        "energy_range",
        "energy_window",
        "dos_step",
    },
    "run": {
        "mode",
        "workers",
        "out_dir",
        "bz_mode",
        "dedup",
        "symmetry_reduce",
        "slmc_samples",
        "enumeration_cap",
    },
}


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; ``model`` is the constructed material model."""

    mode: str
    model: object
    p_vac: float
    master_seed: int
    nq: int
    ns: tuple[int, ...]
    samples: tuple[int, ...]
    delta: float
    energy_points: int
    energy_range: tuple[float, float] | None
    energy_window: tuple[float, float] | None
    dos_step: float | None
    workers: int
    out_dir: str
    bz_mode: str
    dedup: bool
    symmetry_reduce: bool
    slmc_samples: int
    enumeration_cap: int
    echo: dict = field(repr=False, default_factory=dict)

    def plan(self) -> LevelPlan:
        try:
            return LevelPlan(
                ns=self.ns,
                samples=self.samples,
                nq=self.nq,
                p_vac=self.p_vac,
                delta=self.delta,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _check_keys(data: dict):
    for section, content in data.items():
        _require(section in _SCHEMA, f"unknown config section [{section}]")
        _require(isinstance(content, dict), f"[{section}] must be a table")
        for key in content:
            _require(
                key in _SCHEMA[section], f"unknown key {key!r} in section [{section}]"
            )


def _model_from(material: dict, base_dir: Path):
    kind = material.get("kind", "graphene")
    if kind == "graphene":
        _require(
            "coupling_file" not in material,
            "coupling_file is only valid for material.kind = 'table'",
        )
        return GrapheneNNModel(
            eps_2p=float(material.get("eps_2p", GrapheneNNModel.eps_2p)),
            t=float(material.get("t", GrapheneNNModel.t)),
            s=float(material.get("s", GrapheneNNModel.s)),
        )
    if kind == "table":
        _require("coupling_file" in material, "material.kind 'table' needs coupling_file")
        for key in ("eps_2p", "t", "s"):
            _require(key not in material, f"{key!r} is only valid for graphene")
        path = Path(material["coupling_file"])
        if not path.is_absolute():
            path = base_dir / path
        _require(path.exists(), f"coupling file not found: {path}")
        try:
            return load_coupling_table(path)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown material kind {kind!r}")


def parse_config(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    _check_keys(data)
    material = data.get("material", {})
    disorder = data.get("disorder", {})
    levels = data.get("levels", {})
    qoi = data.get("qoi", {})
    run = data.get("run", {})

    mode = run.get("mode", "mc")
    _require(mode in MODES, f"unknown mode {mode!r}; expected one of {MODES}")

    model = _model_from(material, base_dir)

    p_vac = float(disorder.get("p_vac", 0.0))
    _require(0.0 <= p_vac <= 1.0, f"p_vac must be in [0, 1], got {p_vac}")
    master_seed = disorder.get("master_seed", 0)
    _require(
        isinstance(master_seed, int) and 0 <= master_seed < 2**64,
        "master_seed must be an unsigned 64-bit integer",
    )

    _require("nq" in levels, "levels.nq (the n*q constant) is required")
    nq = int(levels["nq"])
    _require(nq >= 1, "levels.nq must be positive")

    if "ns" in levels:
        _require(
            "c" not in levels and "num_levels" not in levels,
            "give either levels.ns or levels.c/num_levels, not both",
        )
        ns = tuple(int(n) for n in levels["ns"])
    else:
        _require("num_levels" in levels, "levels needs either ns or num_levels")
        c = int(levels.get("c", 1))
        _require(c >= 1, "levels.c must be positive")
        num = int(levels["num_levels"])
        _require(num >= 1, "levels.num_levels must be positive")
        ns = tuple(c * 2**level for level in range(1, num + 1))
    _require(all(n >= 1 for n in ns), "supercell factors must be >= 1")
    _require(all(nq % n == 0 for n in ns), f"levels.nq = {nq} must be divisible by every n in {ns}")

    needs_samples = mode in ("mc", "mlmc", "rates")
    if needs_samples:
        _require("samples" in levels, f"levels.samples is required for mode {mode!r}")
        samples = tuple(int(m) for m in levels["samples"])
        _require(len(samples) == len(ns), "levels.samples must match the level count")
        _require(all(m >= 1 for m in samples), "sample counts must be >= 1")
    else:
        samples = tuple(levels.get("samples", (1,) * len(ns)))
    if mode in ("mlmc", "rates"):
        for a, b in zip(ns, ns[1:]):
            _require(b == 2 * a, f"level sizes must double for mode {mode!r}: {ns}")
    if mode == "rates":
        _require(len(ns) >= 2, "rates mode needs at least two levels")
        _require(all(n % 2 == 0 for n in ns), "rates mode needs even supercell factors")
    if mode == "mlmc":
        _require(all(n % 2 == 0 for n in ns[1:]), "control-variate levels need even n")

    delta = float(qoi.get("delta", 0.01))
    _require(delta > 0, "qoi.delta must be positive")
    energy_points = int(qoi.get("energy_points", 4096))
    _require(energy_points >= 8, "qoi.energy_points must be at least 8")
    energy_range = qoi.get("energy_range")
    if energy_range is not None:
        _require(
            isinstance(energy_range, (list, tuple)) and len(energy_range) == 2,
            "qoi.energy_range must be [min, max]",
        )
        energy_range = (float(energy_range[0]), float(energy_range[1]))
        _require(energy_range[1] > energy_range[0], "qoi.energy_range must have max > min")
    energy_window = qoi.get("energy_window")
    if energy_window is not None:
        _require(
            isinstance(energy_window, (list, tuple)) and len(energy_window) == 2,
            "qoi.energy_window must be [min, max]",
        )
        energy_window = (float(energy_window[0]), float(energy_window[1]))
        _require(energy_window[1] > energy_window[0], "qoi.energy_window must have max > min")
    dos_step = qoi.get("dos_step")
    if dos_step is not None:
        dos_step = float(dos_step)
        _require(dos_step > 0, "qoi.dos_step must be positive")

    workers = int(run.get("workers", 1))
    _require(workers >= 1, "run.workers must be >= 1")
    out_dir = str(run.get("out_dir", "out"))
    bz_mode = run.get("bz_mode", "full")
    _require(bz_mode in ("full", "reduced"), "run.bz_mode must be 'full' or 'reduced'")
    dedup = bool(run.get("dedup", True))
    symmetry_reduce = bool(run.get("symmetry_reduce", False))
    slmc_samples = int(run.get("slmc_samples", 0))
    _require(slmc_samples >= 0, "run.slmc_samples must be >= 0")
    if slmc_samples:
        _require(mode == "mlmc", "run.slmc_samples is only meaningful in mlmc mode")
        _require(slmc_samples >= 2, "run.slmc_samples needs at least two samples")
    enumeration_cap = int(run.get("enumeration_cap", 24))
    _require(1 <= enumeration_cap <= 24, "run.enumeration_cap must be in [1, 24]")

    return RunConfig(
        mode=mode,
        model=model,
        p_vac=p_vac,
        master_seed=master_seed,
        nq=nq,
        ns=ns,
        samples=samples,
        delta=delta,
        energy_points=energy_points,
        energy_range=energy_range,
        energy_window=energy_window,
        dos_step=dos_step,
        workers=workers,
        out_dir=out_dir,
        bz_mode=bz_mode,
        dedup=dedup,
        symmetry_reduce=symmetry_reduce,
        slmc_samples=slmc_samples,
        enumeration_cap=enumeration_cap,
        echo=data,
    )


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a TOML run configuration.

    ``overrides`` may replace mode, master_seed, workers and out_dir (the
    CLI flags); the worker count additionally honors the HEXMC_WORKERS
    environment variable, with the explicit flag taking precedence.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    overrides = dict(overrides or {})
    env_workers = os.environ.get("HEXMC_WORKERS")
    if env_workers is not None and overrides.get("workers") is None:
        try:
            overrides["workers"] = int(env_workers)
        except ValueError as exc:
            raise ConfigError(f"HEXMC_WORKERS must be an integer, got {env_workers!r}") from exc

    for key, section in (
        ("mode", "run"),
        ("workers", "run"),
        ("out_dir", "run"),
        ("master_seed", "disorder"),
    ):
        value = overrides.get(key)
        if value is not None:
            data.setdefault(section, {})[key] = value
    return parse_config(data, base_dir=path.parent)
