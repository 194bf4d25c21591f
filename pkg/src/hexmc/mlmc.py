"""Monte Carlo / multilevel Monte Carlo estimation over IDoS curves.

The multilevel estimator sums a plain sample mean on the coarsest level and
mean corrections Q_l - Q_l^CV on the finer ones, where the control variate
of an outcome is the arithmetic mean of the quantity recomputed on the four
quarter subcells inheriting that outcome's vacancies.  Since restricting an
i.i.d. vacancy field to a fixed quarter reproduces the quarter's own
distribution, E[Q_l^CV] = E[Q_{l-1}] and the level sums telescope.

All estimator arithmetic here is pure and deterministic: curves come in as
arrays, aggregation follows fixed index order, so results do not depend on
how samples were scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .disorder import DefectConfiguration, restrict
from .lattice import PartitionMap
from .qoi import EnergyGrid

__all__ = [
    "LevelPlan",
    "LevelStats",
    "MlmcEstimate",
    "RateFit",
    "RateEstimates",
    "ComplexityExponents",
    "SlmcComparison",
    "mean_and_variance",
    "control_variate_sample",
    "combine_levels",
    "optimal_samples",
    "splitting_theta",
    "complexity_exponents",
    "fit_loglog_slope",
    "fit_rates",
    "slmc_comparison",
    "window_mask",
]

DEFAULT_C_ALPHA = 1.96  # 95% two-sided normal confidence


@dataclass(frozen=True)
class LevelPlan:
    """Level hierarchy: supercell factors with n*q held constant.

    ``ns`` must strictly double from level to level when more than one level
    is present; level 1 carries no control variate.
    """

    ns: tuple[int, ...]
    samples: tuple[int, ...]
    nq: int
    p_vac: float
    delta: float

    def __post_init__(self):
        if not self.ns:
            raise ValueError("level plan needs at least one level")
        if len(self.ns) != len(self.samples):
            raise ValueError("ns and samples must have matching lengths")
        for n in self.ns:
            if n < 1:
                raise ValueError(f"supercell factor must be >= 1, got {n}")
        for a, b in zip(self.ns, self.ns[1:]):
            if b != 2 * a:
                raise ValueError(f"level sizes must double: {self.ns}")
        for m in self.samples:
            if m < 1:
                raise ValueError(f"sample counts must be >= 1, got {m}")
        if not 0.0 <= self.p_vac <= 1.0:
            raise ValueError(f"p_vac must be in [0, 1], got {self.p_vac}")
        if self.delta <= 0:
            raise ValueError("smoothing width must be positive")
        for n in self.ns:
            if self.q(n) < 1:
                raise ValueError(f"n*q = {self.nq} gives no k-points at n = {n}")

    @classmethod
    def geometric(cls, c: int, num_levels: int, **kw) -> "LevelPlan":
        ns = tuple(c * 2**level for level in range(1, num_levels + 1))
        return cls(ns=ns, **kw)

    @property
    def num_levels(self) -> int:
        return len(self.ns)

    def q(self, n: int) -> int:
        if self.nq % n:
            raise ValueError(f"n*q constant {self.nq} not divisible by n = {n}")
        return self.nq // n


@dataclass(frozen=True, eq=False)
class LevelStats:
    """Per-level record: the level term's sample mean/variance and cost."""

    level: int
    n: int
    q: int
    nsamples: int
    mean: np.ndarray = field(repr=False)
    sample_variance: np.ndarray | None = field(repr=False, default=None)
    work_per_sample: float = 0.0
    wall_seconds: float = 0.0
    cache_hits: int = 0


@dataclass(frozen=True, eq=False)
class MlmcEstimate:
    grid: EnergyGrid
    mean: np.ndarray = field(repr=False)
    estimator_variance: np.ndarray | None = field(repr=False)
    levels: tuple[LevelStats, ...] = ()
    total_wall_seconds: float = 0.0

    def level_window_variances(self, window=None) -> list[float]:
        mask = window_mask(self.grid, window)
        return [
            float(np.mean(ls.sample_variance[mask])) if ls.sample_variance is not None else math.nan
            for ls in self.levels
        ]


def window_mask(grid: EnergyGrid, window=None) -> np.ndarray:
    """Boolean mask of grid points inside the (lo, hi) energy window."""
    if window is None:
        return np.ones(grid.npoints, dtype=bool)
    lo, hi = window
    values = grid.values
    mask = (values >= lo) & (values <= hi)
    if not mask.any():
        raise ValueError(f"energy window {window} contains no grid points")
    return mask


def mean_and_variance(curves: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    """Pointwise sample mean and unbiased sample variance over axis 0.

    A single sample yields variance None (flagged unavailable).
    """
    curves = np.asarray(curves)
    if curves.ndim != 2 or curves.shape[0] < 1:
        raise ValueError("expected a (nsamples, npoints) array")
    mean = np.mean(curves, axis=0)
    if curves.shape[0] < 2:
        return mean, None
    return mean, np.var(curves, axis=0, ddof=1)


def control_variate_sample(
    config: DefectConfiguration,
    partition: PartitionMap,
    evaluate_full,
    evaluate_quarter,
) -> tuple[np.ndarray, np.ndarray]:
    """Coupled pair (Q_l, Q_l^CV) for one outcome.

    ``evaluate_full`` runs the level-l pipeline; ``evaluate_quarter`` runs
    the level-(l-1) pipeline (same n*q constant, so the quarters use twice
    the k-resolution of the parent).  Both members see the same outcome.
    """
    q_full = np.asarray(evaluate_full(config))
    acc = None
    for r in range(1, partition.R + 1):
        part = np.asarray(evaluate_quarter(restrict(config, partition, r)))
        acc = part.copy() if acc is None else acc + part
    return q_full, acc / partition.R


def combine_levels(grid: EnergyGrid, levels: list[LevelStats], total_wall_seconds: float = 0.0) -> MlmcEstimate:
    """Sum level-term means; estimator variance is sum_l V_l / M_l pointwise."""
    if not levels:
        raise ValueError("no levels to combine")
    mean = np.zeros(grid.npoints)
    var = np.zeros(grid.npoints)
    var_ok = True
    for ls in levels:
        mean = mean + ls.mean
        if ls.sample_variance is None:
            var_ok = False
        else:
            var = var + ls.sample_variance / ls.nsamples
    return MlmcEstimate(
        grid=grid,
        mean=mean,
        estimator_variance=var if var_ok else None,
        levels=tuple(levels),
        total_wall_seconds=total_wall_seconds,
    )


def optimal_samples(V, W, tol: float, theta: float, c_alpha: float = DEFAULT_C_ALPHA) -> np.ndarray:
    """Work-optimal sample counts M_l for given level variances and work.

    M_l = ceil[(C_alpha/(theta tol))^2 sqrt(V_l/W_l) sum_k sqrt(W_k V_k)],
    floored at one sample.
    """
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    if V.size == 0 or W.size == 0:
        raise ValueError("need at least one level")
    if V.shape != W.shape:
        raise ValueError("V and W must have matching shapes")
    if np.any(V <= 0) or np.any(W <= 0):
        raise ValueError("variances and work must be positive")
    if tol <= 0 or theta <= 0 or c_alpha <= 0:
        raise ValueError("tol, theta and c_alpha must be positive")
    factor = (c_alpha / (theta * tol)) ** 2 * np.sum(np.sqrt(W * V))
    m = np.ceil(factor * np.sqrt(V / W))
    return np.maximum(m, 1.0).astype(np.int64)


def splitting_theta(W: float, S: float, C: float) -> float:
    """Optimal error split between bias and statistical error: 1/(1+(C-S)/W)."""
    if W <= 0:
        raise ValueError("bias rate W must be positive")
    if C <= S:
        raise ValueError(
            "MC offers no asymptotic benefit over a single sample when C <= S; "
            "use fixed-sample mode"
        )
    return 1.0 / (1.0 + (C - S) / W)


@dataclass(frozen=True)
class ComplexityExponents:
    """tol-exponents of predicted work: fixed-sample, single-level MC, MLMC."""

    ac_fs: float
    ac_slmc: float
    ac_mlmc: float

    def astuple(self):
        return (self.ac_fs, self.ac_slmc, self.ac_mlmc)


def complexity_exponents(W: float, S: float, D: float, C: float) -> ComplexityExponents:
    """Predicted work ~ tol^-AC for the three estimator families."""
    if min(W, S, D, C) <= 0:
        raise ValueError("rates must be positive")
    if S >= 2.0 * W:
        raise ValueError(
            f"S = {S} >= 2W = {2 * W}: sampling-regime assumption broken"
        )
    return ComplexityExponents(
        ac_fs=2.0 * C / S,
        ac_slmc=2.0 + (C - S) / W,
        ac_mlmc=2.0 + (C - D) / W,
    )


@dataclass(frozen=True)
class RateFit:
    value: float
    stderr: float

    def __float__(self):
        return self.value


def fit_loglog_slope(sizes, observations) -> RateFit:
    """Least-squares slope of log(observation) against log(size)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.asarray(observations, dtype=float)
    if np.any(y <= 0):
        raise ValueError("observations must be positive for a log-log fit")
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need at least two (size, observation) pairs")
    y = np.log(y)
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    if len(x) > 2:
        resid = y - (y.mean() + slope * xc)
        se = math.sqrt(float(np.dot(resid, resid)) / (len(x) - 2) / float(np.dot(xc, xc)))
    else:
        se = math.nan
    return RateFit(slope, se)


@dataclass(frozen=True)
class RateEstimates:
    """Empirical decay/growth exponents: bias W, variance S, CV-difference
    variance D (decay, positive) and per-sample cost C (growth)."""

    w: RateFit | None = None
    s: RateFit | None = None
    d: RateFit | None = None
    c: RateFit | None = None

    @property
    def mlmc_benefit(self) -> bool:
        return self.d is not None and self.s is not None and self.d.value > self.s.value

    @property
    def mc_benefit(self) -> bool:
        return self.c is not None and self.s is not None and self.c.value > self.s.value


def fit_rates(
    sizes,
    bias_proxies=None,
    variances=None,
    cv_diff_variances=None,
    work=None,
) -> RateEstimates:
    """Fit the model exponents from per-level observations.

    ``bias_proxies`` are successive mean differences |mean_l - mean_{l+1}|
    and pair with sizes[:-1]; the other series pair with sizes directly.
    Decay exponents are returned positive.
    """
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two levels to fit rates")

    def decay(obs, xs):
        fit = fit_loglog_slope(xs, obs)
        return RateFit(-fit.value, fit.stderr)

    w = s = d = c = None
    if bias_proxies is not None:
        proxies = tuple(bias_proxies)
        w = decay(proxies, sizes[: len(proxies)])
    if variances is not None:
        s = decay(variances, sizes)
    if cv_diff_variances is not None:
        d = decay(cv_diff_variances, sizes)
    if work is not None:
        c = fit_loglog_slope(sizes, work)
    return RateEstimates(w=w, s=s, d=d, c=c)


@dataclass(frozen=True, eq=False)
class SlmcComparison:
    """Pointwise variance comparison against a single-level estimator."""

    mlmc_variance: np.ndarray = field(repr=False)
    slmc_variance: np.ndarray = field(repr=False)
    rescale_factor: float = 1.0
    slmc_samples: int = 0
    slmc_samples_needed: float = 0.0
    work_ratio: float = 1.0


def slmc_comparison(
    estimate: MlmcEstimate,
    slmc_curves: np.ndarray,
    slmc_seconds_per_sample: float,
    window=None,
) -> SlmcComparison:
    """Compare estimator variances and estimate the work ratio R.

    The SLMC estimator variance scales as 1/M, so the sample count needed to
    match the MLMC variance over the window is M/alpha with alpha the
    window-mean variance ratio; R divides the MLMC wall time by the
    extrapolated SLMC time.
    """
    slmc_curves = np.asarray(slmc_curves)
    if slmc_curves.shape[0] < 2:
        raise ValueError("need at least two single-level samples")
    if estimate.estimator_variance is None:
        raise ValueError("estimator variance unavailable (a level has one sample)")
    m_slmc = slmc_curves.shape[0]
    _, v_slmc = mean_and_variance(slmc_curves)
    var_slmc = v_slmc / m_slmc
    mask = window_mask(estimate.grid, window)
    num = float(np.mean(estimate.estimator_variance[mask]))
    den = float(np.mean(var_slmc[mask]))
    if den == 0.0 and num == 0.0:
        alpha = 1.0
    elif den == 0.0:
        raise ValueError("single-level variance vanishes on the window")
    else:
        alpha = num / den
    needed = m_slmc / alpha if alpha > 0 else math.inf
    slmc_time = slmc_seconds_per_sample * needed
    ratio = estimate.total_wall_seconds / slmc_time if slmc_time > 0 else math.inf
    return SlmcComparison(
        mlmc_variance=estimate.estimator_variance,
        slmc_variance=var_slmc,
        rescale_factor=alpha,
        slmc_samples=m_slmc,
        slmc_samples_needed=needed,
        work_ratio=ratio,
    )
