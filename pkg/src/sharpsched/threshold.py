"""Monte Carlo estimation of schedulability curves and threshold location."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import workload
from .analysis import rm_schedulable_arrays

#: Generator tags accepted throughout this module.
GENERATORS = ("uunisort", "equal-split")

DEFAULT_PERIOD_RANGE = (1, 100_000)
RESTRICTED_PERIOD_SET = (3, 8, 11, 16, 20, 42, 120, 300)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    margin = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - margin), min(1.0, center + margin)


def isotonic_decreasing(y: np.ndarray, w: Optional[np.ndarray] = None) -> np.ndarray:
    """Weighted least-squares fit of a non-increasing sequence (PAVA)."""
    y = np.asarray(y, dtype=float)
    if w is None:
        w = np.ones_like(y)
    # pool adjacent violators on the reversed sequence (non-decreasing there)
    vals = list(y[::-1])
    wts = list(np.asarray(w, dtype=float)[::-1])
    means: list[float] = []
    weights: list[float] = []
    counts: list[int] = []
    for v, wt in zip(vals, wts):
        means.append(v)
        weights.append(wt)
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            wtot = weights[-2] + weights[-1]
            means[-2] = (means[-2] * weights[-2] + means[-1] * weights[-1]) / wtot
            weights[-2] = wtot
            counts[-2] += counts[-1]
            means.pop()
            weights.pop()
            counts.pop()
    out = np.repeat(means, counts)[::-1]
    return out


@dataclass(frozen=True)
class PeriodRule:
    """How task periods are drawn: a uniform integer range or an explicit set."""

    lo: int = DEFAULT_PERIOD_RANGE[0]
    hi: int = DEFAULT_PERIOD_RANGE[1]
    allowed: Optional[tuple[int, ...]] = None

    def sample(self, n: int, trials: int, rng: np.random.Generator) -> np.ndarray:
        if self.allowed is not None:
            allowed = np.array(sorted(set(self.allowed)))
            if allowed.size == 0:
                raise ValueError("allowed period set is empty")
            return allowed[rng.integers(0, allowed.size, size=(trials, n))]
        if not (1 <= self.lo <= self.hi):
            raise ValueError(f"bad period range [{self.lo}, {self.hi}]")
        return rng.integers(self.lo, self.hi, size=(trials, n), endpoint=True)

    @property
    def tag(self) -> str:
        if self.allowed is not None:
            return "set:" + ",".join(str(p) for p in sorted(set(self.allowed)))
        return f"uniform:{self.lo},{self.hi}"


@dataclass(frozen=True)
class ThresholdCurve:
    """Empirical schedulability probability over a utilization grid."""

    n: int
    grid: tuple[float, ...]
    p_hat: tuple[float, ...]
    ci_lo: tuple[float, ...]
    ci_hi: tuple[float, ...]
    trials: tuple[int, ...]
    generator: str
    period_rule: str
    seed: int

    def isotonic(self) -> np.ndarray:
        """Non-increasing fit of p_hat, weighted by trial counts."""
        return isotonic_decreasing(
            np.array(self.p_hat), np.array(self.trials, dtype=float)
        )


@dataclass(frozen=True)
class ThresholdEstimate:
    """Located threshold (the 0.5 crossing) and transition width."""

    u_star: float
    width: float
    epsilon: float


def _sample_utilizations(
    generator: str, n: int, total_util: float, trials: int, rng: np.random.Generator
) -> np.ndarray:
    if generator == "uunisort":
        return workload.gen_uunisort_batch(n, total_util, trials, rng)
    if generator == "equal-split":
        row = workload.gen_equal_split(n, total_util)
        return np.tile(row, (trials, 1))
    raise ValueError(f"unknown generator {generator!r} (want one of {GENERATORS})")


def estimate_mu(
    n: int,
    total_util: float,
    trials: int,
    rng: np.random.Generator,
    generator: str = "uunisort",
    period_rule: PeriodRule = PeriodRule(),
) -> tuple[float, float, float]:
    """Fraction of random task sets at this utilization that are schedulable.

    Returns (p_hat, ci_lo, ci_hi) with a 95% Wilson interval.
    """
    if trials < 1:
        raise ValueError("need trials >= 1")
    if not (0.0 < total_util <= n):
        raise ValueError(f"need 0 < U <= n, got {total_util}")
    if total_util > 1.0:
        # demand exceeds capacity: no sampling needed
        return 0.0, *wilson_interval(0, trials)
    utils = _sample_utilizations(generator, n, total_util, trials, rng)
    periods = period_rule.sample(n, trials, rng)
    execs = utils * periods
    hits = sum(
        rm_schedulable_arrays(periods[t], execs[t]) for t in range(trials)
    )
    lo, hi = wilson_interval(hits, trials)
    return hits / trials, lo, hi


def sweep(
    n: int,
    u_min: float,
    u_max: float,
    step: float,
    trials: int,
    seed: int,
    generator: str = "uunisort",
    period_rule: PeriodRule = PeriodRule(),
    jobs: int = 1,
) -> ThresholdCurve:
    """Run estimate_mu over a utilization grid.

    Each grid point gets an rng stream derived from (seed, point index), so
    the curve is identical whether points run serially or in parallel.
    """
    if not (u_min < u_max):
        raise ValueError("need u_min < u_max")
    if step <= 0:
        raise ValueError("need step > 0")
    grid = _make_grid(u_min, u_max, step)
    args = [
        (n, u, trials, seed, k, generator, period_rule)
        for k, u in enumerate(grid)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_point, args))
    else:
        results = [_sweep_point(a) for a in args]
    p_hat, ci_lo, ci_hi = zip(*results)
    return ThresholdCurve(
        n=n,
        grid=tuple(grid),
        p_hat=p_hat,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        trials=(trials,) * len(grid),
        generator=generator,
        period_rule=period_rule.tag,
        seed=seed,
    )


def _make_grid(u_min: float, u_max: float, step: float) -> list[float]:
    npts = int(round((u_max - u_min) / step)) + 1
    grid = [u_min + k * step for k in range(npts)]
    if grid[-1] > u_max + 1e-12:
        grid.pop()
    if not grid or grid[-1] < u_max - 1e-9:
        grid.append(u_max)
    return [round(g, 12) for g in grid]


def _sweep_point(args) -> tuple[float, float, float]:
    n, u, trials, seed, point_idx, generator, period_rule = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, point_idx]))
    return estimate_mu(n, u, trials, rng, generator=generator, period_rule=period_rule)


def _crossing(grid: np.ndarray, fit: np.ndarray, level: float) -> Optional[float]:
    """Utilization at which the non-increasing fit crosses `level`.

    Linear interpolation between the last point above and the first point
    below; None when the fit never straddles the level.
    """
    on = np.flatnonzero(fit == level)
    if on.size:
        return float(grid[on].mean())
    above = fit > level
    below = fit < level
    if not above.any() or not below.any():
        return None
    i = int(np.flatnonzero(above)[-1])
    j = int(np.flatnonzero(below)[0])
    if j <= i:  # non-monotone input; cannot happen after isotonic fit
        return None
    # interpolate across the (possibly flat) stretch between i and j
    if fit[i] == fit[j]:
        return float((grid[i] + grid[j]) / 2)
    frac = (fit[i] - level) / (fit[i] - fit[j])
    return float(grid[i] + frac * (grid[j] - grid[i]))


def locate_threshold(curve: ThresholdCurve, epsilon: float = 0.1) -> ThresholdEstimate:
    """Locate the 0.5 crossing and the 1-eps -> eps transition width."""
    if not (0.0 < epsilon < 0.5):
        raise ValueError("need 0 < epsilon < 0.5")
    grid = np.array(curve.grid)
    fit = curve.isotonic()
    u_star = _crossing(grid, fit, 0.5)
    if u_star is None:
        raise ValueError(
            "curve does not cross 0.5 in the sweep range; widen the sweep"
        )
    hi_cross = _crossing(grid, fit, epsilon)
    lo_cross = _crossing(grid, fit, 1.0 - epsilon)
    # clamp to grid ends when the tails are cut off
    if hi_cross is None:
        hi_cross = float(grid[-1]) if fit[-1] >= epsilon else float(grid[0])
    if lo_cross is None:
        lo_cross = float(grid[0]) if fit[0] <= 1.0 - epsilon else float(grid[-1])
    width = max(0.0, hi_cross - lo_cross)
    return ThresholdEstimate(u_star=u_star, width=width, epsilon=epsilon)


def width_scaling(
    n_list: Sequence[int],
    u_min: float,
    u_max: float,
    step: float,
    trials: int,
    seed: int,
    generator: str = "uunisort",
    period_rule: PeriodRule = PeriodRule(),
    epsilon: float = 0.1,
    jobs: int = 1,
) -> tuple[list[tuple[int, float]], float]:
    """Transition widths across task counts plus the fitted log-log slope."""
    n_list = sorted(set(n_list))
    if len(n_list) < 3:
        raise ValueError("need at least 3 distinct task counts")
    widths = []
    for k, n in enumerate(n_list):
        curve = sweep(
            n, u_min, u_max, step, trials, seed + k,
            generator=generator, period_rule=period_rule, jobs=jobs,
        )
        est = locate_threshold(curve, epsilon=epsilon)
        widths.append((n, est.width))
    logs_n = np.log([n for n, _ in widths])
    logs_w = np.log([max(w, 1e-12) for _, w in widths])
    slope = float(np.polyfit(logs_n, logs_w, 1)[0])
    return widths, slope
