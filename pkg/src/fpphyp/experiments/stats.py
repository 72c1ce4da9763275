"""Small statistics helpers shared by the drivers."""
from __future__ import annotations

import math

import numpy as np


def mean_se(xs) -> tuple[float, float]:
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def unbiased_var(xs) -> float:
    x = np.asarray(xs, dtype=float)
    return float(x.var(ddof=1)) if x.size > 1 else math.nan


def var_se(xs) -> float:
    """Standard error of the sample variance via the fourth central moment."""
    x = np.asarray(xs, dtype=float)
    n = x.size
    if n < 4:
        return math.nan
    m2 = x.var(ddof=1)
    m4 = float(((x - x.mean()) ** 4).mean())
    return math.sqrt(max(m4 - (n - 3) / (n - 1) * m2 * m2, 0.0) / n)


def bootstrap_var_ci(xs, rng: np.random.Generator, resamples: int = 1000,
                     level: float = 0.95) -> tuple[float, float]:
    x = np.asarray(xs, dtype=float)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    v = x[idx].var(axis=1, ddof=1)
    lo, hi = np.quantile(v, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def linear_fit(x, y) -> dict:
    """Ordinary least squares ``y = slope x + intercept`` with R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else math.nan
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def origin_fit(x, y) -> dict:
    """Least squares through the origin ``y = slope x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope = float((x * y).sum() / (x * x).sum())
    resid = y - slope * x
    ss = float((y * y).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss if ss > 0 else math.nan
    return {"slope": slope, "r2_uncentered": r2}


def log_slope(ns, freqs) -> float | None:
    """Slope of log frequency against n over the strictly positive entries."""
    pts = [(n, math.log(f)) for n, f in zip(ns, freqs) if f > 0]
    if len(pts) < 2:
        return None
    return linear_fit([p[0] for p in pts], [p[1] for p in pts])["slope"]


def is_nonincreasing(xs, slack: float = 0.0) -> bool:
    return all(b <= a + slack for a, b in zip(xs, xs[1:]))


def is_nondecreasing(xs, slack: float = 0.0) -> bool:
    return all(b >= a - slack for a, b in zip(xs, xs[1:]))
