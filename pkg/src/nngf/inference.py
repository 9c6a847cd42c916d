"""Distances to Gaussianity, stability tests, moment summaries and rate fits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.special import ndtri

from nngf.errors import DataError, ValidationError
from nngf.rng import stream

BOOTSTRAP = 500


def _clean(samples, n_min):
    x = np.asarray(samples, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise DataError("samples contain non-finite values")
    if x.size < n_min:
        raise DataError(f"need at least {n_min} samples, got {x.size}")
    return x


def _w1_sorted(xs):
    n = xs.size
    q = ndtri((np.arange(1, n + 1) - 0.5) / n)
    return float(np.mean(np.abs(xs - q)))


@dataclass
class DistanceReport:
    w1: float
    ks: float
    ks_pvalue: float
    n: int
    w1_ci: tuple

    def to_dict(self) -> dict:
        return asdict(self)


def w1_to_gaussian(samples, seed: int = 0, n_boot: int = BOOTSTRAP, level: float = 0.95) -> DistanceReport:
    """W1 to ``N(0, 1)`` by quantile coupling, KS test, and a percentile bootstrap CI."""
    x = _clean(samples, 100)
    xs = np.sort(x)
    w1 = _w1_sorted(xs)
    ks = stats.ks_1samp(xs, stats.norm.cdf)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = stream(seed, b).integers(0, x.size, x.size)
        boots[b] = _w1_sorted(np.sort(x[idx]))
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    return DistanceReport(w1, float(ks.statistic), float(ks.pvalue), int(x.size), (float(lo), float(hi)))


@dataclass
class StabilityReport:
    statistic: float
    pvalue: float
    n_a: int
    n_b: int

    def to_dict(self) -> dict:
        return asdict(self)


def two_sample_stability(a, b) -> StabilityReport:
    """Two-sample KS test with the asymptotic p-value."""
    x = _clean(a, 200)
    y = _clean(b, 200)
    res = stats.ks_2samp(x, y, method="asymp")
    return StabilityReport(float(res.statistic), float(res.pvalue), int(x.size), int(y.size))


@dataclass
class MomentsSummary:
    n: int
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    se_mean: float
    se_variance: float
    se_skewness: float
    se_kurtosis: float

    def to_dict(self) -> dict:
        return asdict(self)


def _moment_stats(s1, s2, s3, s4, n):
    # central moments from raw power sums (inputs pre-centred, so this is stable)
    m = s1 / n
    c2 = s2 / n - m * m
    c3 = s3 / n - 3 * m * s2 / n + 2 * m**3
    c4 = s4 / n - 4 * m * s3 / n + 6 * m * m * s2 / n - 3 * m**4
    var = c2 * n / (n - 1)
    return m, var, c3 / c2**1.5, c4 / c2**2 - 3.0


def moments_summary(samples) -> MomentsSummary:
    """Mean, variance, skewness and excess kurtosis with delete-1 jackknife SEs."""
    x = _clean(samples, 100)
    n = x.size
    shift = float(np.mean(x))
    y = x - shift
    p = [np.sum(y**k) for k in (1, 2, 3, 4)]
    if p[1] <= 0.0:
        raise DataError("zero variance")
    full = np.array(_moment_stats(*p, n))
    loo = np.array(_moment_stats(p[0] - y, p[1] - y**2, p[2] - y**3, p[3] - y**4, n - 1))
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=1, keepdims=True)) ** 2, axis=1))
    return MomentsSummary(n, full[0] + shift, full[1], full[2], full[3], *map(float, se))


@dataclass
class RateFit:
    abscissa: str
    slope: float
    intercept: float
    halfwidth: float
    r2: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def fit_variance_rate(depths, variances, abscissa: str = "L", level: float = 0.95) -> RateFit:
    """OLS of ``log Var`` on ``L`` or ``log L`` with a t-based CI half-width for the slope."""
    if abscissa not in ("L", "log L"):
        raise ValidationError("abscissa must be 'L' or 'log L'")
    L = np.asarray(depths, dtype=float)
    v = np.asarray(variances, dtype=float)
    if L.size != v.size or L.size < 4:
        raise ValidationError("need at least 4 depths with one variance each")
    if np.any(~np.isfinite(v)) or np.any(v <= 0.0):
        raise DataError("variances must be positive")
    x = L if abscissa == "L" else np.log(L)
    y = np.log(v)
    res = stats.linregress(x, y)
    tq = stats.t.ppf(0.5 + level / 2.0, L.size - 2)
    return RateFit(abscissa, float(res.slope), float(res.intercept), float(tq * res.stderr),
                   float(res.rvalue**2), int(L.size))


def skewness_zscore(summary: MomentsSummary, target: float = 0.0) -> float:
    return (summary.skewness - target) / summary.se_skewness if summary.se_skewness > 0 else math.inf
