import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nngf.errors import DataError, ValidationError
from nngf.functionals import hermite_expand, hermite_monomial, total_variance
from nngf.inference import (
    fit_variance_rate,
    moments_summary,
    skewness_zscore,
    two_sample_stability,
    w1_to_gaussian,
)
from nngf.kernel import kernel_from_series
from nngf.rng import stream


def test_w1_calibration_on_gaussian_samples():
    # null quantiles at n = 1e4 from 400 draws: mean 0.0128, q99 0.0248
    w = np.array([w1_to_gaussian(stream(100, i).standard_normal(10_000), n_boot=2).w1 for i in range(100)])
    assert np.mean(w < 0.03) >= 0.99
    assert 0.010 < w.mean() < 0.016


def test_w1_of_constant_is_mean_abs_gaussian():
    assert w1_to_gaussian(np.zeros(4000), n_boot=2).w1 == pytest.approx(math.sqrt(2 / math.pi), abs=1e-3)


def test_w1_report_fields():
    r = w1_to_gaussian(stream(1).standard_normal(500), seed=3, n_boot=200)
    assert r.n == 500 and 0.0 <= r.ks <= 1.0 and 0.0 <= r.ks_pvalue <= 1.0
    assert r.w1_ci[0] <= r.w1_ci[1]


def test_w1_input_checks():
    with pytest.raises(DataError):
        w1_to_gaussian(np.ones(50))
    x = stream(2).standard_normal(200)
    x[3] = np.nan
    with pytest.raises(DataError):
        w1_to_gaussian(x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.5))
def test_w1_permutation_invariant_and_lipschitz(seed, eps):
    x = stream(seed).standard_normal(300)
    base = w1_to_gaussian(x, n_boot=1).w1
    assert w1_to_gaussian(x[::-1], n_boot=1).w1 == pytest.approx(base, abs=1e-15)
    delta = stream(seed, 1).uniform(-eps, eps, x.size)
    assert abs(w1_to_gaussian(x + delta, n_boot=1).w1 - base) <= eps + 1e-12


def test_two_sample_trivial_cases():
    x = stream(3).standard_normal(300)
    assert two_sample_stability(x, x).statistic == 0.0
    assert two_sample_stability(x, x + 100.0).statistic == 1.0
    with pytest.raises(DataError):
        two_sample_stability(x[:100], x)


def test_two_sample_calibration():
    rejections = sum(
        two_sample_stability(stream(4, i, 0).standard_normal(2000),
                             stream(4, i, 1).standard_normal(2000)).pvalue < 0.01
        for i in range(200))
    # Binomial(200, 0.01): P(X > 8) < 1e-3
    assert rejections <= 8


def test_moments_on_gaussian():
    m = moments_summary(stream(5).standard_normal(5000))
    assert abs(skewness_zscore(m)) < 3
    assert abs(m.variance - 1) < 3 * m.se_variance


def test_single_mode_limit_skewness():
    z = stream(6).standard_normal((3000, 3))
    m = moments_summary(np.sum(z**2 - 1, axis=1))
    assert abs(skewness_zscore(m, 24 / 6**1.5)) < 3


def test_moments_location_invariance():
    x = stream(7).gamma(2.0, size=1000)
    a, b = moments_summary(x), moments_summary(x + 1e3)
    assert b.skewness == pytest.approx(a.skewness, rel=1e-9)
    assert b.se_skewness == pytest.approx(a.se_skewness, rel=1e-6)


def test_jackknife_matches_brute_force():
    x = stream(8).standard_normal(120) ** 2
    from scipy import stats

    loo = np.array([stats.skew(np.delete(x, i)) for i in range(x.size)])
    se = math.sqrt((x.size - 1) / x.size * np.sum((loo - loo.mean()) ** 2))
    m = moments_summary(x)
    assert m.skewness == pytest.approx(stats.skew(x), rel=1e-10)
    assert m.se_skewness == pytest.approx(se, rel=1e-8)


def test_moments_degenerate():
    with pytest.raises(DataError):
        moments_summary(np.full(200, 3.0))


def test_rate_fit_exact_loglinear():
    L = np.arange(5, 40, 5)
    fit = fit_variance_rate(L, 0.81**L, "L")
    assert fit.slope == pytest.approx(math.log(0.81), abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_rate_fit_log_corrected_power():
    L = np.array([50, 100, 200, 400, 800])
    slope = fit_variance_rate(L, L**-2.0 * np.log(L), "log L").slope
    # log factor pulls the fitted exponent well above -2 on this range
    assert slope == pytest.approx(-1.8074488, abs=1e-6)


def test_rate_fit_non_central_rate():
    k = kernel_from_series([0.0, 0.9] + [0.0] * 8 + [0.1])
    Ls = [20, 30, 40, 50, 60]
    tab = total_variance(hermite_expand(hermite_monomial(2)), k, Ls, 2)
    slope = fit_variance_rate(Ls, [tab.totals[L] for L in Ls], "L").slope
    assert slope == pytest.approx(2 * math.log(0.9), rel=0.02)


def test_rate_fit_validation():
    with pytest.raises(ValidationError):
        fit_variance_rate([1, 2, 3], [1, 2, 3])
    with pytest.raises(DataError):
        fit_variance_rate([1, 2, 3, 4], [1.0, -1.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        fit_variance_rate([1, 2, 3, 4], [1, 2, 3, 4], "sqrt L")
