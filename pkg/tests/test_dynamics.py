import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nngf.dynamics import (
    beta_iterate,
    beta_limit,
    classify_regime,
    high_disorder_params,
    s_iterate_sparse,
    sparse_params,
)
from nngf.errors import ExcludedCaseError, PreconditionError, SingularityError
from nngf.kernel import iterate_kernel, kernel_from_series, relu_kernel
from nngf.quadrature import mu_quadrature

HIGH = [0.0, 0.9] + [0.0] * 8 + [0.1]


def test_classification():
    low = classify_regime(kernel_from_series([0.3, 0.5, 0.2]))
    assert low.regime == "low-disorder" and low.kprime1 == pytest.approx(0.9, abs=1e-14)
    sp = classify_regime(relu_kernel())
    assert sp.regime == "sparse" and sp.kprime1 == pytest.approx(1.0, abs=1e-12)
    hi = classify_regime(kernel_from_series(HIGH))
    assert hi.regime == "high-disorder" and hi.kprime1 == pytest.approx(1.9, abs=1e-14)


def test_high_disorder_parameters():
    h = high_disorder_params(kernel_from_series(HIGH))
    assert abs(h.b) < 1e-10
    assert h.lam == pytest.approx(0.9, abs=1e-10)
    assert h.nu == pytest.approx(math.log(1 / 0.9) / math.log(1.9), abs=1e-12)
    assert h.nu == pytest.approx(0.1641513, abs=1e-6)
    h2 = high_disorder_params(kernel_from_series([0.0, 0.6, 0.4]))
    assert h2.nu == pytest.approx(-math.log(0.6) / math.log(1.4), abs=1e-12)
    assert h2.nu == pytest.approx(1.5181806, abs=1e-7)


def test_superattracting_fixed_point_excluded():
    with pytest.raises(ExcludedCaseError):
        classify_regime(kernel_from_series([0.0, 0.0, 1.0]))


def test_relu_sparse_constants():
    sp = sparse_params(relu_kernel())
    assert sp.gamma1 == 1.5 and sp.gamma2 == 2.5 and sp.case == "A"
    assert sp.A0 == pytest.approx(math.sqrt(2) / (3 * math.pi), rel=2e-3)
    assert sp.A1 == pytest.approx(math.sqrt(2) / (2 * math.pi), rel=2e-3)
    assert sp.beta0 == pytest.approx(9 * math.pi**2 / 2, rel=4e-3)


def test_sparse_precondition():
    with pytest.raises(PreconditionError):
        sparse_params(kernel_from_series([0.0, 0.75, 0.0, 0.25]))


def test_smooth_sparse_kernel_uses_taylor_constants():
    sp = sparse_params(kernel_from_series([0.5, 0.0, 0.5]))
    assert (sp.gamma1, sp.gamma2, sp.case, sp.method) == (2.0, 3.0, "B", "taylor")
    assert sp.c1 == pytest.approx(0.5, abs=1e-14)


def test_low_disorder_beta_is_exact():
    k = kernel_from_series([0.5, 0.5])
    rep = classify_regime(k)
    x = np.linspace(-1.0, 0.9, 9)
    for L in (1, 5, 30):
        np.testing.assert_allclose(beta_iterate(k, rep, L, x).values, x - 1.0, atol=1e-14)
    np.testing.assert_allclose(beta_limit(k, rep, x).values, x - 1.0, atol=1e-14)


def test_high_beta_at_fixed_point_and_monotone():
    k = kernel_from_series(HIGH)
    rep = classify_regime(k)
    assert beta_iterate(k, rep, 40, np.array([0.0])).values[0] == 0.0
    vals = [beta_iterate(k, rep, L, np.array([0.5])).values[0] for L in range(1, 301)]
    assert np.all(np.diff(vals) >= -1e-15)
    assert beta_iterate(k, rep, 300, np.array([0.5])).gap[0] < 1e-10


def test_high_beta_limit_koenigs_normalization():
    k = kernel_from_series(HIGH)
    rep = classify_regime(k)
    h = 1e-6
    b = beta_limit(k, rep, np.array([-h, h])).values
    assert (b[1] - b[0]) / (2 * h) == pytest.approx(1.0, abs=1e-6)


def test_high_beta_limit_singularity_exponent():
    k = kernel_from_series(HIGH)
    rep = classify_regime(k)
    h = np.geomspace(1e-4, 1e-2, 9)
    b = beta_limit(k, rep, 1.0 - h).values
    slope = np.polyfit(np.log(h), np.log(b), 1)[0]
    assert slope == pytest.approx(-rep.nu, rel=0.05)


def test_beta_limit_rejects_pole():
    k = kernel_from_series(HIGH)
    with pytest.raises(SingularityError):
        beta_limit(k, classify_regime(k), np.array([0.2, 1.0]))


def test_beta_limit_mean_on_quadrature():
    k = kernel_from_series(HIGH)
    rep = classify_regime(k)
    out = beta_limit(k, rep, mu_quadrature(2, 64))
    assert out.integrable
    assert abs(mu_quadrature(2, 64).integrate(out.beta_hat)) < 1e-12


def test_relu_linear_growth_of_s():
    t = 1.0 - iterate_kernel(relu_kernel(), 5000, np.array([0.0]))[0]
    assert t**-0.5 / 5000 == pytest.approx(math.sqrt(2) / (3 * math.pi), rel=0.02)


def test_s_iterate_guards():
    sp = sparse_params(relu_kernel())
    with pytest.raises(SingularityError):
        s_iterate_sparse(relu_kernel(), sp, 10, [1.0])
    near = s_iterate_sparse(relu_kernel(), sp, 10, [1.0 - 1e-16])
    assert near.saturated[0]


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-14, 1e-11))
def test_regime_invariant_under_retruncation(eps):
    base = np.array([0.3, 0.5, 0.2])
    perturbed = np.append(base * (1 - eps), eps)
    assert classify_regime(kernel_from_series(perturbed)).regime == classify_regime(
        kernel_from_series(base)).regime
