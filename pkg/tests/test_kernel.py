import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nngf.errors import DegenerateActivationError, InvalidSeriesError, ValidationError
from nngf.kernel import (
    ActivationSpec,
    boundary_constants,
    hermite_coefficients,
    iterate_kernel,
    kernel_from_record,
    kernel_from_series,
    kernel_via_double_integral,
    relu_kernel,
    verify_boundary_expansion,
)

HIGH = [0.0, 0.9] + [0.0] * 8 + [0.1]


def test_identity_hermite_coefficients():
    a = hermite_coefficients(ActivationSpec("identity"), 8).a
    assert a[1] == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.abs(np.delete(a, 1)) < 1e-14)


def test_relu_first_coefficient_matches_slope_at_zero():
    # kappa'(0) of the closed form is (pi - arccos 0) / pi = 1/2
    h = hermite_coefficients(ActivationSpec("relu"), 64)
    assert h.a[1] ** 2 == pytest.approx(0.5, abs=1e-10)
    assert h.kernel_coeffs[1] == pytest.approx(0.5, abs=1e-10)


def test_h2_activation_gives_u_squared():
    c = hermite_coefficients(ActivationSpec("hermite-series", (0.0, 0.0, 1 / math.sqrt(2))), 8).kernel_coeffs
    expect = np.zeros_like(c)
    expect[2] = 1.0
    np.testing.assert_allclose(c, expect, atol=1e-14)


def test_relu_coefficients_stable_under_order_change():
    lo = hermite_coefficients(ActivationSpec("relu"), 32).normalized
    hi = hermite_coefficients(ActivationSpec("relu"), 64).normalized
    np.testing.assert_allclose(lo, hi[:33], atol=1e-10)


def test_degenerate_activation_rejected():
    with pytest.raises(DegenerateActivationError):
        ActivationSpec("hermite-series", (1.0, 0.0, 0.0))
    with pytest.raises(ValidationError):
        ActivationSpec("tanh")


def test_series_values():
    k = kernel_from_series(HIGH)
    assert k(np.array([0.5]))[0] == pytest.approx(0.9 * 0.5 + 0.1 * 0.5**10, abs=1e-15)
    assert k(np.array([1.0]))[0] == 1.0
    lin = kernel_from_series([0.0, 1.0])
    np.testing.assert_allclose(lin.derivative(np.linspace(-1, 1, 7)), 1.0)


def test_series_validation():
    with pytest.raises(InvalidSeriesError):
        kernel_from_series([0.5, -0.1, 0.6])
    with pytest.raises(InvalidSeriesError):
        kernel_from_series([0.5, 0.4])
    with pytest.raises(InvalidSeriesError):
        kernel_from_series([0.5, float("nan"), 0.5])


def test_relu_closed_form():
    np.testing.assert_allclose(relu_kernel(np.array([1.0, 0.0, -1.0])), [1.0, 1 / math.pi, 0.0], atol=1e-15)
    assert relu_kernel(0.0) == pytest.approx(0.3183099, abs=5e-8)


def test_iterate_power_tower():
    k = kernel_from_series([0.0, 0.0, 1.0])
    assert iterate_kernel(k, 3, np.array([0.9]))[0] == pytest.approx(0.9**8, rel=1e-14)


def test_iterate_fixed_point_at_one():
    for k in (relu_kernel(), kernel_from_series(HIGH), kernel_from_series([0.3, 0.5, 0.2])):
        assert iterate_kernel(k, 17, np.array([1.0]))[0] == 1.0


def test_relu_two_layers_at_zero():
    # kappa(1/pi) by the closed form; agrees with dblquad of the defining integral
    assert iterate_kernel(relu_kernel(), 2, np.array([0.0]))[0] == pytest.approx(0.4937311, abs=5e-8)


def test_iterate_rejects_bad_input():
    with pytest.raises(ValidationError):
        iterate_kernel(relu_kernel(), 0, np.array([0.1]))
    with pytest.raises(ValidationError):
        iterate_kernel(relu_kernel(), 2, np.array([1.5]))


def test_double_integral_oracle():
    assert kernel_via_double_integral(ActivationSpec("identity"), 0.3) == pytest.approx(0.3, abs=1e-12)
    relu = ActivationSpec("relu")
    assert kernel_via_double_integral(relu, 0.0) == pytest.approx(1 / math.pi, abs=1e-10)
    assert kernel_via_double_integral(relu, 0.7) == pytest.approx(relu_kernel(0.7), abs=1e-6)


def test_relu_boundary_expansion():
    fit = verify_boundary_expansion(relu_kernel())
    assert fit.gamma == pytest.approx(1.5, abs=0.01)
    assert fit.c == pytest.approx(2 * math.sqrt(2) / (3 * math.pi), rel=0.02)
    assert fit.r_squared > 0.999


def test_quadratic_boundary_expansion():
    # 1 - kappa(u) = (3/2)(1-u) - (1/2)(1-u)^2
    fit = verify_boundary_expansion(kernel_from_series([0.0, 0.5, 0.5]))
    assert fit.gamma == pytest.approx(2.0, abs=1e-6)
    assert fit.c == pytest.approx(0.5, rel=1e-6)


def test_linear_kernel_boundary_is_degenerate():
    assert verify_boundary_expansion(kernel_from_series([0.0, 1.0])).degenerate


def test_relu_boundary_constants():
    bc = boundary_constants(relu_kernel())
    assert (bc.gamma1, bc.gamma2) == (1.5, 2.5)
    assert bc.c1 == pytest.approx(2 * math.sqrt(2) / (3 * math.pi), rel=1e-3)


def test_record_round_trip():
    k = kernel_from_series(HIGH)
    back = kernel_from_record(k.to_record())
    u = np.linspace(-1, 1, 11)
    np.testing.assert_array_equal(back(u), k(u))
    assert kernel_from_record(relu_kernel().to_record()).kind == "relu"


coeff_lists = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12).filter(lambda c: sum(c[1:]) > 1e-3)


@settings(max_examples=60, deadline=None)
@given(coeff_lists, st.floats(-0.999, 0.999))
def test_kernel_bounds_property(raw, u):
    c = np.array(raw) / math.fsum(raw)
    k = kernel_from_series(c)
    v = float(k(np.array([u]))[0])
    va = float(k(np.array([abs(u)]))[0])
    assert v <= abs(v) <= va + 1e-15
    assert va < 1.0 or math.isclose(va, 1.0, abs_tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(coeff_lists, st.integers(1, 30), st.floats(-1.0, 1.0))
def test_iterates_stay_in_range(raw, L, u):
    k = kernel_from_series(np.array(raw) / math.fsum(raw))
    v = float(iterate_kernel(k, L, np.array([u]))[0])
    assert -1.0 <= v <= 1.0
