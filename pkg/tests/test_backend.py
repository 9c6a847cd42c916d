import math

import numpy as np
import pytest

from nngf import _backend, _pykernels
from nngf.kernel import kernel_from_series

IMPLS = _backend.implementations()
needs_c = pytest.mark.skipif("cython" not in IMPLS, reason="compiled kernels not built")


def _pair():
    return IMPLS["python"], IMPLS["cython"]


def test_python_fallback_always_available():
    assert IMPLS["python"] is _pykernels
    assert _backend.NAME in IMPLS


@needs_c
def test_relu_parity():
    py, c = _pair()
    t = np.concatenate([np.geomspace(1e-300, 1.0, 400), [0.0]])
    np.testing.assert_allclose(c.relu_complement(t), py.relu_complement(t), rtol=1e-14, atol=0)
    u = np.linspace(-1, 1, 301)
    np.testing.assert_allclose(c.relu_value(u), py.relu_value(u), rtol=1e-14, atol=1e-16)


@needs_c
def test_relu_iteration_parity():
    py, c = _pair()
    sign = np.where(np.linspace(-1, 1, 50) < 0, -1.0, 1.0)
    t = np.geomspace(1e-12, 1.0, 50)
    for steps in (1, 7, 200):
        a = py.iterate_relu(sign, t, steps)
        b = c.iterate_relu(sign, t, steps)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_allclose(b[1], a[1], rtol=1e-12, atol=0)


@needs_c
@pytest.mark.parametrize("coeffs", [[0.3, 0.5, 0.2], [0.0, 0.6, 0.0, 0.4], [0.0, 0.9] + [0.0] * 8 + [0.1]])
def test_series_iteration_parity(coeffs):
    py, c = _pair()
    k = kernel_from_series(coeffs)
    u = np.linspace(-1, 1, 81)
    sign = np.where(u < 0, -1.0, 1.0)
    t = 1.0 - np.abs(u)
    a = py.iterate_series(k.coeffs, k.tail_sums, k.tail, k.parity, sign, t, 25)
    b = c.iterate_series(k.coeffs, k.tail_sums, k.tail, k.parity, sign, t, 25)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(b[1], a[1], rtol=1e-12, atol=1e-300)


@needs_c
def test_table_parity():
    py, c = _pair()
    u = np.linspace(-1, 1, 97)
    for d in (2, 3, 6):
        np.testing.assert_allclose(c.gegenbauer_table(40, d, u), py.gegenbauer_table(40, d, u),
                                   rtol=1e-12, atol=1e-14)
    th = np.linspace(0.01, math.pi - 0.01, 33)
    np.testing.assert_allclose(c.legendre_table(30, np.cos(th), np.sin(th)),
                               py.legendre_table(30, np.cos(th), np.sin(th)), rtol=1e-12, atol=1e-14)
    x = np.linspace(-8, 8, 65)
    env = np.exp(-x * x / 4)
    np.testing.assert_allclose(c.hermite_table(60, x, env), py.hermite_table(60, x, env),
                               rtol=1e-12, atol=1e-14)


def test_legendre_addition_theorem():
    # sum over m of squared real harmonics is (2l+1)/(4 pi) at every point
    th = np.linspace(0.1, 3.0, 11)
    lmax = 12
    tab = _pykernels.legendre_table(lmax, np.cos(th), np.sin(th))
    for ell in range(lmax + 1):
        acc = np.zeros(th.size)
        row = 0
        for m in range(lmax + 1):
            if m <= ell:
                v = tab[row + ell - m]
                acc += v * v * (1.0 if m == 0 else 2.0)
            row += lmax + 1 - m
        np.testing.assert_allclose(acc, (2 * ell + 1) / (4 * math.pi), rtol=1e-12)
