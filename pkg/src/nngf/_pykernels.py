"""Pure numpy implementations of the hot loops.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
States of the kernel iteration are stored as a sign and a complement
``t = 1 - |u|`` so that values within 1e-16 of +-1 keep full relative
precision.
"""
import math

import numpy as np

PARITY_NONE = 0
PARITY_EVEN = 1
PARITY_ODD = 2

RELU_SERIES_CUTOFF = 2e-3


def _relu_series_coeffs(n_terms=10):
    # 1 - kappa(1 - t) in powers of y = sqrt(t/2), odd powers only (besides 2y^2)
    coeffs = []
    a_prev = 1.0
    for k in range(1, n_terms + 1):
        a_k = math.comb(2 * k, k) / (4.0**k * (2 * k + 1))
        b_k = (-1) ** k * _binom_half(k)
        coeffs.append((2.0 * a_k - 4.0 * a_prev - 2.0 * b_k) / math.pi)
        a_prev = a_k
    return np.array(coeffs)


def _binom_half(k):
    out = 1.0
    for j in range(k):
        out *= (0.5 - j) / (j + 1)
    return out


RELU_SERIES = _relu_series_coeffs()


def relu_complement(t):
    """Return ``1 - kappa(1 - t)`` for the ReLU kernel, ``t`` in ``[0, 1]``."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < RELU_SERIES_CUTOFF
    if np.any(small):
        ts = t[small]
        y = np.sqrt(0.5 * ts)
        y2 = y * y
        acc = np.zeros_like(ts)
        for c in RELU_SERIES[::-1]:
            acc = acc * y2 + c
        out[small] = ts + acc * y * y2
    big = ~small
    if np.any(big):
        tb = t[big]
        a = 2.0 * np.arcsin(np.sqrt(0.5 * tb))
        s = np.sqrt(tb * (2.0 - tb))
        out[big] = (math.pi * tb + a * (1.0 - tb) - s) / math.pi
    return out


def relu_value(u):
    """Closed-form ReLU kernel on ``[-1, 1]``."""
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return ((math.pi - np.arccos(u)) * u + np.sqrt(1.0 - u * u)) / math.pi


def series_value(coeffs, u):
    """Horner evaluation of ``sum_q coeffs[q] u**q``."""
    u = np.asarray(u, dtype=float)
    acc = np.zeros_like(u)
    for c in coeffs[::-1]:
        acc = acc * u + c
    return acc


def series_complement(tail_sums, tail, t):
    """Return ``1 - kappa(1 - t)`` as ``tail + t * sum_j D_j (1 - t)**j``.

    ``tail_sums[j] = sum_{q > j} c_q`` are nonnegative, so the Horner pass has
    no cancellation for ``t`` in ``[0, 1]``.
    """
    t = np.asarray(t, dtype=float)
    u = 1.0 - t
    acc = np.zeros_like(t)
    for d in tail_sums[::-1]:
        acc = acc * u + d
    return tail + t * acc


def iterate_series(coeffs, tail_sums, tail, parity, sign, t, steps):
    """Apply a power-series kernel ``steps`` times to states ``(sign, t)``."""
    sign = np.array(sign, dtype=float)
    t = np.array(t, dtype=float)
    for _ in range(steps):
        neg = sign < 0
        t_new = series_complement(tail_sums, tail, t)
        if parity == PARITY_EVEN:
            sign[:] = 1.0
        elif parity == PARITY_ODD:
            pass
        elif np.any(neg):
            v = series_value(coeffs, t[neg] - 1.0)
            sign[neg] = np.where(v < 0, -1.0, 1.0)
            t_new[neg] = 1.0 - np.abs(v)
        t = t_new
    return sign, t


def iterate_series_anchored(coeffs, tail_sums, tail, parity, shifted, anchor,
                            sign, t, delta, direct, steps):
    """Iterate with a second representation ``delta = u - anchor``.

    Nodes start in the ``(sign, t)`` form and switch to ``delta`` once
    ``t >= (1 - anchor) / 2``; from then on ``delta' = sum_{k>=1} p_k delta^k``
    with ``p`` the coefficients of ``kappa(anchor + delta)``.  This keeps
    relative precision in ``kappa_L - anchor`` near an attracting interior
    fixed point.  ``direct`` is a float mask (1.0 for the delta form).
    """
    sign = np.array(sign, dtype=float)
    t = np.array(t, dtype=float)
    delta = np.array(delta, dtype=float)
    direct = np.array(direct, dtype=float)
    switch = 0.5 * (1.0 - anchor)
    lin = np.ascontiguousarray(shifted[1:])
    for _ in range(steps):
        was = direct > 0
        near = ~was
        if np.any(near):
            s_n, t_n = iterate_series(coeffs, tail_sums, tail, parity, sign[near], t[near], 1)
            sign[near] = s_n
            t[near] = t_n
            flip = near & (t >= switch)
            delta[flip] = sign[flip] * (1.0 - t[flip]) - anchor
            direct[flip] = 1.0
        if np.any(was):
            dv = delta[was]
            delta[was] = dv * series_value(lin, dv)
    return sign, t, delta, direct


def iterate_relu(sign, t, steps):
    """Apply the ReLU kernel ``steps`` times to states ``(sign, t)``."""
    sign = np.array(sign, dtype=float)
    t = np.array(t, dtype=float)
    for _ in range(steps):
        neg = sign < 0
        t_new = relu_complement(np.where(neg, 0.0, t))
        if np.any(neg):
            t_new[neg] = 1.0 - relu_value(t[neg] - 1.0)
            sign[:] = 1.0
        t = t_new
    return sign, t


def gegenbauer_table(lmax, d, u):
    """Rows ``G_{l,d}(u)`` for ``l = 0..lmax`` in the ``G(1) = 1`` normalization."""
    u = np.asarray(u, dtype=float)
    out = np.empty((lmax + 1, u.size))
    out[0] = 1.0
    if lmax >= 1:
        out[1] = u
    for ell in range(1, lmax):
        out[ell + 1] = ((2 * ell + d - 1) * u * out[ell] - ell * out[ell - 1]) / (ell + d - 1)
    return out


def legendre_table(lmax, x, sinth):
    """Orthonormal associated Legendre values packed m-major.

    Block ``m`` starts at row ``m * (lmax + 1) - m * (m - 1) // 2`` and holds
    ``lambda_{l m}(x)`` for ``l = m..lmax``, normalized so that
    ``sum_m Y_{l m}^2 = (2 l + 1) / (4 pi)`` for the real harmonics built on top.
    """
    x = np.asarray(x, dtype=float)
    sinth = np.asarray(sinth, dtype=float)
    n_rows = (lmax + 1) * (lmax + 2) // 2
    out = np.empty((n_rows, x.size))
    pmm = np.full(x.size, 1.0 / math.sqrt(4.0 * math.pi))
    row = 0
    for m in range(lmax + 1):
        if m > 0:
            pmm = pmm * math.sqrt((2 * m + 1) / (2.0 * m)) * sinth
        out[row] = pmm
        if m < lmax:
            out[row + 1] = x * math.sqrt(2 * m + 3) * pmm
        for ell in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            k = row + ell - m
            out[k] = a * (x * out[k - 1] - b * out[k - 2])
        row += lmax + 1 - m
    return out


def hermite_table(qmax, x, envelope):
    """Rows ``envelope * H_q(x) / sqrt(q!)`` for ``q = 0..qmax``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((qmax + 1, x.size))
    out[0] = envelope
    if qmax >= 1:
        out[1] = x * envelope
    for q in range(1, qmax):
        out[q + 1] = (x * out[q] - math.sqrt(q) * out[q - 1]) / math.sqrt(q + 1.0)
    return out
