# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_pykernels``.

Signatures and return values match the numpy fallback exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, asin, acos, fabs, M_PI

from nngf._pykernels import RELU_SERIES, RELU_SERIES_CUTOFF

cnp.import_array()

cdef double[::1] _RELU = np.ascontiguousarray(RELU_SERIES, dtype=np.float64)
cdef double _CUT = RELU_SERIES_CUTOFF


cdef inline double _relu_comp(double t) nogil:
    cdef double y, y2, acc, a, s
    cdef Py_ssize_t k
    if t < _CUT:
        y = sqrt(0.5 * t)
        y2 = y * y
        acc = 0.0
        for k in range(_RELU.shape[0] - 1, -1, -1):
            acc = acc * y2 + _RELU[k]
        return t + acc * y * y2
    a = 2.0 * asin(sqrt(0.5 * t))
    s = sqrt(t * (2.0 - t))
    return (M_PI * t + a * (1.0 - t) - s) / M_PI


cdef inline double _relu_val(double u) nogil:
    if u > 1.0:
        u = 1.0
    elif u < -1.0:
        u = -1.0
    return ((M_PI - acos(u)) * u + sqrt(1.0 - u * u)) / M_PI


def relu_complement(t):
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    out = np.empty(tv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(tv.shape[0]):
            ov[i] = _relu_comp(tv[i])
    return out.reshape(np.shape(t))


def relu_value(u):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64).ravel()
    out = np.empty(uv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(uv.shape[0]):
            ov[i] = _relu_val(uv[i])
    return out.reshape(np.shape(u))


cdef inline double _horner(const double[::1] c, double u) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * u + c[k]
    return acc


def series_value(coeffs, u):
    cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64).ravel()
    out = np.empty(uv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(uv.shape[0]):
            ov[i] = _horner(c, uv[i])
    return out.reshape(np.shape(u))


def series_complement(tail_sums, double tail, t):
    cdef const double[::1] dsum = np.ascontiguousarray(tail_sums, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    out = np.empty(tv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(tv.shape[0]):
            ov[i] = tail + tv[i] * _horner(dsum, 1.0 - tv[i])
    return out.reshape(np.shape(t))


def iterate_series(coeffs, tail_sums, double tail, int parity, sign, t, long steps):
    cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] dsum = np.ascontiguousarray(tail_sums, dtype=np.float64)
    s_out = np.array(sign, dtype=np.float64).ravel()
    t_out = np.array(t, dtype=np.float64).ravel()
    cdef double[::1] sv = s_out
    cdef double[::1] tv = t_out
    cdef Py_ssize_t i
    cdef long step
    cdef double ti, si, v
    with nogil:
        for i in range(tv.shape[0]):
            ti = tv[i]
            si = sv[i]
            for step in range(steps):
                if si > 0 or parity != 0:
                    ti = tail + ti * _horner(dsum, 1.0 - ti)
                    if parity == 1:
                        si = 1.0
                else:
                    v = _horner(c, ti - 1.0)
                    si = -1.0 if v < 0 else 1.0
                    ti = 1.0 - fabs(v)
            tv[i] = ti
            sv[i] = si
    return s_out.reshape(np.shape(sign)), t_out.reshape(np.shape(t))


def iterate_series_anchored(coeffs, tail_sums, double tail, int parity, shifted,
                            double anchor, sign, t, delta, direct, long steps):
    cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] dsum = np.ascontiguousarray(tail_sums, dtype=np.float64)
    cdef const double[::1] lin = np.ascontiguousarray(shifted[1:], dtype=np.float64)
    s_out = np.array(sign, dtype=np.float64).ravel()
    t_out = np.array(t, dtype=np.float64).ravel()
    d_out = np.array(delta, dtype=np.float64).ravel()
    f_out = np.array(direct, dtype=np.float64).ravel()
    cdef double[::1] sv = s_out
    cdef double[::1] tv = t_out
    cdef double[::1] dv = d_out
    cdef double[::1] fv = f_out
    cdef double switch = 0.5 * (1.0 - anchor)
    cdef Py_ssize_t i
    cdef long step
    cdef double ti, si, di, v
    cdef bint is_direct
    with nogil:
        for i in range(tv.shape[0]):
            ti = tv[i]
            si = sv[i]
            di = dv[i]
            is_direct = fv[i] > 0
            for step in range(steps):
                if is_direct:
                    di = di * _horner(lin, di)
                    continue
                if si > 0 or parity != 0:
                    ti = tail + ti * _horner(dsum, 1.0 - ti)
                    if parity == 1:
                        si = 1.0
                else:
                    v = _horner(c, ti - 1.0)
                    si = -1.0 if v < 0 else 1.0
                    ti = 1.0 - fabs(v)
                if ti >= switch:
                    di = si * (1.0 - ti) - anchor
                    is_direct = True
            tv[i] = ti
            sv[i] = si
            dv[i] = di
            fv[i] = 1.0 if is_direct else 0.0
    return (s_out.reshape(np.shape(sign)), t_out.reshape(np.shape(t)),
            d_out.reshape(np.shape(delta)), f_out.reshape(np.shape(direct)))


def iterate_relu(sign, t, long steps):
    s_out = np.array(sign, dtype=np.float64).ravel()
    t_out = np.array(t, dtype=np.float64).ravel()
    cdef double[::1] sv = s_out
    cdef double[::1] tv = t_out
    cdef Py_ssize_t i
    cdef long step
    cdef double ti, si
    with nogil:
        for i in range(tv.shape[0]):
            ti = tv[i]
            si = sv[i]
            for step in range(steps):
                if si < 0:
                    ti = 1.0 - _relu_val(ti - 1.0)
                    si = 1.0
                else:
                    ti = _relu_comp(ti)
            tv[i] = ti
            sv[i] = si
    return s_out.reshape(np.shape(sign)), t_out.reshape(np.shape(t))


def gegenbauer_table(int lmax, int d, u):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t n = uv.shape[0]
    out = np.empty((lmax + 1, n))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, ell
    with nogil:
        for i in range(n):
            ov[0, i] = 1.0
            if lmax >= 1:
                ov[1, i] = uv[i]
        for ell in range(1, lmax):
            for i in range(n):
                ov[ell + 1, i] = ((2 * ell + d - 1) * uv[i] * ov[ell, i]
                                  - ell * ov[ell - 1, i]) / (ell + d - 1)
    return out


def legendre_table(int lmax, x, sinth):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef const double[::1] sv = np.ascontiguousarray(sinth, dtype=np.float64).ravel()
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t n_rows = (lmax + 1) * (lmax + 2) // 2
    out = np.empty((n_rows, n))
    cdef double[:, ::1] ov = out
    pmm_arr = np.full(n, 1.0 / sqrt(4.0 * M_PI))
    cdef double[::1] pmm = pmm_arr
    cdef Py_ssize_t i, m, ell, k, row = 0
    cdef double a, b, f
    with nogil:
        for m in range(lmax + 1):
            if m > 0:
                f = sqrt((2 * m + 1) / (2.0 * m))
                for i in range(n):
                    pmm[i] = pmm[i] * f * sv[i]
            for i in range(n):
                ov[row, i] = pmm[i]
            if m < lmax:
                f = sqrt(2.0 * m + 3.0)
                for i in range(n):
                    ov[row + 1, i] = xv[i] * f * pmm[i]
            for ell in range(m + 2, lmax + 1):
                a = sqrt((4.0 * ell * ell - 1.0) / (<double>(ell * ell - m * m)))
                b = sqrt(((ell - 1.0) * (ell - 1.0) - m * m) / (4.0 * (ell - 1.0) * (ell - 1.0) - 1.0))
                k = row + ell - m
                for i in range(n):
                    ov[k, i] = a * (xv[i] * ov[k - 1, i] - b * ov[k - 2, i])
            row += lmax + 1 - m
    return out


def hermite_table(int qmax, x, envelope):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef const double[::1] ev = np.ascontiguousarray(
        np.broadcast_to(envelope, np.shape(xv)), dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out = np.empty((qmax + 1, n))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, q
    cdef double a, b
    with nogil:
        for i in range(n):
            ov[0, i] = ev[i]
            if qmax >= 1:
                ov[1, i] = xv[i] * ev[i]
        for q in range(1, qmax):
            a = 1.0 / sqrt(q + 1.0)
            b = sqrt(<double>q) * a
            for i in range(n):
                ov[q + 1, i] = a * xv[i] * ov[q, i] - b * ov[q - 1, i]
    return out
