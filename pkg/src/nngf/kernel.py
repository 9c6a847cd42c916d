"""Covariance kernels of infinitely wide networks and their iteration.

A kernel is a map on ``[-1, 1]`` with ``kappa(1) = 1``.  Two representations
are supported: a nonnegative power series (built from Hermite coefficients of
an activation or given directly) and the closed-form arc-cosine kernel of the
ReLU.  Both expose the complement ``1 - kappa(1 - t)`` evaluated without
cancellation, which is what the deep iteration runs on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e
from scipy.special import gammaln, roots_hermitenorm, roots_laguerre, roots_legendre

from nngf import _backend
from nngf.errors import (
    AssumptionViolationError,
    DegenerateActivationError,
    InvalidSeriesError,
    NumericalInstabilityError,
    UnderResolvedError,
    UnsupportedKernelError,
    ValidationError,
)

ACTIVATION_KINDS = ("relu", "identity", "hermite-series")
SERIES_TOL = 1e-12
# Gaussian tails beyond this radius contribute below exp(-400) to any integral here.
HALF_LINE = 40.0


@dataclass(frozen=True)
class ActivationSpec:
    """Activation function ``sigma``.

    ``coeffs`` holds Hermite coefficients ``a_q`` (probabilists' convention,
    ``sigma = sum_q a_q H_q``) and is only used by the ``hermite-series`` kind.
    """

    kind: str
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValidationError(f"unknown activation kind {self.kind!r}")
        if self.kind == "hermite-series":
            a = np.asarray(self.coeffs, dtype=float)
            if a.size < 2 or not np.all(np.isfinite(a)):
                raise ValidationError("hermite-series needs finite coefficients a_0..a_q, q >= 1")
            if not np.any(a[1:] != 0.0):
                raise DegenerateActivationError("all a_q with q >= 1 vanish")
            object.__setattr__(self, "coeffs", tuple(float(x) for x in a))

    @property
    def smooth(self) -> bool:
        return self.kind != "relu"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "identity":
            return x.copy()
        return hermite_e.hermeval(x, self.coeffs)

    def second_moment(self) -> float:
        """``E[sigma(Z)^2]`` in closed form."""
        if self.kind == "relu":
            return 0.5
        if self.kind == "identity":
            return 1.0
        a = np.asarray(self.coeffs)
        q = np.arange(a.size)
        return float(np.sum(np.exp(gammaln(q + 1)) * a * a))


@dataclass(frozen=True)
class HermiteCoefficients:
    """Normalized Hermite coefficients of an activation.

    ``normalized[q] = sqrt(q!) a_q`` after scaling by ``sqrt(C)``, so the kernel
    coefficients are ``normalized**2`` and their sum is ``1 - tail_mass``.
    """

    normalized: np.ndarray
    constant: float
    nodes: int = 0

    @property
    def a(self) -> np.ndarray:
        q = np.arange(self.normalized.size)
        return self.normalized * np.exp(-0.5 * gammaln(q + 1))

    @property
    def kernel_coeffs(self) -> np.ndarray:
        return self.normalized**2

    @property
    def tail_mass(self) -> float:
        return max(0.0, 1.0 - float(np.sum(self.kernel_coeffs)))


def _halfline_rule(n):
    x, w = roots_legendre(n)
    x = 0.5 * HALF_LINE * (x + 1.0)
    w = 0.5 * HALF_LINE * w
    return x, w


def _gaussian_projections(activation, q_max, n, chunk=2048):
    # E[sigma(Z) h_q(Z)] with h_q = H_q / sqrt(q!), split at the kink x = 0.
    xp, wp = _halfline_rule(n)
    x = np.concatenate([-xp[::-1], xp])
    w = np.concatenate([wp[::-1], wp])
    sig = activation(x)
    keep = sig != 0.0
    x, w, sig = x[keep], w[keep], sig[keep]
    root_phi = np.exp(-0.25 * x * x) / (2.0 * math.pi) ** 0.25
    out = np.zeros(q_max + 1)
    for s in range(0, x.size, chunk):
        sl = slice(s, s + chunk)
        table = _backend.hermite_table(q_max, x[sl], root_phi[sl])
        out += table @ (w[sl] * sig[sl] * root_phi[sl])
    return out


def hermite_coefficients(
    activation: ActivationSpec,
    q_max: int = 64,
    nodes: int = 200,
    tol: float = 1e-10,
    max_nodes: int = 1 << 16,
) -> HermiteCoefficients:
    """Normalized Hermite coefficients ``a_q`` of ``activation`` for ``q <= q_max``.

    Projections onto ``H_q`` use Gauss-Legendre rules on ``[-40, 0]`` and
    ``[0, 40]`` so that a kink at the origin does not spoil convergence; the
    node count doubles until every coefficient moves by less than ``tol``.
    The ReLU constant ``C = 2`` is taken from the closed form.
    """
    if q_max < 1:
        raise ValidationError("q_max must be >= 1")
    if activation.kind == "identity":
        alpha = np.zeros(q_max + 1)
        alpha[1] = 1.0
        return HermiteCoefficients(alpha, 1.0)
    if activation.kind == "hermite-series":
        a = np.zeros(q_max + 1)
        given = np.asarray(activation.coeffs)
        a[: min(given.size, q_max + 1)] = given[: q_max + 1]
        q = np.arange(q_max + 1)
        alpha = a * np.exp(0.5 * gammaln(q + 1))
        var = activation.second_moment()
        if var <= 0.0 or not np.any(alpha[1:] != 0.0):
            raise DegenerateActivationError("activation has vanishing Gaussian variance")
        return HermiteCoefficients(alpha / math.sqrt(var), 1.0 / var)
    constant = 1.0 / activation.second_moment()
    n = nodes
    prev = _gaussian_projections(activation, q_max, n)
    while True:
        n *= 2
        cur = _gaussian_projections(activation, q_max, n)
        if np.max(np.abs(cur - prev)) < tol:
            break
        if n >= max_nodes:
            raise UnderResolvedError(f"Hermite projections not stable at {n} nodes")
        prev = cur
    alpha = math.sqrt(constant) * cur
    if not np.any(alpha != 0.0):
        raise DegenerateActivationError("activation has vanishing Gaussian variance")
    return HermiteCoefficients(alpha, constant, n)


class Kernel:
    """Common interface of normalized kernels on ``[-1, 1]``."""

    kind = "abstract"
    parity = _backend.PARITY_NONE

    def __call__(self, u):
        raise NotImplementedError

    def derivative(self, u, order: int = 1):
        raise NotImplementedError

    def complement(self, t):
        """``1 - kappa(1 - t)`` for ``t`` in ``[0, 2]``."""
        raise NotImplementedError

    @property
    def kprime1(self) -> float:
        return float(self.derivative(np.array([1.0]))[0])

    def iterate_state(self, sign, t, steps: int):
        raise NotImplementedError

    def to_record(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class KernelSeries:
    """Nonnegative coefficients ``c_q`` with ``sum c_q = 1 - tail_mass``."""

    coeffs: np.ndarray
    tail_mass: float = 0.0

    @property
    def order(self) -> int:
        return int(self.coeffs.size - 1)

    @classmethod
    def from_coeffs(cls, coeffs, tol: float = SERIES_TOL) -> "KernelSeries":
        c = np.array(coeffs, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidSeriesError("coefficients must be a nonempty finite sequence")
        if np.any(c < 0.0):
            raise InvalidSeriesError("negative coefficient in kernel series")
        total = math.fsum(c)
        if total > 1.0 + tol or total < 1.0 - tol:
            raise InvalidSeriesError(f"coefficients sum to {total!r}, expected 1 within {tol}")
        return cls(c + 0.0, max(0.0, 1.0 - total))

    @classmethod
    def from_hermite(cls, herm: HermiteCoefficients) -> "KernelSeries":
        c = herm.kernel_coeffs.copy()
        return cls.from_coeffs(c, tol=max(SERIES_TOL, 2.0 * herm.tail_mass))


class SeriesKernel(Kernel):
    """Power-series kernel ``kappa(u) = sum_q c_q u**q``."""

    kind = "series"

    def __init__(self, series: KernelSeries, fold_tail: bool = True):
        c = np.array(series.coeffs, dtype=float)
        tail = float(series.tail_mass)
        if fold_tail and tail > 0.0:
            nz = np.flatnonzero(c)
            c[nz[-1]] += tail
            tail = 0.0
        self.series = series
        self.coeffs = c
        self.tail = tail
        self.fold_tail = fold_tail
        # D_j = sum_{q > j} c_q, so 1 - kappa(1 - t) = tail + t * sum_j D_j (1 - t)^j
        self.tail_sums = np.cumsum(c[::-1])[::-1][1:].copy()
        if self.tail_sums.size == 0:
            self.tail_sums = np.zeros(1)
        odd = c[1::2]
        even = c[0::2]
        if not np.any(odd):
            self.parity = _backend.PARITY_EVEN
        elif not np.any(even):
            self.parity = _backend.PARITY_ODD
        else:
            self.parity = _backend.PARITY_NONE
        self._shifted = {}
        self._derivs = [c]
        for _ in range(4):
            prev = self._derivs[-1]
            self._derivs.append(prev[1:] * np.arange(1, prev.size) if prev.size > 1 else np.zeros(1))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        out = np.empty_like(flat)
        pos = flat >= 0.0
        out[pos] = 1.0 - _backend.series_complement(self.tail_sums, self.tail, 1.0 - flat[pos])
        out[~pos] = _backend.series_value(self.coeffs, flat[~pos])
        return out.reshape(u.shape)

    def derivative(self, u, order: int = 1):
        if order < 0 or order > 4:
            raise ValidationError("derivative order must be in 0..4")
        return _backend.series_value(self._derivs[order], np.asarray(u, dtype=float))

    def complement(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty_like(flat)
        near = flat <= 1.0
        out[near] = _backend.series_complement(self.tail_sums, self.tail, flat[near])
        out[~near] = 1.0 - _backend.series_value(self.coeffs, 1.0 - flat[~near])
        return out.reshape(t.shape)

    @property
    def kprime1(self) -> float:
        return math.fsum(self.tail_sums)

    def iterate_state(self, sign, t, steps: int):
        return _backend.iterate_series(
            self.coeffs, self.tail_sums, self.tail, self.parity, sign, t, int(steps)
        )

    def shifted(self, anchor: float) -> np.ndarray:
        """Coefficients of ``kappa(anchor + delta)`` in powers of ``delta``."""
        key = float(anchor)
        cached = self._shifted.get(key)
        if cached is None:
            p = np.zeros(self.coeffs.size)
            for c in self.coeffs[::-1]:
                # p <- p * (anchor + delta) + c, all terms nonnegative for anchor >= 0
                p[1:] = p[1:] * key + p[:-1]
                p[0] = p[0] * key + c
            p[0] = 0.0 if key == 0.0 else p[0]
            cached = self._shifted.setdefault(key, p)
        return cached

    def to_record(self) -> dict:
        return {
            "kind": "series",
            "coeffs": [float(x) for x in self.series.coeffs],
            "order": self.series.order,
            "tail_mass": float(self.series.tail_mass),
        }

    def __repr__(self):
        return f"SeriesKernel(order={self.series.order}, kprime1={self.kprime1:.6g})"


class ReluKernel(Kernel):
    """Normalized arc-cosine kernel ``((pi - arccos u) u + sqrt(1 - u^2)) / pi``."""

    kind = "relu"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        out = np.empty_like(flat)
        near = flat >= 0.5
        out[near] = 1.0 - _backend.relu_complement(1.0 - flat[near])
        out[~near] = _backend.relu_value(flat[~near])
        return out.reshape(u.shape)

    def derivative(self, u, order: int = 1):
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        if order == 0:
            return self(u)
        if order == 1:
            return (math.pi - np.arccos(u)) / math.pi
        if order == 2:
            with np.errstate(divide="ignore"):
                return 1.0 / (math.pi * np.sqrt(1.0 - u * u))
        raise ValidationError("ReLU kernel derivatives implemented up to order 2")

    def complement(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty_like(flat)
        near = flat <= 1.0
        out[near] = _backend.relu_complement(flat[near])
        out[~near] = 1.0 - _backend.relu_value(1.0 - flat[~near])
        return out.reshape(t.shape)

    @property
    def kprime1(self) -> float:
        return 1.0

    def iterate_state(self, sign, t, steps: int):
        return _backend.iterate_relu(sign, t, int(steps))

    def to_record(self) -> dict:
        return {"kind": "relu", "coeffs": [], "order": 0, "tail_mass": 0.0}

    def __repr__(self):
        return "ReluKernel()"


def kernel_from_series(series, fold_tail: bool = True, tol: float = SERIES_TOL) -> SeriesKernel:
    """Build a power-series kernel from a ``KernelSeries`` or raw coefficients."""
    if isinstance(series, HermiteCoefficients):
        series = KernelSeries.from_hermite(series)
    elif not isinstance(series, KernelSeries):
        series = KernelSeries.from_coeffs(series, tol=tol)
    return SeriesKernel(series, fold_tail=fold_tail)


def relu_kernel(u=None):
    """Closed-form ReLU kernel; returns the kernel object when ``u`` is None."""
    k = ReluKernel()
    if u is None:
        return k
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0):
        raise ValidationError("|u| must not exceed 1")
    return k(u)


def kernel_from_record(record: dict) -> Kernel:
    """Inverse of ``Kernel.to_record``."""
    kind = record.get("kind")
    if kind == "relu":
        return ReluKernel()
    if kind == "series":
        c = np.asarray(record["coeffs"], dtype=float)
        tail = float(record.get("tail_mass", 0.0))
        if int(record.get("order", c.size - 1)) != c.size - 1:
            raise ValidationError("order does not match the coefficient count")
        return SeriesKernel(KernelSeries.from_coeffs(c, tol=max(SERIES_TOL, 2.0 * tail)))
    raise ValidationError(f"unknown kernel record kind {kind!r}")


@dataclass
class KernelState:
    """Iterates stored to keep relative precision where it matters.

    Nodes in the ``(sign, t)`` form represent ``u = sign * (1 - t)``; nodes with
    ``direct > 0`` represent ``u = anchor + delta``.
    """

    sign: np.ndarray
    t: np.ndarray
    delta: np.ndarray
    direct: np.ndarray
    anchor: float | None = None

    @classmethod
    def from_values(cls, u, anchor: float | None = None) -> "KernelState":
        u = np.asarray(u, dtype=float)
        sign = np.where(u < 0.0, -1.0, 1.0)
        t = 1.0 - np.abs(u)
        if anchor is None:
            return cls(sign, t, np.zeros_like(u), np.zeros_like(u), None)
        direct = (t >= 0.5 * (1.0 - anchor)).astype(float)
        delta = np.where(direct > 0, u - anchor, 0.0)
        return cls(sign, t, delta, direct, float(anchor))

    def values(self) -> np.ndarray:
        near = self.sign * (1.0 - self.t)
        if self.anchor is None:
            return near
        return np.where(self.direct > 0, self.anchor + self.delta, near)

    def complements(self) -> np.ndarray:
        """``1 - |u|``."""
        if self.anchor is None:
            return self.t.copy()
        return np.where(self.direct > 0, 1.0 - np.abs(self.anchor + self.delta), self.t)

    def ones_gap(self) -> np.ndarray:
        """``1 - u``, exact for nodes stored near +1."""
        near = np.where(self.sign > 0, self.t, 2.0 - self.t)
        if self.anchor is None:
            return near
        return np.where(self.direct > 0, (1.0 - self.anchor) - self.delta, near)

    def deviations(self) -> np.ndarray:
        """``u - anchor``, with full relative precision for anchored nodes."""
        anchor = 0.0 if self.anchor is None else self.anchor
        near = self.sign * (1.0 - self.t) - anchor
        if self.anchor is None:
            return near
        return np.where(self.direct > 0, self.delta, near)

    def copy(self) -> "KernelState":
        return KernelState(self.sign.copy(), self.t.copy(), self.delta.copy(),
                           self.direct.copy(), self.anchor)


def advance(kernel: Kernel, state: KernelState, steps: int) -> KernelState:
    """Return ``state`` after ``steps`` further compositions with ``kernel``."""
    if steps < 0:
        raise ValidationError("steps must be >= 0")
    if steps == 0:
        return state.copy()
    if state.anchor is None:
        s, t = kernel.iterate_state(state.sign, state.t, steps)
        out = KernelState(s, t, state.delta.copy(), state.direct.copy(), None)
    else:
        if not isinstance(kernel, SeriesKernel):
            raise ValidationError("anchored iteration needs a power-series kernel")
        s, t, d, f = _backend.iterate_series_anchored(
            kernel.coeffs, kernel.tail_sums, kernel.tail, kernel.parity,
            kernel.shifted(state.anchor), state.anchor,
            state.sign, state.t, state.delta, state.direct, int(steps))
        out = KernelState(s, t, d, f, state.anchor)
    near_t = out.t[out.direct <= 0]
    if (not np.all(np.isfinite(near_t)) or np.any(near_t < -1e-12)
            or np.any(near_t > 1.0 + 1e-12) or not np.all(np.isfinite(out.delta))):
        raise NumericalInstabilityError("iterate left [-1, 1]")
    np.clip(out.t, 0.0, 1.0, out=out.t)
    return out


def states_from_values(u):
    """Split values into the ``(sign, 1 - |u|)`` representation."""
    u = np.asarray(u, dtype=float)
    sign = np.where(u < 0.0, -1.0, 1.0)
    return sign, 1.0 - np.abs(u)


def iterate_state(kernel: Kernel, sign, t, depth: int):
    """Advance ``(sign, t)`` states by ``depth`` compositions with checks."""
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    if depth == 0:
        return np.array(sign, dtype=float), np.array(t, dtype=float)
    s, t = kernel.iterate_state(sign, t, depth)
    if not np.all(np.isfinite(t)) or np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
        raise NumericalInstabilityError("iterate left [-1, 1]")
    return s, np.clip(t, 0.0, 1.0)


def iterate_kernel(kernel: Kernel, depth: int, u):
    """``kappa_L(u)``: the ``depth``-fold composition of ``kernel`` at ``u``."""
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0):
        raise ValidationError("|u| must not exceed 1")
    sign, t = states_from_values(u)
    s, t = iterate_state(kernel, sign, t, depth)
    return s * (1.0 - t)


def _polar_expectation(activation, u, n_ang, n_rad):
    # E[sigma(Z1) sigma(u Z1 + sqrt(1-u^2) Z2)] in polar coordinates; the
    # activation kink at 0 becomes four rays, used as panel breakpoints.
    rho, wr = roots_laguerre(n_rad)
    r = np.sqrt(2.0 * rho)
    xg, wg = roots_legendre(n_ang)
    out = np.empty(u.size)
    for i, ui in enumerate(u):
        alpha = math.acos(min(1.0, max(-1.0, ui)))
        cuts = np.sort(np.mod([0.5 * math.pi, 1.5 * math.pi, alpha + 0.5 * math.pi,
                               alpha + 1.5 * math.pi], 2.0 * math.pi))
        edges = np.unique(np.concatenate([[0.0], cuts, [2.0 * math.pi]]))
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            th = 0.5 * (b - a) * xg + 0.5 * (a + b)
            wt = 0.5 * (b - a) * wg
            f = activation(np.outer(r, np.cos(th))) * activation(np.outer(r, np.cos(th - alpha)))
            total += wr @ f @ wt
        out[i] = total / (2.0 * math.pi)
    return out


def _tensor_expectation(activation, u, n):
    x, w = roots_hermitenorm(n)
    w = w / math.sqrt(2.0 * math.pi)
    s1 = activation(x)
    out = np.empty(u.size)
    for i, ui in enumerate(u):
        s = math.sqrt(max(0.0, 1.0 - ui * ui))
        arg = ui * x[:, None] + s * x[None, :]
        out[i] = w @ (s1[:, None] * activation(arg)) @ w
    return out


def kernel_via_double_integral(activation: ActivationSpec, u, nodes: int = 200, tol: float = 1e-8):
    """Oracle ``C E[sigma(Z1) sigma(u Z1 + sqrt(1-u^2) Z2)]`` by 2-D quadrature.

    Smooth activations use a tensor Gauss-Hermite grid.  Activations with a
    kink at the origin use polar coordinates with angular panels split at the
    kink rays and Gauss-Laguerre in ``r^2/2``.  The result is recomputed with
    doubled nodes; a change above ``tol`` raises ``UnderResolvedError``.
    """
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(np.abs(u) > 1.0):
        raise ValidationError("|u| must not exceed 1")
    constant = 1.0 / activation.second_moment()
    if activation.smooth:
        lo = _tensor_expectation(activation, u, nodes)
        hi = _tensor_expectation(activation, u, 2 * nodes)
    else:
        lo = _polar_expectation(activation, u, nodes // 4, 32)
        hi = _polar_expectation(activation, u, nodes // 2, 64)
    gap = float(np.max(np.abs(hi - lo))) * constant
    if gap > tol:
        raise UnderResolvedError(f"double integral moved by {gap:.3g} under node doubling")
    out = constant * hi
    return float(out[0]) if scalar else out


@dataclass
class BoundaryFit:
    """Log-log fit of ``kappa'(1)(1-u) - (1-kappa(u))`` against ``h = 1-u``."""

    gamma: float
    c: float
    r_squared: float
    degenerate: bool = False
    h: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    residual: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def boundary_residual(kernel: Kernel, h):
    """``kappa'(1) h - (1 - kappa(1 - h))`` evaluated through the complement."""
    return kernel.kprime1 * h - kernel.complement(h)


def _loglog(h, r):
    x = np.log(h)
    y = np.log(np.abs(r))
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(math.copysign(math.exp(intercept), r[0])), r2


def verify_boundary_expansion(
    kernel: Kernel, h_min: float = 1e-6, h_max: float = 1e-1, n_points: int = 40
) -> BoundaryFit:
    """Fit the leading correction exponent and constant of ``kernel`` at ``u = 1``."""
    kp = kernel.kprime1
    if not math.isfinite(kp):
        raise UnsupportedKernelError("kappa'(1) is not finite")
    h = np.geomspace(h_min, h_max, n_points)
    r = boundary_residual(kernel, h)
    noise = 64.0 * np.finfo(float).eps * max(kp, 1.0) * h
    if np.all(np.abs(r) <= noise):
        return BoundaryFit(float("nan"), 0.0, 1.0, True, h, r)
    if np.any(np.sign(r) != np.sign(r[-1])):
        return BoundaryFit(float("nan"), float("nan"), 0.0, False, h, r)
    gamma, c, r2 = _loglog(h, r)
    return BoundaryFit(gamma, c, r2, False, h, r)


def _snap_half(x, tol=0.02):
    s = round(2.0 * x) / 2.0
    return s if abs(s - x) < tol else x


@dataclass
class BoundaryConstants:
    """Exponents and constants of ``1-kappa(1-h) = h - c1 h^g1 - c2 h^g2 - ...``."""

    gamma1: float
    c1: float
    gamma2: float
    c2: float
    gamma3: float
    c3: float
    method: str
    r_squared: float = 1.0
    fit: BoundaryFit | None = None


def boundary_constants(kernel: Kernel) -> BoundaryConstants:
    """Leading boundary exponents and constants of a kernel with ``kappa'(1) = 1``.

    Series kernels use exact derivatives at 1 (``g1, g2, g3 = 2, 3, 4``).  Other
    kernels use the log-log fit, snapping exponents to the nearest half-integer
    within 0.02 before solving for the constants by least squares.
    """
    fit = verify_boundary_expansion(kernel)
    if isinstance(kernel, SeriesKernel):
        one = np.array([1.0])
        k2, k3, k4 = (float(kernel.derivative(one, k)[0]) for k in (2, 3, 4))
        return BoundaryConstants(2.0, k2 / 2.0, 3.0, -k3 / 6.0, 4.0, k4 / 24.0, "taylor", 1.0, fit)
    if fit.degenerate or not math.isfinite(fit.gamma) or fit.r_squared < 0.99:
        raise AssumptionViolationError("boundary expansion fit failed")
    h, r = fit.h, fit.residual
    g1 = _snap_half(fit.gamma)
    small = h < 1e-4
    c1_0 = float(np.median(r[small] / h[small] ** g1))
    rest = r - c1_0 * h**g1
    big = h >= 1e-3
    if np.any(rest[big] == 0.0) or np.any(np.sign(rest[big]) != np.sign(rest[big][-1])):
        raise AssumptionViolationError("second-order boundary term not identifiable")
    g2_raw, _, r2 = _loglog(h[big], rest[big])
    if r2 < 0.99:
        raise AssumptionViolationError(f"second-stage fit R^2 = {r2:.4f}")
    g2 = _snap_half(g2_raw)
    g3 = g2 + (g2 - g1)
    basis = np.stack([h**g1, h**g2, h**g3], axis=1) / r[:, None]
    coef, *_ = np.linalg.lstsq(basis, np.ones_like(r), rcond=None)
    return BoundaryConstants(g1, float(coef[0]), g2, float(coef[1]), g3, float(coef[2]),
                             "fit", r2, fit)
