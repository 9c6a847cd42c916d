"""Gegenbauer machinery, angular power spectra and kernel moments on ``S^d``.

Conventions: ``G_{l,d}(1) = 1``, ``int G_l^2 dmu = 1 / n_{l,d}`` and

    kappa(u) = C_0 + sum_{l >= 1} C_l (n_l / omega_d) G_l(u),
    C_0 = int kappa dmu,   C_l = omega_d int kappa G_l dmu.

The normalized spectrum stores ``g_l = int kappa_hat G_l dmu`` so that
``kappa_hat = sum_l g_l n_l G_l`` and ``sum_l g_l n_l = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nngf import _backend
from nngf.dynamics import HIGH, LOW, SPARSE, RegimeReport, beta_limit, classify_regime
from nngf.errors import (
    DepthLimitError,
    NumericalInstabilityError,
    PreconditionError,
    TruncationError,
    UnclassifiableError,
    ValidationError,
)
from nngf.kernel import Kernel, KernelState, advance
from nngf.quadrature import QuadratureRule, graded_rule, mu_quadrature, sphere_area

__all__ = [
    "eigenspace_dim",
    "eigenspace_dims",
    "gegenbauer",
    "gegenbauer_table",
    "mu_quadrature",
    "graded_rule",
    "sphere_area",
    "PowerSpectrum",
    "NormalizedSpectrum",
    "NormalizedKernel",
    "power_spectrum",
    "normalized_spectrum",
    "normalized_kernel",
    "kappa_hat",
    "kernel_moment",
    "gaunt_hat",
    "limit_spectrum",
    "MomentRate",
    "moment_rate_prediction",
]

LMAX_CAP = 512
TAIL_TOL = 1e-8


def eigenspace_dim(ell: int, d: int) -> int:
    """Dimension ``n_{l,d}`` of degree-``l`` spherical harmonics on ``S^d`` (exact integer)."""
    if ell < 0 or d < 2:
        raise ValidationError("need l >= 0 and d >= 2")
    return (2 * ell + d - 1) * math.comb(ell + d - 2, ell) // (d - 1)


def eigenspace_dims(lmax: int, d: int) -> np.ndarray:
    """``n_{l,d}`` for ``l = 0..lmax`` as floats."""
    return np.array([float(eigenspace_dim(ell, d)) for ell in range(lmax + 1)])


def gegenbauer_table(lmax: int, d: int, u) -> np.ndarray:
    """Rows ``G_{l,d}(u)``, ``l = 0..lmax``; raises if any ``|G| > 1 + 1e-9``."""
    if lmax < 0 or d < 2:
        raise ValidationError("need lmax >= 0 and d >= 2")
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0):
        raise ValidationError("|u| must not exceed 1")
    table = _backend.gegenbauer_table(int(lmax), int(d), u.ravel())
    if np.any(np.abs(table) > 1.0 + 1e-9):
        raise NumericalInstabilityError("Gegenbauer recurrence exceeded |G| <= 1")
    return table.reshape((lmax + 1,) + u.shape)


def gegenbauer(ell: int, d: int, u):
    """``G_{l,d}(u)`` in the ``G(1) = 1`` normalization."""
    return gegenbauer_table(ell, d, u)[ell]


def _report_for(kernel: Kernel) -> RegimeReport:
    # spectra exist for every kernel; degenerate ones (e.g. kappa(u) = u) just lack limit constants
    try:
        return classify_regime(kernel)
    except UnclassifiableError:
        return RegimeReport("unclassified", kernel.kprime1)


def _default_rule(report: RegimeReport, L: int, d: int, lmax: int) -> QuadratureRule:
    return graded_rule(d, report.structure_scale(L), lmax)


def _anchor_value(report):
    return report.high.b if report.regime == HIGH else 1.0


def _deviation(report, state: KernelState):
    # kappa_L - a with a = b (high) or 1 (otherwise), relative precision kept
    if report.regime == HIGH:
        return state.deviations()
    return -state.ones_gap()


@dataclass
class NormalizedKernel:
    """``kappa_hat_L = (kappa_L - C_0) / (1 - C_0)`` with its pieces."""

    kernel: Kernel
    report: RegimeReport
    depth: int
    d: int
    rule: QuadratureRule
    mean_deviation: float
    one_minus_c0: float
    values: np.ndarray

    @property
    def c0(self) -> float:
        return 1.0 - self.one_minus_c0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(np.abs(u) > 1.0):
            raise ValidationError("|u| must not exceed 1")
        state = advance(self.kernel, KernelState.from_values(u.ravel(), self.report.anchor),
                        self.depth)
        dev = _deviation(self.report, state)
        return ((dev - self.mean_deviation) / self.one_minus_c0).reshape(u.shape)

    def from_complement(self, t, sign=1.0):
        """``kappa_hat_L`` at ``u = sign * (1 - t)`` without rounding ``u``."""
        t = np.asarray(t, dtype=float)
        sign = np.broadcast_to(np.asarray(sign, dtype=float), t.shape)
        u = sign * (1.0 - t)
        state = KernelState.from_values(u.ravel(), self.report.anchor)
        near = state.direct <= 0
        state.t[near] = t.ravel()[near]
        state = advance(self.kernel, state, self.depth)
        dev = _deviation(self.report, state)
        return ((dev - self.mean_deviation) / self.one_minus_c0).reshape(t.shape)


def normalized_kernel(
    kernel: Kernel, L: int, d: int, rule: QuadratureRule | None = None,
    report: RegimeReport | None = None, lmax: int = 0,
) -> NormalizedKernel:
    """Iterate on a quadrature rule and assemble ``kappa_hat_L`` there."""
    if L < 1:
        raise ValidationError("L must be >= 1")
    report = _report_for(kernel) if report is None else report
    rule = _default_rule(report, L, d, lmax) if rule is None else rule
    if rule.d != d:
        raise ValidationError("quadrature rule dimension does not match d")
    state = advance(kernel, rule.initial_state(report.anchor), L)
    dev = _deviation(report, state)
    mean_dev = rule.integrate(dev)
    one_minus_c0 = rule.integrate(state.ones_gap())
    if not one_minus_c0 > 1e-15:
        raise DepthLimitError(f"1 - C_0(L) = {one_minus_c0:.3g} below 1e-15")
    values = (dev - mean_dev) / one_minus_c0
    return NormalizedKernel(kernel, report, L, d, rule, mean_dev, one_minus_c0, values)


def kappa_hat(kernel: Kernel, L: int, d: int, u, rule: QuadratureRule | None = None):
    """Covariance ``kappa_hat_L(u)`` of the normalized field."""
    return normalized_kernel(kernel, L, d, rule)(u)


@dataclass
class PowerSpectrum:
    """Angular power spectrum ``C_l(L)``, ``l = 0..lmax`` (``C_0 = int kappa_L dmu``)."""

    d: int
    depth: int
    C: np.ndarray
    omega: float
    one_minus_c0: float
    report: RegimeReport | None = None

    @property
    def lmax(self) -> int:
        return int(self.C.size - 1)

    @property
    def dims(self) -> np.ndarray:
        return eigenspace_dims(self.lmax, self.d)

    @property
    def mode_mass(self) -> np.ndarray:
        """``C_0`` then ``C_l n_l / omega_d``; sums to ``kappa_L(1) = 1``."""
        out = self.C * self.dims / self.omega
        out[0] = self.C[0]
        return out

    @property
    def tail(self) -> float:
        """``1 - sum of mode_mass``, computed without cancelling against ``C_0``."""
        return self.one_minus_c0 - float(np.sum(self.mode_mass[1:]))


def _auto_lmax(mass_rows, one_minus, tail_tol):
    cum = np.cumsum(mass_rows)
    target = one_minus - tail_tol
    hit = np.flatnonzero(cum >= target)
    return int(hit[0]) + 1 if hit.size else mass_rows.size


def power_spectrum(
    kernel: Kernel,
    L: int,
    d: int,
    lmax: int | None = None,
    rule: QuadratureRule | None = None,
    report: RegimeReport | None = None,
    tail_tol: float = TAIL_TOL,
    check: bool = True,
) -> PowerSpectrum:
    """``C_l(L)`` for ``l <= lmax`` from batched iterates at quadrature nodes.

    With ``lmax=None`` the smallest ``lmax`` reaching cumulative mass
    ``1 - tail_tol`` is used, capped at 512.  With ``check`` a larger defect
    than ``10 * tail_tol`` raises ``TruncationError``.
    """
    report = _report_for(kernel) if report is None else report
    n_l = LMAX_CAP if lmax is None else int(lmax)
    if n_l < 1:
        raise ValidationError("lmax must be >= 1")
    rule = _default_rule(report, L, d, n_l) if rule is None else rule
    if rule.degree is not None and rule.degree < 2 * n_l:
        raise ValidationError("quadrature degree below 2 * lmax")
    nk = normalized_kernel(kernel, L, d, rule, report)
    omega = sphere_area(d)
    table = gegenbauer_table(n_l, d, rule.nodes)
    wdev = rule.weights * (nk.values * nk.one_minus_c0)
    C = omega * (table @ wdev)
    C[0] = nk.c0
    if lmax is None:
        dims = eigenspace_dims(n_l, d)
        cut = _auto_lmax(C[1:] * dims[1:] / omega, nk.one_minus_c0, tail_tol)
        C = C[: cut + 1]
    ps = PowerSpectrum(d, L, C, omega, nk.one_minus_c0, report)
    if check and ps.tail > 10.0 * tail_tol * max(1.0, nk.one_minus_c0):
        raise TruncationError(f"spectral mass beyond lmax = {ps.lmax} is {ps.tail:.3g}")
    return ps


@dataclass
class NormalizedSpectrum:
    """``g_l = C_l / (omega_d (1 - C_0))`` for ``l >= 1`` (``g_0 = 0``)."""

    d: int
    depth: int | None
    g: np.ndarray
    scale: float | None = None

    @property
    def lmax(self) -> int:
        return int(self.g.size - 1)

    @property
    def dims(self) -> np.ndarray:
        return eigenspace_dims(self.lmax, self.d)

    @property
    def mass(self) -> float:
        return float(np.sum(self.g * self.dims))

    @property
    def tail(self) -> float:
        return 1.0 - self.mass

    def limit_ratio(self) -> np.ndarray:
        """``g_l / v_L`` for comparison with the limit spectrum."""
        if self.scale is None:
            raise PreconditionError("no scale recorded")
        return self.g / self.scale


def normalized_spectrum(ps: PowerSpectrum) -> NormalizedSpectrum:
    """Zero mode removed and rescaled: the spectrum of the normalized field."""
    if not ps.one_minus_c0 > 1e-15:
        raise DepthLimitError("1 - C_0(L) below 1e-15")
    g = ps.C / (ps.omega * ps.one_minus_c0)
    g[0] = 0.0
    scale = ps.report.scale(ps.depth) if ps.report is not None else None
    return NormalizedSpectrum(ps.d, ps.depth, g, scale)


def kernel_moment(f, q: int, rule: QuadratureRule):
    """``(int f^q dmu, int |f|^q dmu)`` by the weights of ``rule``."""
    if q < 1:
        raise ValidationError("q must be >= 1")
    f = np.asarray(f, dtype=float)
    p = f**q
    return float(np.dot(rule.weights, p)), float(np.dot(rule.weights, np.abs(p)))


def gaunt_hat(ells, d: int, rule: QuadratureRule | None = None) -> float:
    """``int prod_i G_{l_i,d} dmu`` exactly by Gauss-Jacobi quadrature."""
    ells = [int(x) for x in ells]
    if any(x < 0 for x in ells):
        raise ValidationError("degrees must be >= 0")
    total = sum(ells)
    if rule is None:
        rule = mu_quadrature(d, total // 2 + 2)
    elif rule.degree is None or rule.degree < total:
        raise ValidationError(f"rule exact to degree {rule.degree} < {total}")
    table = gegenbauer_table(max(ells), d, rule.nodes)
    prod = np.ones(rule.size)
    for ell in ells:
        prod = prod * table[ell]
    return rule.integrate(prod)


@dataclass
class MomentRate:
    """Predicted asymptotic class of ``int kappa_hat_L^q dmu``."""

    rate_class: str
    q: int
    threshold: float
    description: str
    constant: float | None = None
    identically_zero: bool = False


def _singular_rule(report, q, d):
    # cap of mu-mass t_min^(d/2) carries beta^q ~ t^-q nu; keep its share below 1e-14
    t_min = 1e-14 ** (1.0 / (d / 2.0 - q * report.nu))
    return max(t_min, 1e-300)


def limit_spectrum(kernel: Kernel, report: RegimeReport, d: int, lmax: int = LMAX_CAP,
                   tol: float = 1e-10, budget: int = 100_000) -> NormalizedSpectrum:
    """``g_inf(l) = beta0^-1 int beta_hat G_l dmu``, the limit of ``g_L(l) / v_L``."""
    if report.regime not in (HIGH, SPARSE):
        raise PreconditionError("limit spectrum needs the sparse or high-disorder regime")
    if not report.nu < d / 2.0:
        raise PreconditionError("beta is not integrable for nu >= d/2")
    rule = graded_rule(d, _singular_rule(report, 1, d), lmax, depth_below=1.0)
    lim = beta_limit(kernel, report, rule, tol=tol, budget=budget, d=d)
    table = gegenbauer_table(lmax, d, rule.nodes)
    g = table @ (rule.weights * lim.beta_hat) / report.beta0
    g[0] = 0.0
    return NormalizedSpectrum(d, None, g, 1.0)


def beth_constant(kernel: Kernel, report: RegimeReport, q: int, d: int, tol: float = 1e-10,
                  budget: int = 100_000) -> float:
    """``beta0^-q int beta_hat^q dmu`` for ``q < d / (2 nu)``."""
    nu = report.nu
    if nu is None or not q < d / (2.0 * nu):
        raise PreconditionError("beta_hat^q is integrable only for q < d/(2 nu)")
    rule = graded_rule(d, _singular_rule(report, q, d), depth_below=1.0)
    lim = beta_limit(kernel, report, rule, tol=tol, budget=budget, d=d)
    return rule.integrate(lim.beta_hat**q) / report.beta0**q


def moment_rate_prediction(report: RegimeReport, q: int, d: int, kernel: Kernel | None = None,
                           **kwargs) -> MomentRate:
    """Asymptotic class of ``int kappa_hat_L^q dmu`` and, below threshold, its constant."""
    if report.regime not in (HIGH, SPARSE):
        raise PreconditionError("rate prediction needs the sparse or high-disorder regime")
    thr = d / (2.0 * report.nu)
    v = "lambda^L" if report.regime == HIGH else "L^-1"
    zero = kernel is not None and kernel.parity == _backend.PARITY_ODD and q % 2 == 1
    if zero:
        return MomentRate("identically-zero", q, thr, "0 (kappa and q odd)", 0.0, True)
    if abs(q - thr) < 1e-9:
        return MomentRate("critical", q, thr, f"v_L^{q} log(1/v_L), v_L = {v}")
    if q < thr:
        const = beth_constant(kernel, report, q, d, **kwargs) if kernel is not None else None
        return MomentRate("beta-limit", q, thr, f"beth_{q} v_L^{q}, v_L = {v}", const)
    return MomentRate("supercritical", q, thr, f"v_L^{thr:.6g}, v_L = {v}")
