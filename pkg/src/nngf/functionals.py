"""Wiener-chaos analysis of integral functionals ``F_L = int phi(T_L(x)) dx``.

``phi(x) = sum_q phi_q H_q(x)`` with probabilists' Hermite polynomials and
``phi_q = E[phi(Z) H_q(Z)] / q!``.  The ``q``-th chaos of ``F_L`` has variance
``q! phi_q^2 omega_d^2 int kappa_hat_L^q dmu``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln, ndtr, roots_hermitenorm, roots_legendre

from nngf import _backend
from nngf.dynamics import HIGH, LOW, SPARSE, RegimeReport
from nngf.errors import (
    ExcludedCaseError,
    NotAdmissibleError,
    PreconditionError,
    RankError,
    TruncationError,
    UnderResolvedError,
    ValidationError,
)
from nngf.kernel import Kernel
from nngf.quadrature import mu_quadrature, sphere_area
from nngf.spectral import (
    NormalizedSpectrum,
    beth_constant,
    eigenspace_dims,
    gegenbauer_table,
    limit_spectrum,
    normalized_kernel,
)

Q_MAX = 40
NONZERO = 1e-13
WARN_BAND = 1e-9
ADMISSIBLE_CAP = 1e6


def hermite_poly(q: int, x):
    """Probabilists' Hermite polynomial ``H_q(x)``."""
    if q < 0:
        raise ValidationError("q must be >= 0")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if q == 0:
        return prev
    for k in range(1, q):
        prev, cur = cur, x * cur - k * prev
    return cur


def _gauss_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Observable:
    """A real function of the field value, with enough structure to expand it."""

    kind: str
    level: float = 0.0
    order: int = 0
    func: Callable | None = None
    breakpoints: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "excursion":
            return (x >= self.level).astype(float)
        if self.kind == "hermite":
            return hermite_poly(self.order, x)
        return np.asarray(self.func(x), dtype=float)

    def to_dict(self) -> dict:
        if self.kind == "excursion":
            return {"kind": "excursion", "level": self.level}
        if self.kind == "hermite":
            return {"kind": "hermite", "order": self.order}
        return {"kind": "custom"}


def excursion(level: float) -> Observable:
    """Indicator ``1{x >= level}``."""
    if not math.isfinite(level):
        raise ValidationError("level must be finite")
    return Observable("excursion", level=float(level))


def hermite_monomial(q: int) -> Observable:
    if q < 0:
        raise ValidationError("q must be >= 0")
    return Observable("hermite", order=int(q))


def custom(func: Callable, breakpoints=()) -> Observable:
    """Arbitrary observable; list its discontinuities in ``breakpoints``."""
    return Observable("custom", func=func, breakpoints=tuple(sorted(float(b) for b in breakpoints)))


def observable_from_dict(spec: dict) -> Observable:
    kind = spec.get("kind")
    if kind == "excursion":
        return excursion(spec["level"])
    if kind == "hermite":
        return hermite_monomial(spec["order"])
    raise ValidationError(f"unknown observable kind {kind!r}")


@dataclass
class HermiteExpansion:
    observable: Observable
    coeffs: np.ndarray
    second_moment: float

    @property
    def q_max(self) -> int:
        return int(self.coeffs.size - 1)

    @property
    def chaos_weights(self) -> np.ndarray:
        """``q! phi_q^2``."""
        q = np.arange(self.coeffs.size)
        return np.exp(gammaln(q + 1)) * self.coeffs**2

    @property
    def tail_sum(self) -> float:
        """``sum_{q > q_max} q! phi_q^2`` by Parseval."""
        return max(0.0, self.second_moment - float(np.sum(self.chaos_weights)))

    @property
    def is_even(self) -> bool:
        return bool(np.all(np.abs(self.coeffs[1::2]) <= NONZERO))

    @property
    def is_odd(self) -> bool:
        return bool(np.all(np.abs(self.coeffs[2::2]) <= NONZERO))


def _excursion_coeffs(level, q_max):
    phi = np.empty(q_max + 1)
    phi[0] = 1.0 - ndtr(level)
    if q_max >= 1:
        # H_{q-1}(u) / sqrt((q-1)!) rows, then rescale by sqrt((q-1)!) / q!
        h = _backend.hermite_table(q_max - 1, np.array([level]), np.ones(1))[:, 0]
        q = np.arange(1, q_max + 1)
        scale = np.exp(0.5 * gammaln(q) - gammaln(q + 1))
        phi[1:] = _gauss_pdf(level) * h * scale
    return phi


def _panel_rule(breaks, n):
    edges = [-40.0] + [b for b in breaks if -40.0 < b < 40.0] + [40.0]
    xg, wg = roots_legendre(n)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * wg)
    return np.concatenate(xs), np.concatenate(ws)


def _quadrature_coeffs(observable, q_max, n):
    x, w = _panel_rule(observable.breakpoints, n)
    vals = observable(x)
    dens = _gauss_pdf(x)
    table = _backend.hermite_table(q_max, x, np.ones_like(x))
    proj = table @ (w * dens * vals)
    q = np.arange(q_max + 1)
    return proj * np.exp(-0.5 * gammaln(q + 1)), float(np.dot(w * dens, vals**2))


def hermite_expand(observable: Observable, q_max: int = Q_MAX, tol: float = 1e-12,
                   max_nodes: int = 1 << 15) -> HermiteExpansion:
    """Coefficients ``phi_q``, ``q <= q_max``.

    Excursions and Hermite monomials are exact; custom observables use
    Gauss-Legendre panels on ``[-40, 40]`` split at their breakpoints, doubling
    until the coefficients are stable to ``tol``.
    """
    if q_max < 1:
        raise ValidationError("q_max must be >= 1")
    if observable.kind == "excursion":
        coeffs = _excursion_coeffs(observable.level, q_max)
        return HermiteExpansion(observable, coeffs, float(coeffs[0]))
    if observable.kind == "hermite":
        coeffs = np.zeros(max(q_max, observable.order) + 1)
        coeffs[observable.order] = 1.0
        return HermiteExpansion(observable, coeffs, math.factorial(observable.order))
    n = 64
    prev, _ = _quadrature_coeffs(observable, q_max, n)
    while True:
        n *= 2
        cur, m2 = _quadrature_coeffs(observable, q_max, n)
        if np.max(np.abs(cur - prev)) < tol:
            return HermiteExpansion(observable, cur, m2)
        if n >= max_nodes:
            raise UnderResolvedError(f"Hermite projections not stable at {n} nodes per panel")
        prev = cur


def gauss_hermite_check(observable: Observable, q_max: int, n: int = 200) -> np.ndarray:
    """``phi_q`` by plain Gauss-Hermite quadrature (for cross-checks of smooth observables)."""
    x, w = roots_hermitenorm(n)
    w = w / math.sqrt(2.0 * math.pi)
    vals = observable(x)
    out = np.empty(q_max + 1)
    for q in range(q_max + 1):
        out[q] = np.dot(w, vals * hermite_poly(q, x)) / math.factorial(q)
    return out


def _kappa_odd(kernel: Kernel) -> bool:
    return kernel.parity == _backend.PARITY_ODD


def _is_nonzero(value, q):
    a = abs(value)
    if a > WARN_BAND:
        return True
    if a > NONZERO:
        warnings.warn(f"phi_{q} = {value:.3g} lies in the rounding band; treated as nonzero",
                      RuntimeWarning, stacklevel=3)
        return True
    return False


def hermite_rank(expansion: HermiteExpansion, kernel: Kernel, d: int) -> int:
    """Smallest ``q >= 2`` with ``phi_q != 0`` and ``Var(F_1[q]) != 0``."""
    odd = _kappa_odd(kernel)
    if odd and expansion.is_odd:
        raise ExcludedCaseError("odd observable with odd kernel: the functional degenerates")
    nk = normalized_kernel(kernel, 1, d)
    for q in range(2, expansion.q_max + 1):
        if not _is_nonzero(expansion.coeffs[q], q):
            continue
        if odd and q % 2 == 1:
            continue
        moment = nk.rule.integrate(nk.values**q)
        if moment > NONZERO:
            return q
    raise RankError(f"no nonzero chaos up to q_max = {expansion.q_max}")


def _moments(nk, qs):
    vals = nk.values
    return {q: (nk.rule.integrate(vals**q), nk.rule.integrate(np.abs(vals) ** q)) for q in qs}


def _chaos_var(expansion, q, moment, odd, omega):
    if q >= expansion.coeffs.size or expansion.coeffs[q] == 0.0 or (odd and q % 2 == 1):
        return 0.0
    return max(0.0, math.factorial(q) * expansion.coeffs[q] ** 2 * omega**2 * moment)


def chaos_variance(expansion: HermiteExpansion, kernel: Kernel, L: int, d: int, q: int) -> float:
    """``Var(F_L[q]) = q! phi_q^2 omega_d^2 int kappa_hat_L^q dmu``."""
    if q < 2:
        raise ValidationError("q must be >= 2")
    odd = _kappa_odd(kernel)
    if q >= expansion.coeffs.size or expansion.coeffs[q] == 0.0 or (odd and q % 2 == 1):
        return 0.0
    nk = normalized_kernel(kernel, L, d)
    return _chaos_var(expansion, q, _moments(nk, [q])[q][0], odd, sphere_area(d))


@dataclass
class ChaosVarianceTable:
    d: int
    q_max: int
    rows: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    tail_bounds: dict = field(default_factory=dict)

    def to_records(self) -> list:
        return [{"L": L, "q": q, "variance": v} for L, q, v in self.rows]

    def variances(self, L: int) -> dict:
        return {q: v for LL, q, v in self.rows if LL == L}


def total_variance(expansion: HermiteExpansion, kernel: Kernel, L, d: int,
                   q_max: int | None = None) -> ChaosVarianceTable:
    """Chaos variances ``q = 2..q_max`` and their sum, per depth, with a tail bound.

    The tail bound is ``omega_d^2 sum_{q > q_max} q! phi_q^2 int |kappa_hat_L|^(q_max+1) dmu``.
    """
    depths = [int(L)] if np.isscalar(L) else [int(x) for x in L]
    q_max = expansion.q_max if q_max is None else min(int(q_max), expansion.q_max)
    omega = sphere_area(d)
    odd = _kappa_odd(kernel)
    tail_coeff = expansion.tail_sum + float(np.sum(expansion.chaos_weights[q_max + 1:]))
    table = ChaosVarianceTable(d, q_max)
    for depth in depths:
        nk = normalized_kernel(kernel, depth, d)
        mom = _moments(nk, range(2, q_max + 2))
        total = 0.0
        for q in range(2, q_max + 1):
            v = _chaos_var(expansion, q, mom[q][0], odd, omega)
            table.rows.append((depth, q, v))
            total += v
        bound = omega**2 * tail_coeff * mom[q_max + 1][1]
        if bound > 0.1 * total:
            raise TruncationError(f"tail bound {bound:.3g} exceeds 10% of {total:.3g} at L = {depth}")
        table.totals[depth] = total
        table.tail_bounds[depth] = bound
    return table


GAUSSIAN = "gaussian"
CRITICAL = "critical"
NON_CENTRAL = "non-central"
LOW_FUNCTIONAL = "low-disorder-functional"


@dataclass
class LimitPrediction:
    Q: int
    threshold: float | None
    case: str
    variance_rate: str
    wasserstein_rate: str
    sign: int | None = None
    beth: float | None = None
    limit_variance: float | None = None
    third_cumulant: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _first_nonzero(expansion):
    for q in range(2, expansion.q_max + 1):
        if _is_nonzero(expansion.coeffs[q], q):
            return q
    raise RankError("no nonzero coefficient with q >= 2")


def predict_limit(report: RegimeReport, expansion: HermiteExpansion, d: int,
                  kernel: Kernel | None = None, rank: int | None = None,
                  lmax: int = 512) -> LimitPrediction:
    """Limit case and rate descriptors for ``F_L`` from the regime and the rank.

    With ``kernel`` the rank is computed exactly and, in the non-central case,
    the constant ``beth_Q``, the limit variance constant and (``Q = 2``) the
    third cumulant of ``sgn(phi_Q) Z_Q`` are evaluated.
    """
    if rank is not None:
        Q = int(rank)
    elif kernel is not None:
        Q = hermite_rank(expansion, kernel, d)
    else:
        Q = _first_nonzero(expansion)
    if report.regime == LOW:
        return LimitPrediction(Q, None, LOW_FUNCTIONAL, "Var -> Var(F_inf) > 0",
                               "F_L -> F_inf in distribution")
    thr = d / (2.0 * report.nu)
    a = f"{thr:.6g}"
    if report.regime == HIGH:
        lam = f"{report.high.lam:.6g}"
        rates = {
            GAUSSIAN: (f"Var ≍ {lam}^({a} L)", f"dW ≲ L^(-{d / 4:g})"),
            CRITICAL: (f"Var ≍ {lam}^({a} L) L", "dW ≲ L^(-1/2)"),
            NON_CENTRAL: (f"Var ≍ {lam}^({Q} L)", "law -> sgn(phi_Q) Z_Q(beta_hat)"),
        }
    elif report.regime == SPARSE:
        rates = {
            GAUSSIAN: (f"Var ≍ L^(-{a})", f"dW ≲ (log L)^(-{d / 4:g})"),
            CRITICAL: (f"Var ≍ L^(-{a}) log L", "dW ≲ (log L)^(-1/2)"),
            NON_CENTRAL: (f"Var ≍ L^(-{Q})", "law -> sgn(phi_Q) Z_Q(beta_hat)"),
        }
    else:
        raise PreconditionError(f"unsupported regime {report.regime}")
    if abs(Q - thr) < 1e-9:
        case = CRITICAL
    elif Q > thr:
        case = GAUSSIAN
    else:
        case = NON_CENTRAL
    pred = LimitPrediction(Q, thr, case, *rates[case])
    if case == NON_CENTRAL:
        phiq = expansion.coeffs[Q]
        pred.sign = int(np.sign(phiq))
        if kernel is not None:
            omega = sphere_area(d)
            pred.beth = beth_constant(kernel, report, Q, d)
            pred.limit_variance = math.factorial(Q) * phiq**2 * omega**2 * pred.beth
            if Q == 2:
                stats = zq_spectral_stats(limit_spectrum(kernel, report, d, lmax), 2, d)
                pred.third_cumulant = pred.sign * abs(phiq) ** 3 * stats.third_cumulant
    return pred


@dataclass
class MalliavinSteinBound:
    bound: float
    N: int
    terms: list

    def to_dict(self) -> dict:
        return {"bound": self.bound, "N": self.N,
                "terms": [{"q": q, "M_q": m, "r": r} for q, m, r in self.terms]}


def malliavin_stein_bound(expansion: HermiteExpansion, kernel: Kernel, L: int, d: int,
                          N: int) -> MalliavinSteinBound:
    """``4 N sum_q 9^q q! M_q`` for the variance-normalized truncation at order ``N``.

    ``M_q^2 <= 2 omega^4 c_q^4 max_r m_q m_r m_{q-r}`` with
    ``m_k = int |kappa_hat_L|^k dmu`` and ``c_q = phi_q / sd(F_{L,N})``.
    """
    Q = hermite_rank(expansion, kernel, d)
    if N < Q:
        raise PreconditionError(f"N = {N} below the Hermite rank {Q}: empty sum")
    if N > expansion.q_max:
        raise ValidationError("N exceeds the stored expansion order")
    omega = sphere_area(d)
    odd = _kappa_odd(kernel)
    nk = normalized_kernel(kernel, L, d)
    mom = _moments(nk, range(1, N + 1))
    var = sum(_chaos_var(expansion, q, mom[q][0], odd, omega) for q in range(2, N + 1))
    if var <= 0.0:
        raise RankError("truncated functional has zero variance")
    terms, total = [], 0.0
    for q in range(2, N + 1):
        if _chaos_var(expansion, q, mom[q][0], odd, omega) == 0.0:
            continue
        c4 = (expansion.coeffs[q] ** 2 / var) ** 2
        best, r_best = -1.0, 1
        for r in range(1, q):
            val = mom[q][1] * mom[r][1] * mom[q - r][1]
            if val > best:
                best, r_best = val, r
        m_q = math.sqrt(2.0 * omega**4 * c4 * best)
        terms.append((q, m_q, r_best))
        total += 9.0**q * math.factorial(q) * m_q
    return MalliavinSteinBound(4.0 * N * total, N, terms)


@dataclass
class ZQStats:
    Q: int
    variance: float
    third_cumulant: float | None
    skewness: float | None
    admissibility: float
    truncation: float
    lmax: int


def _poly_moment(coef, Q, d):
    lmax = coef.size - 1
    rule = mu_quadrature(d, (Q * lmax) // 2 + 2)
    f = coef @ gegenbauer_table(lmax, d, rule.nodes)
    return rule.integrate(f**Q)


def zq_spectral_stats(g, Q: int, d: int) -> ZQStats:
    """Variance, admissibility sum and (``Q = 2``) third cumulant of ``Z_Q``.

    ``g`` is a ``NormalizedSpectrum`` or an array ``g_l`` in the convention
    ``f = sum_l g_l n_l G_l`` (so ``g_l = int f G_l dmu``).  The truncation
    entry is the change of the admissibility sum when ``lmax`` is halved.
    """
    if Q < 2:
        raise ValidationError("Q must be >= 2")
    if isinstance(g, NormalizedSpectrum):
        if g.d != d:
            raise ValidationError("spectrum dimension does not match d")
        g = g.g
    g = np.asarray(g, dtype=float).copy()
    if g.ndim != 1 or g.size < 2:
        raise ValidationError("g must be a sequence indexed from l = 0")
    g[0] = 0.0
    n = eigenspace_dims(g.size - 1, d)
    omega = sphere_area(d)
    variance = math.factorial(Q) * omega**2 * _poly_moment(g * n, Q, d)
    adm = _poly_moment(np.abs(g) * n, Q, d)
    if not math.isfinite(adm) or adm > ADMISSIBLE_CAP:
        raise NotAdmissibleError(f"admissibility sum {adm:.3g} exceeds {ADMISSIBLE_CAP:g}")
    half = max(1, (g.size - 1) // 2)
    trunc = abs(adm - _poly_moment((np.abs(g) * n)[: half + 1], Q, d))
    cum3 = skew = None
    if Q == 2:
        cum3 = 8.0 * float(np.sum((omega * g) ** 3 * n))
        skew = cum3 / variance**1.5 if variance > 0 else None
    return ZQStats(Q, variance, cum3, skew, adm, trunc, g.size - 1)
