"""Regime classification and renormalized deep iterates.

The slope ``kappa'(1)`` splits kernels into three regimes.  In each regime
the iterates ``kappa_L`` admit an exact renormalization ``beta_L`` whose
limit controls the asymptotics of every functional downstream:

* low disorder (``kappa'(1) < 1``): ``beta_L = (kappa_L - 1) / kappa'(1)^L``
* high disorder (``kappa'(1) > 1``): ``beta_L = (kappa_L - b) / lambda^L`` with
  ``b`` the interior fixed point and ``lambda = kappa'(b)``
* sparse (``kappa'(1) = 1``): ``beta_L = L^(rho+1) (kappa_L - 1 + beta0 L^-rho
  - beta1 L^-(rho+1) log L)``
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from nngf.errors import (
    AssumptionViolationError,
    ConvergenceError,
    DepthLimitError,
    ExcludedCaseError,
    PreconditionError,
    SingularityError,
    UnclassifiableError,
    ValidationError,
)
from nngf.kernel import Kernel, KernelState, advance, boundary_constants
from nngf.quadrature import QuadratureRule

REGIME_TOL = 1e-9
LOG_FLOAT_MAX = 700.0

LOW = "low-disorder"
SPARSE = "sparse"
HIGH = "high-disorder"


@dataclass(frozen=True)
class HighDisorderParams:
    b: float
    lam: float
    nu: float
    rho: float
    kprime1: float

    @property
    def beta0(self) -> float:
        return 1.0 - self.b


@dataclass(frozen=True)
class SparseParams:
    gamma1: float
    c1: float
    gamma2: float
    c2: float
    gamma3: float
    c3: float
    A0: float
    A1: float
    nu: float
    rho: float
    beta0: float
    beta1: float
    case: str
    method: str


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    kprime1: float
    high: HighDisorderParams | None = None
    sparse: SparseParams | None = None

    @property
    def nu(self) -> float | None:
        if self.high is not None:
            return self.high.nu
        if self.sparse is not None:
            return self.sparse.nu
        return None

    @property
    def beta0(self) -> float | None:
        if self.high is not None:
            return self.high.beta0
        if self.sparse is not None:
            return self.sparse.beta0
        return None

    @property
    def anchor(self) -> float | None:
        """Interior fixed point used for anchored iteration, if any."""
        return self.high.b if self.high is not None else None

    def scale(self, L: int) -> float:
        """``v_L``: ``lambda^L`` (high), ``1/L`` (sparse), ``kappa'(1)^L`` (low)."""
        if self.regime == HIGH:
            return self.high.lam**L
        if self.regime == SPARSE:
            return 1.0 / L
        return self.kprime1**L

    def structure_scale(self, L: int) -> float:
        """Width in ``1 - u`` of the boundary layer of ``kappa_L`` at ``u = 1``."""
        if self.regime == HIGH:
            return math.exp(-L * math.log(self.kprime1))
        if self.regime == SPARSE:
            return min(1.0, self.sparse.beta0 * L ** (-self.sparse.rho))
        return 1.0

    def to_dict(self) -> dict:
        out = {"regime": self.regime, "kprime1": self.kprime1}
        if self.high is not None:
            out.update(asdict(self.high))
            out["beta0"] = self.high.beta0
        if self.sparse is not None:
            out.update(asdict(self.sparse))
        return out


def high_disorder_params(kernel: Kernel, tol: float = REGIME_TOL) -> HighDisorderParams:
    """Interior fixed point ``b``, ``lambda = kappa'(b)``, ``nu`` and ``rho``.

    ``b`` is found by bisection of ``kappa(u) - u`` on ``[0, 1 - 1e-8]``.
    """
    kp1 = kernel.kprime1
    if not kp1 > 1.0 + tol:
        raise PreconditionError(f"kappa'(1) = {kp1} is not > 1")

    def f(u):
        return float(kernel(np.array([u]))[0]) - u

    lo, hi = 0.0, 1.0 - 1e-8
    if f(lo) <= 0.0:
        b = 0.0
    else:
        if f(hi) >= 0.0:
            raise UnclassifiableError("no sign change of kappa(u) - u on [0, 1)")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 2.0 * np.finfo(float).eps * hi:
                break
        b = lo if abs(f(lo)) <= abs(f(hi)) else hi
    lam = float(kernel.derivative(np.array([b]))[0])
    if lam < 1e-10:
        raise ExcludedCaseError("superattractive fixed point kappa'(b) = 0 (possible only if b = 0)")
    nu = -math.log(lam) / math.log(kp1)
    return HighDisorderParams(b, lam, nu, 1.0 / nu, kp1)


def sparse_params(kernel: Kernel, tol: float = REGIME_TOL) -> SparseParams:
    """Boundary exponents and the limit constants of the sparse regime."""
    kp1 = kernel.kprime1
    if abs(kp1 - 1.0) > tol:
        raise PreconditionError(f"kappa'(1) = {kp1} is not 1")
    bc = boundary_constants(kernel)
    g1, c1, g2, c2 = bc.gamma1, bc.c1, bc.gamma2, bc.c2
    if not (1.0 < g1 <= 2.0) or not c1 > 0.0:
        raise AssumptionViolationError(f"leading boundary term gamma1={g1}, c1={c1} out of range")
    if abs(g2 - (2.0 * g1 - 1.0)) < 1e-9:
        case = "B"
    elif g2 > 2.0 * g1 - 1.0:
        case = "A"
    else:
        raise AssumptionViolationError(f"gamma2 = {g2} < 2 gamma1 - 1")
    A0 = c1 * (g1 - 1.0)
    A1 = g1 * c1 / 2.0 + (c2 / c1 if case == "B" else 0.0)
    nu = g1 - 1.0
    rho = 1.0 / nu
    log_beta0 = -rho * math.log(A0)
    if log_beta0 > LOG_FLOAT_MAX:
        raise AssumptionViolationError(f"c1 = {c1:.3g} too small: beta0 overflows")
    beta0 = math.exp(log_beta0)
    beta1 = beta0 * A1 * rho / A0
    return SparseParams(g1, c1, g2, c2, bc.gamma3, bc.c3, A0, A1, nu, rho, beta0, beta1,
                        case, bc.method)


def classify_regime(kernel: Kernel, tol: float = REGIME_TOL) -> RegimeReport:
    """Regime of ``kernel`` with the parameter block of that regime."""
    kp1 = kernel.kprime1
    if not math.isfinite(kp1):
        raise ValidationError("kappa'(1) is not finite")
    if kp1 < 1.0 - tol:
        return RegimeReport(LOW, kp1)
    if kp1 > 1.0 + tol:
        return RegimeReport(HIGH, kp1, high=high_disorder_params(kernel, tol))
    try:
        sp = sparse_params(kernel, tol)
    except AssumptionViolationError as exc:
        raise UnclassifiableError(f"sparse kernel fails the boundary assumption: {exc}") from exc
    return RegimeReport(SPARSE, kp1, sparse=sp)


@dataclass
class RenormalizedIterate:
    depth: int
    nodes: np.ndarray
    values: np.ndarray
    gap: np.ndarray


def max_safe_depth(report: RegimeReport) -> int | None:
    """Largest depth for which the renormalizing factor stays finite."""
    if report.regime == HIGH:
        return int(LOG_FLOAT_MAX / -math.log(report.high.lam))
    if report.regime == LOW:
        return int(LOG_FLOAT_MAX / -math.log(report.kprime1)) if report.kprime1 > 0 else None
    return None


def _check_depth(report, L):
    cap = max_safe_depth(report)
    if cap is not None and L > cap:
        raise DepthLimitError(f"renormalization overflows beyond L = {cap}")


def _node_state(nodes, report):
    if isinstance(nodes, QuadratureRule):
        return nodes.nodes, nodes.initial_state(report.anchor)
    x = np.asarray(nodes, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValidationError("nodes must lie in [-1, 1]")
    return x, KernelState.from_values(x, report.anchor)


def _renormalize(report, state, L):
    if report.regime == LOW:
        return -state.ones_gap() / report.kprime1**L
    if report.regime == HIGH:
        return state.deviations() / report.high.lam**L
    sp = report.sparse
    t = state.ones_gap()
    logL = math.log(L)
    return L ** (sp.rho + 1.0) * (-t + sp.beta0 * L ** (-sp.rho)
                                  - sp.beta1 * L ** (-sp.rho - 1.0) * logL)


def beta_iterate(kernel: Kernel, report: RegimeReport, L: int, nodes) -> RenormalizedIterate:
    """``beta_L`` on ``nodes`` (array or ``QuadratureRule``) with the gap to ``beta_{L-1}``."""
    if L < 1:
        raise ValidationError("L must be >= 1")
    _check_depth(report, L)
    x, state = _node_state(nodes, report)
    prev = advance(kernel, state, L - 1)
    cur = advance(kernel, prev, 1)
    b_prev = _renormalize(report, prev, L - 1) if L > 1 else None
    b_cur = _renormalize(report, cur, L)
    gap = np.abs(b_cur - b_prev) if b_prev is not None else np.full_like(b_cur, np.inf)
    return RenormalizedIterate(L, x, b_cur, gap)


@dataclass
class SparseIterate:
    depth: int
    nodes: np.ndarray
    values: np.ndarray
    saturated: np.ndarray


def s_iterate_sparse(kernel: Kernel, params: SparseParams, L: int, nodes) -> SparseIterate:
    """``S_L = (1 - kappa_L)^(1 - gamma1) - A0 L - A1 log L``.

    Nodes within rounding of 1 are flagged as saturated.
    """
    x = np.asarray(nodes, dtype=float)
    if np.any(x >= 1.0):
        raise SingularityError("S_L is singular at u = 1")
    if np.any(x < -1.0):
        raise ValidationError("nodes must lie in [-1, 1)")
    state = advance(kernel, KernelState.from_values(x), L)
    t = state.ones_gap()
    vals = t ** (1.0 - params.gamma1) - params.A0 * L - params.A1 * math.log(L)
    saturated = (1.0 - x) < 64.0 * np.finfo(float).eps
    return SparseIterate(L, x, vals, saturated)


@dataclass
class BetaLimit:
    nodes: np.ndarray
    values: np.ndarray
    depth: int
    gap: np.ndarray
    converged: bool
    integral: float | None = None
    beta_hat: np.ndarray | None = None
    integrable: bool | None = None


def beta_limit(
    kernel: Kernel,
    report: RegimeReport,
    nodes,
    tol: float = 1e-10,
    budget: int = 100_000,
    d: int | None = None,
    check_every: int = 1,
) -> BetaLimit:
    """Cauchy-stopped limit ``beta = lim beta_L`` on ``nodes``.

    Stops once ``|beta_L - beta_{L-1}| <= tol * max(1, |beta_L|)`` at every node.

    When ``nodes`` is a ``QuadratureRule`` and ``beta`` is integrable against
    ``mu_d`` (``nu < d/2``), the mean ``int beta dmu`` and ``beta_hat`` are
    returned as well.
    """
    x, state = _node_state(nodes, report)
    edge = np.minimum(state.t, 1.0) if isinstance(nodes, QuadratureRule) else 1.0 - np.abs(x)
    if report.regime != LOW and np.any(edge <= 0.0):
        raise SingularityError("renormalized limits are singular at +-1; use interior nodes")
    cap = max_safe_depth(report)
    limit = budget if cap is None else min(budget, cap)
    state = advance(kernel, state, 1)
    prev = _renormalize(report, state, 1)
    gap = np.full_like(prev, np.inf)
    L = 1
    converged = False
    while L < limit:
        step = min(check_every, limit - L)
        state = advance(kernel, state, step)
        L += step
        cur = _renormalize(report, state, L)
        gap = np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))
        prev = cur
        if np.max(gap) < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"beta_L not converged by L = {L}; last gap {np.max(gap):.3g}")
    out = BetaLimit(x, prev, L, gap, True)
    if isinstance(nodes, QuadratureRule):
        dim = nodes.d if d is None else d
        nu = report.nu
        integrable = report.regime == LOW or (nu is not None and nu < dim / 2.0)
        out.integrable = integrable
        if integrable:
            out.integral = nodes.integrate(prev)
            out.beta_hat = prev - out.integral
    return out
