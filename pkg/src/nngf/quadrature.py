"""Quadrature against the projected sphere measure ``mu_d`` on ``[-1, 1]``.

``mu_d`` has density proportional to ``(1 - u^2)^(d/2 - 1)`` and total mass 1.
Two families of rules are provided: Gauss-Jacobi (polynomial exactness) and a
composite rule in the angle ``theta = arccos u`` whose panels shrink
geometrically towards ``u = +-1``, for integrands with structure at a tiny
scale near the poles.  Rules carry ``1 - u`` and ``1 + u`` computed from the
angle so that complements near the poles keep full relative precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre

from nngf.errors import ValidationError


def sphere_area(d: int) -> float:
    """Surface measure ``omega_d`` of the unit sphere ``S^d`` in ``R^(d+1)``."""
    if d < 1:
        raise ValidationError("d must be >= 1")
    return _sphere_area(int(d))


@lru_cache(maxsize=None)
def _sphere_area(d):
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.exp(gammaln((d + 1) / 2.0))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and probability weights for ``mu_d``."""

    d: int
    nodes: np.ndarray
    weights: np.ndarray
    one_minus: np.ndarray
    one_plus: np.ndarray
    degree: int | None = None
    kind: str = "gauss-jacobi"

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def initial_state(self, anchor: float | None = None):
        """Kernel states ``(sign, t)`` for the nodes with exact complements."""
        from nngf.kernel import KernelState

        u = self.nodes
        sign = np.where(u < 0.0, -1.0, 1.0)
        t = np.where(u < 0.0, self.one_plus, self.one_minus)
        if anchor is None:
            return KernelState(sign, t, np.zeros_like(u), np.zeros_like(u), None)
        direct = (t >= 0.5 * (1.0 - anchor)).astype(float)
        delta = np.where(direct > 0, u - anchor, 0.0)
        return KernelState(sign, t, delta, direct, float(anchor))


def mu_quadrature(d: int, n_nodes: int) -> QuadratureRule:
    """Gauss-Jacobi rule for weight ``(1-u^2)^(d/2-1)`` renormalized to mass 1.

    Exact for polynomials of degree ``2 n_nodes - 1``.
    """
    if n_nodes < 2:
        raise ValidationError("n_nodes must be >= 2")
    if d < 2:
        raise ValidationError("d must be >= 2")
    return _mu_quadrature(int(d), int(n_nodes))


@lru_cache(maxsize=32)
def _mu_quadrature(d, n):
    a = d / 2.0 - 1.0
    x, w = roots_jacobi(n, a, a)
    w = w / math.fsum(w)
    x.setflags(write=False)
    w.setflags(write=False)
    one_minus = 1.0 - x
    one_plus = 1.0 + x
    return QuadratureRule(d, x, w, one_minus, one_plus, 2 * n - 1, "gauss-jacobi")


def _theta_panels(lo, hi, count):
    edges = np.linspace(lo, hi, count + 1)
    return list(zip(edges[:-1], edges[1:]))


def graded_rule(
    d: int,
    scale: float = 1.0,
    lmax: int = 0,
    panel_nodes: int = 16,
    grade_minus: bool = True,
    depth_below: float = 1e-6,
) -> QuadratureRule:
    """Composite Gauss-Legendre rule in ``theta`` graded towards both poles.

    ``scale`` is the smallest structural scale in ``t = 1 - |u|``; panels
    shrink by factors of 2 in ``theta`` down to ``t = scale * depth_below``.
    The middle section has enough panels to integrate Gegenbauer products up
    to degree ``2 * lmax``.
    """
    if d < 2:
        raise ValidationError("d must be >= 2")
    scale = float(min(max(scale, 1e-300), 1.0))
    theta_min = math.sqrt(2.0 * scale * depth_below)
    theta_a = min(0.25 * math.pi, max(theta_min * 2.0, 0.25))
    panels = []
    width = min(0.25, 8.0 / (lmax + 1.0)) if lmax > 0 else 0.25
    if theta_min < theta_a:
        n_geo = int(math.ceil(math.log2(theta_a / theta_min)))
        edges = [0.0] + [theta_a * 2.0 ** (-k) for k in range(n_geo, -1, -1)]
        left = []
        for a, b in zip(edges[:-1], edges[1:]):
            # graded panels must also resolve the Gegenbauer oscillations
            left += _theta_panels(a, b, max(1, int(math.ceil((b - a) / width))))
    else:
        left = _theta_panels(0.0, theta_a, max(1, int(math.ceil(theta_a / width))))
    n_mid = max(8, int(math.ceil((math.pi - 2.0 * theta_a) / width)))
    middle = _theta_panels(theta_a, math.pi - theta_a, n_mid)
    if grade_minus:
        right = [(math.pi - b, math.pi - a) for a, b in reversed(left)]
    else:
        right = [(math.pi - theta_a, math.pi)]
    panels = left + middle + right
    return _assemble(d, tuple(panels), panel_nodes)


@lru_cache(maxsize=32)
def _assemble(d, panels, panel_nodes):
    xg, wg = roots_legendre(panel_nodes)
    th, w = [], []
    for a, b in panels:
        th.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        w.append(0.5 * (b - a) * wg)
    th = np.concatenate(th)
    w = np.concatenate(w)
    half = 0.5 * th
    # dmu = sin^(d-1)(theta) dtheta / Z with Z = omega_d / omega_{d-1}
    z = sphere_area(d) / sphere_area(d - 1)
    w = w * np.sin(th) ** (d - 1) / z
    one_minus = 2.0 * np.sin(half) ** 2
    one_plus = 2.0 * np.cos(half) ** 2
    u = np.cos(th)
    order = np.argsort(u)
    u, w, one_minus, one_plus = u[order], w[order], one_minus[order], one_plus[order]
    for arr in (u, w, one_minus, one_plus):
        arr.setflags(write=False)
    return QuadratureRule(d, u, w, one_minus, one_plus, None, "graded")
