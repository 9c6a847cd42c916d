"""Monte Carlo simulation of normalized deep fields and their functionals.

Fields on ``S^2`` are synthesized from real spherical harmonics; a Cholesky
sampler covers arbitrary dimensions and point sets.  For ``phi = H_2`` an exact
spectral sampler is available, which needs no spatial resolution at all.
All randomness comes from :func:`nngf.rng.stream` keyed by
``(seed, L, replicate)``, so results do not depend on the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from nngf import _backend
from nngf.dynamics import HIGH, classify_regime
from nngf.errors import (
    NotPSDError,
    PreconditionError,
    TruncationError,
    UnderResolvedError,
    UnsupportedKernelError,
    ValidationError,
)
from nngf.functionals import HermiteExpansion, Observable, hermite_expand, hermite_poly, total_variance
from nngf.kernel import ActivationSpec, Kernel
from nngf.quadrature import sphere_area
from nngf.rng import stream
from nngf.spectral import (
    LMAX_CAP,
    NormalizedSpectrum,
    eigenspace_dims,
    normalized_kernel,
    normalized_spectrum,
    power_spectrum,
)

GRID_KINDS = ("fibonacci-s2", "random-uniform", "gauss-product-s2")
METHODS = ("auto", "spectral-s2", "spectral-chi2", "cholesky")
JITTERS = (1e-12, 1e-10, 1e-8)
CHOLESKY_MAX = 4096
SYNTH_TAIL_TOL = 1e-3
SYNTH_TAIL_TARGET = 1e-4
BATCH = 32
MIN_RINGS = 128
TABLE_CACHE_BYTES = 1 << 28


@dataclass
class SphereGrid:
    d: int
    points: np.ndarray
    weights: np.ndarray
    kind: str
    ring_z: np.ndarray | None = None
    n_lon: int | None = None

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def integrate(self, values) -> np.ndarray:
        return np.asarray(values) @ self.weights


def _fibonacci(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = math.pi * (3.0 - math.sqrt(5.0)) * np.arange(n)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def ring_grid(n_lat: int, n_lon: int | None = None) -> SphereGrid:
    """Gauss-Legendre latitudes times uniform longitudes on ``S^2``."""
    if n_lat < 2:
        raise ValidationError("need at least 2 latitudes")
    n_lon = 2 * n_lat if n_lon is None else int(n_lon)
    z, wz = roots_legendre(n_lat)
    lon = 2.0 * math.pi * np.arange(n_lon) / n_lon
    r = np.sqrt(1.0 - z * z)
    pts = np.stack([np.outer(r, np.cos(lon)), np.outer(r, np.sin(lon)),
                    np.repeat(z[:, None], n_lon, axis=1)], axis=-1).reshape(-1, 3)
    w = np.repeat(wz * (2.0 * math.pi / n_lon), n_lon)
    return SphereGrid(2, pts, w, "gauss-product-s2", z, n_lon)


def sphere_grid(d: int, n: int, kind: str = "fibonacci-s2", seed: int | None = None) -> SphereGrid:
    """Integration grid on ``S^d`` with weights summing to ``omega_d``."""
    if n < 10:
        raise ValidationError("n must be >= 10")
    if kind not in GRID_KINDS:
        raise ValidationError(f"unknown grid kind {kind!r}")
    if kind != "random-uniform" and d != 2:
        raise ValidationError(f"{kind} exists only for d = 2")
    omega = sphere_area(d)
    if kind == "fibonacci-s2":
        return SphereGrid(2, _fibonacci(n), np.full(n, omega / n), kind)
    if kind == "gauss-product-s2":
        n_lat = max(2, int(math.ceil(math.sqrt(n / 2.0))))
        return ring_grid(n_lat)
    rng = stream(0 if seed is None else seed)
    x = rng.standard_normal((n, d + 1))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return SphereGrid(d, x, np.full(n, omega / n), kind)


@dataclass
class FieldSample:
    grid: SphereGrid
    values: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)


class SpectralSynthesizer:
    """Batched real-harmonic synthesis of ``sum sqrt(omega g_l) zeta_lm Y_lm`` on a grid.

    Spectral mass above ``lmax`` is folded into the ``lmax`` shell so that
    every point keeps unit variance.
    """

    def __init__(self, spectrum: NormalizedSpectrum, grid: SphereGrid, lmax: int | None = None,
                 tail_tol: float = SYNTH_TAIL_TOL):
        if spectrum.d != 2 or grid.d != 2:
            raise ValidationError("spectral synthesis is implemented on S^2 only")
        g = np.maximum(np.asarray(spectrum.g, dtype=float), 0.0)
        dims = eigenspace_dims(g.size - 1, 2)
        mass = np.cumsum(g * dims)
        if lmax is None:
            lmax = default_lmax(spectrum)
        lmax = int(lmax)
        if not 1 <= lmax <= min(LMAX_CAP, g.size - 1):
            raise ValidationError(f"lmax must lie in [1, {min(LMAX_CAP, g.size - 1)}]")
        tail = 1.0 - mass[lmax]
        if tail > tail_tol:
            raise TruncationError(f"spectral mass {tail:.3g} above lmax = {lmax} exceeds {tail_tol:g}")
        self.grid = grid
        self.lmax = lmax
        self.folded = max(0.0, tail)
        g = g[: lmax + 1].copy()
        g[lmax] += self.folded / dims[lmax]
        self.n_lm = (lmax + 1) * (lmax + 2) // 2
        amp = np.sqrt(g * sphere_area(2))
        self.amp = np.concatenate([amp[m:] for m in range(lmax + 1)])
        self.starts = [m * (lmax + 1) - m * (m - 1) // 2 for m in range(lmax + 2)]
        self._split = None
        if grid.ring_z is not None:
            self._prepare_rings()
        else:
            self._phi = np.arctan2(grid.points[:, 1], grid.points[:, 0])
            self._z = grid.points[:, 2]

    def _prepare_rings(self):
        z = self.grid.ring_z
        n_lat = z.size
        # z ascending: rows n_lat-1-j carry z >= 0 and mirror row j
        self._north = np.arange(n_lat - 1, n_lat // 2 - 1, -1)
        self._south = n_lat - 1 - self._north
        zn = z[self._north]
        self._zn = zn
        self._sn = np.sqrt(np.maximum(0.0, (1.0 - zn) * (1.0 + zn)))
        if 8 * self.n_lm * zn.size <= TABLE_CACHE_BYTES:
            self._split = self._split_table(slice(None))

    def _split_table(self, sl):
        # per m: (even, odd) rows in l - m, transposed to (latitude, l)
        tab = _backend.legendre_table(self.lmax, self._zn[sl], self._sn[sl])
        out = []
        for m in range(self.lmax + 1):
            t = tab[self.starts[m]:self.starts[m + 1]]
            out.append((np.ascontiguousarray(t[0::2].T), np.ascontiguousarray(t[1::2].T)))
        return out

    def draw(self, rngs) -> np.ndarray:
        """Field values, one row per generator in ``rngs``."""
        B = len(rngs)
        a = np.empty((self.n_lm, B))
        b = np.empty((self.n_lm, B))
        for j, rng in enumerate(rngs):
            a[:, j] = rng.standard_normal(self.n_lm)
            b[:, j] = rng.standard_normal(self.n_lm)
        a *= self.amp[:, None]
        b *= self.amp[:, None]
        if self.grid.ring_z is not None:
            return self._rings(a, b)
        return self._points(a, b)

    def _rings(self, a, b):
        B = a.shape[1]
        n_lat = self.grid.ring_z.size
        n_lon = self.grid.n_lon
        n_half = self._zn.size
        real = 2 * self.lmax < n_lon
        coef = np.zeros((n_lat, n_lon // 2 + 1 if real else n_lon, B), dtype=complex)
        chunk = n_half if self._split is not None else max(1, (1 << 25) // (8 * self.n_lm))
        s2 = math.sqrt(2.0)
        for c0 in range(0, n_half, chunk):
            sl = slice(c0, min(n_half, c0 + chunk))
            split = self._split if self._split is not None else self._split_table(sl)
            north, south = self._north[sl], self._south[sl]
            mirror = north != south
            for m in range(self.lmax + 1):
                r0, r1 = self.starts[m], self.starts[m + 1]
                te, to = split[m]
                scale = 1.0 if m == 0 else s2
                am = a[r0:r1]
                ea = te @ am[0::2]
                oa = to @ am[1::2] if to.shape[1] else 0.0
                cn = (ea + oa) * scale
                cs = (ea - oa) * scale
                if m > 0:
                    bm = b[r0:r1]
                    eb = te @ bm[0::2]
                    ob = to @ bm[1::2] if to.shape[1] else 0.0
                    cn = cn - 1j * scale * (eb + ob)
                    cs = cs - 1j * scale * (eb - ob)
                k = m % n_lon
                coef[north, k] += cn
                coef[south[mirror], k] += cs[mirror]
        if real:
            coef[:, 1:] *= 0.5
            vals = np.fft.irfft(coef, n=n_lon, axis=1) * n_lon
        else:
            vals = np.real(np.fft.ifft(coef, axis=1)) * n_lon
        return vals.transpose(2, 0, 1).reshape(B, -1)

    def _points(self, a, b):
        B = a.shape[1]
        n = self.grid.size
        out = np.zeros((B, n))
        chunk = max(1, (1 << 25) // (8 * self.n_lm))
        s2 = math.sqrt(2.0)
        for c0 in range(0, n, chunk):
            sl = slice(c0, min(n, c0 + chunk))
            z = self._z[sl]
            tab = _backend.legendre_table(self.lmax, z, np.sqrt(np.maximum(0.0, (1.0 - z) * (1.0 + z))))
            phi = self._phi[sl]
            for m in range(self.lmax + 1):
                t = tab[self.starts[m]:self.starts[m + 1]].T
                if m == 0:
                    out[:, sl] += (t @ a[self.starts[0]:self.starts[1]]).T
                else:
                    r0, r1 = self.starts[m], self.starts[m + 1]
                    out[:, sl] += s2 * ((t @ a[r0:r1]).T * np.cos(m * phi)
                                        + (t @ b[r0:r1]).T * np.sin(m * phi))
        return out


def default_lmax(spectrum: NormalizedSpectrum) -> int:
    """Smallest ``l`` leaving spectral mass at most 1e-4 above it (or the stored maximum)."""
    mass = np.cumsum(np.maximum(spectrum.g, 0.0) * spectrum.dims)
    ok = np.flatnonzero(1.0 - mass <= SYNTH_TAIL_TARGET)
    return int(ok[0]) if ok.size else spectrum.lmax


def synthesize_field_s2(spectrum: NormalizedSpectrum, grid: SphereGrid, lmax: int | None = None,
                        seed: int = 0, tail_tol: float = SYNTH_TAIL_TOL) -> FieldSample:
    """One field draw on ``grid`` from the normalized spectrum."""
    synth = SpectralSynthesizer(spectrum, grid, lmax, tail_tol)
    vals = synth.draw([stream(seed)])[0]
    return FieldSample(grid, vals, "spectral-s2",
                       {"seed": seed, "lmax": synth.lmax, "folded_tail": synth.folded})


def _gram(kernel_hat, points):
    u = np.clip(points @ points.T, -1.0, 1.0)
    np.fill_diagonal(u, 1.0)
    return np.asarray(kernel_hat(u), dtype=float)


def cholesky_factor(gram: np.ndarray):
    """Lower factor of ``gram + jitter I`` with jitter escalation; returns (factor, jitter)."""
    n = gram.shape[0]
    for jitter in JITTERS:
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            continue
    raise NotPSDError(f"Gram matrix not positive definite with jitter {JITTERS[-1]:g}")


def sample_field_cholesky(kernel_hat, points, seed: int = 0, replicates: int = 1,
                          jitter: float | None = None) -> FieldSample:
    """Exact Gaussian samples with covariance ``kernel_hat(<x_i, x_j>)`` at ``points``.

    ``points`` is an array of unit vectors or a ``SphereGrid``.
    """
    grid = points if isinstance(points, SphereGrid) else None
    pts = grid.points if grid is not None else np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] > CHOLESKY_MAX:
        raise ValidationError(f"need at most {CHOLESKY_MAX} points as rows")
    gram = _gram(kernel_hat, pts)
    if jitter is None:
        factor, used = cholesky_factor(gram)
    else:
        try:
            factor, used = np.linalg.cholesky(gram + jitter * np.eye(pts.shape[0])), jitter
        except np.linalg.LinAlgError as exc:
            raise NotPSDError("Gram matrix not positive definite") from exc
    rng = stream(seed)
    z = rng.standard_normal((pts.shape[0], replicates))
    vals = (factor @ z).T
    if grid is None:
        n = pts.shape[0]
        d = pts.shape[1] - 1
        grid = SphereGrid(d, pts, np.full(n, sphere_area(d) / n), "points")
    return FieldSample(grid, vals[0] if replicates == 1 else vals, "cholesky",
                       {"seed": seed, "jitter": used})


def estimate_functional(field: FieldSample, observable) -> np.ndarray:
    """``sum_i w_i phi(T(x_i))`` per replicate."""
    return field.grid.integrate(observable(field.values))


def estimate_chaos_component(field: FieldSample, q: int, phi_q: float) -> np.ndarray:
    """``phi_q sum_i w_i H_q(T(x_i))`` per replicate."""
    if q < 2:
        raise ValidationError("q must be >= 2")
    return phi_q * field.grid.integrate(hermite_poly(q, field.values))


@dataclass
class NetworkDraw:
    output: np.ndarray
    features: np.ndarray


def finite_width_network_sample(activation: ActivationSpec, widths, points, seed: int = 0,
                                rng: np.random.Generator | None = None) -> NetworkDraw:
    """One bias-free network draw ``T_L`` evaluated at ``points``.

    ``widths = (n_1, ..., n_L)``: ``T_1 = W_1 x`` and
    ``T_{s+1} = W_{s+1} sigma(T_s)`` with weight variances chosen so that
    every pre-activation has unit variance; the scalar output is
    ``w . sigma(T_L)``.  ``features`` are ``sigma(T_L) / sqrt(n_L E sigma^2)``,
    whose Gram matrix is the covariance of the output given the hidden layers.
    """
    widths = [int(w) for w in widths]
    if not widths or min(widths) < 1:
        raise ValidationError("widths must be >= 1")
    m2 = activation.second_moment()
    if not (math.isfinite(m2) and m2 > 0.0):
        raise UnsupportedKernelError("activation needs a finite positive Gaussian second moment")
    x = np.asarray(points, dtype=float)
    rng = stream(seed) if rng is None else rng
    h = rng.standard_normal((widths[0], x.shape[1])) @ x.T
    for n_prev, n_next in zip(widths[:-1], widths[1:]):
        w = rng.standard_normal((n_next, n_prev)) / math.sqrt(n_prev * m2)
        h = w @ activation(h)
    feats = activation(h) / math.sqrt(widths[-1] * m2)
    out = rng.standard_normal(widths[-1]) @ feats
    return NetworkDraw(out, feats)


def pair_points(u_values, d: int = 2) -> np.ndarray:
    """``x_0 = e_1`` followed by points with ``<x_0, x_k> = u_k``."""
    u = np.asarray(u_values, dtype=float)
    pts = np.zeros((u.size + 1, d + 1))
    pts[0, 0] = 1.0
    pts[1:, 0] = u
    pts[1:, 1] = np.sqrt(np.maximum(0.0, 1.0 - u * u))
    return pts


@dataclass
class CovarianceEstimate:
    u: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray


def network_covariance(activation: ActivationSpec, widths, u_values, draws: int, seed: int = 0,
                       d: int = 2, conditional: bool = True) -> CovarianceEstimate:
    """Monte Carlo covariance of the network output at pairs with ``<x, y> = u``.

    With ``conditional`` the output layer is integrated out exactly (the
    per-draw estimate is the feature Gram entry), which is unbiased and
    removes the output-layer noise.
    """
    pts = pair_points(u_values, d)
    prods = np.empty((draws, pts.shape[0] - 1))
    var = np.empty(draws)
    for r in range(draws):
        net = finite_width_network_sample(activation, widths, pts, rng=stream(seed, r))
        if conditional:
            prods[r] = net.features[:, 0] @ net.features[:, 1:]
            var[r] = net.features[:, 0] @ net.features[:, 0]
        else:
            prods[r] = net.output[0] * net.output[1:]
            var[r] = net.output[0] ** 2
    sq = math.sqrt(draws)
    return CovarianceEstimate(np.asarray(u_values, dtype=float), prods.mean(0),
                              prods.std(0, ddof=1) / sq, np.array([var.mean()]),
                              np.array([var.std(ddof=1) / sq]))


@dataclass
class ExperimentConfig:
    kernel: Kernel
    d: int
    depths: list
    replicates: int
    observable: Observable
    seed: int = 0
    method: str = "auto"
    normalization: str = "theoretical"
    grid_kind: str = "random-uniform"
    grid_n: int = 1024
    lmax: int | None = None
    tail_tol: float = SYNTH_TAIL_TOL
    workers: int = 1
    q_max: int = 40
    batch: int = BATCH


@dataclass
class FunctionalSamples:
    depth: int
    observable: dict
    values: np.ndarray
    normalized: np.ndarray
    normalization: dict
    method: str
    meta: dict = field(default_factory=dict)


def _default_workers():
    try:
        return max(1, int(os.environ.get("NNGF_WORKERS", "1")))
    except ValueError:
        return 1


def _choose_method(cfg: ExperimentConfig, ps_tail: float | None):
    if cfg.method != "auto":
        return cfg.method
    if cfg.d != 2:
        return "cholesky"
    obs = cfg.observable
    if obs.kind == "hermite" and obs.order == 2:
        return "spectral-chi2"
    if ps_tail is not None and ps_tail > cfg.tail_tol:
        raise UnderResolvedError(f"spectral mass {ps_tail:.3g} above l = {LMAX_CAP}; field not resolvable")
    return "spectral-s2"


def _run_batches(cfg, depth, fn):
    n = cfg.replicates
    bounds = [(s, min(n, s + cfg.batch)) for s in range(0, n, cfg.batch)]

    def job(bd):
        s, e = bd
        return fn([stream(cfg.seed, depth, r) for r in range(s, e)])

    workers = max(1, int(cfg.workers))
    if workers == 1:
        parts = [job(bd) for bd in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, bounds))
    return np.concatenate(parts)


def _chi2_sampler(cfg, depth, report):
    # int H_2(T) dx = omega sum_l g_l (chi2_{n_l} - n_l) + Gaussian remainder above lmax
    ps = power_spectrum(cfg.kernel, depth, cfg.d, lmax=cfg.lmax or LMAX_CAP, report=report,
                        check=False)
    ns = normalized_spectrum(ps)
    g = np.maximum(ns.g, 0.0)
    n = ns.dims
    omega = sphere_area(cfg.d)
    nk = normalized_kernel(cfg.kernel, depth, cfg.d, report=report)
    m2 = nk.rule.integrate(nk.values**2)
    rem = max(0.0, 2.0 * omega**2 * (m2 - float(np.sum(g * g * n))))
    ells = np.flatnonzero(g > 0.0)

    def fn(rngs):
        out = np.empty(len(rngs))
        for j, rng in enumerate(rngs):
            chi = rng.chisquare(n[ells])
            out[j] = omega * math.fsum(g[ells] * (chi - n[ells])) + math.sqrt(rem) * rng.standard_normal()
        return out

    return fn, {"lmax": ns.lmax, "remainder_variance": rem}


def _synth_sampler(cfg, depth, report):
    ps = power_spectrum(cfg.kernel, depth, cfg.d, lmax=LMAX_CAP, report=report, check=False)
    ns = normalized_spectrum(ps)
    lmax = default_lmax(ns) if cfg.lmax is None else int(cfg.lmax)
    grid = ring_grid(max(lmax + 1, MIN_RINGS))
    synth = SpectralSynthesizer(ns, grid, lmax, cfg.tail_tol)
    obs = cfg.observable

    def fn(rngs):
        return grid.integrate(obs(synth.draw(rngs)))

    return fn, {"lmax": lmax, "folded_tail": synth.folded, "grid": grid.kind, "grid_points": grid.size}


def _cholesky_sampler(cfg, depth, report):
    grid = sphere_grid(cfg.d, cfg.grid_n, cfg.grid_kind, seed=cfg.seed)
    nk = normalized_kernel(cfg.kernel, depth, cfg.d, report=report)
    factor, jitter = cholesky_factor(_gram(nk, grid.points))
    obs = cfg.observable

    def fn(rngs):
        z = np.stack([rng.standard_normal(grid.size) for rng in rngs], axis=1)
        return grid.integrate(obs((factor @ z).T))

    return fn, {"jitter": jitter, "grid": grid.kind, "grid_points": grid.size}


def monte_carlo_experiment(cfg: ExperimentConfig) -> list:
    """Replicates of ``F_L`` (and ``F_L`` normalized) for each depth in the schedule."""
    if cfg.replicates < 2:
        raise ValidationError("need at least 2 replicates")
    if cfg.method not in METHODS:
        raise ValidationError(f"unknown method {cfg.method!r}")
    if cfg.normalization not in ("theoretical", "empirical"):
        raise ValidationError("normalization must be 'theoretical' or 'empirical'")
    report = classify_regime(cfg.kernel)
    expansion: HermiteExpansion = hermite_expand(cfg.observable, cfg.q_max)
    omega = sphere_area(cfg.d)
    out = []
    for depth in cfg.depths:
        tail = None
        if cfg.d == 2 and cfg.method == "auto" and report.regime == HIGH:
            ps = power_spectrum(cfg.kernel, depth, 2, lmax=LMAX_CAP, report=report, check=False)
            tail = ps.tail / ps.one_minus_c0
        method = _choose_method(cfg, tail)
        if method == "spectral-chi2":
            if not (cfg.observable.kind == "hermite" and cfg.observable.order == 2):
                raise PreconditionError("the chi-square sampler applies to phi = H_2 only")
            fn, meta = _chi2_sampler(cfg, depth, report)
        elif method == "spectral-s2":
            fn, meta = _synth_sampler(cfg, depth, report)
        else:
            fn, meta = _cholesky_sampler(cfg, depth, report)
        values = _run_batches(cfg, depth, fn)
        if cfg.normalization == "theoretical":
            mean = omega * float(expansion.coeffs[0])
            var = total_variance(expansion, cfg.kernel, depth, cfg.d).totals[depth]
        else:
            mean = float(np.mean(values))
            var = float(np.var(values, ddof=1))
        normalized = (values - mean) / math.sqrt(var)
        meta.update({"seed": cfg.seed, "rng": "philox(seed, L, replicate)"})
        out.append(FunctionalSamples(int(depth), cfg.observable.to_dict(), values, normalized,
                                     {"source": cfg.normalization, "mean": mean, "variance": var},
                                     method, meta))
    return out
