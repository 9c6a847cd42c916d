import math

import numpy as np
import pytest
from scipy import stats

from nngf.errors import NotPSDError, ValidationError
from nngf.fieldsim import (
    ExperimentConfig,
    SphereGrid,
    SpectralSynthesizer,
    cholesky_factor,
    estimate_chaos_component,
    estimate_functional,
    finite_width_network_sample,
    monte_carlo_experiment,
    network_covariance,
    pair_points,
    ring_grid,
    sample_field_cholesky,
    sphere_grid,
    synthesize_field_s2,
)
from nngf.functionals import excursion, hermite_expand
from nngf.kernel import ActivationSpec, iterate_kernel, kernel_from_series, relu_kernel
from nngf.quadrature import sphere_area
from nngf.rng import stream
from nngf.spectral import NormalizedSpectrum, normalized_kernel, normalized_spectrum, power_spectrum

OMEGA2 = 4 * math.pi


def _points_grid(pts):
    pts = np.asarray(pts, dtype=float)
    return SphereGrid(2, pts, np.full(len(pts), OMEGA2 / len(pts)), "points")


def _relu_spectrum(L):
    return normalized_spectrum(power_spectrum(relu_kernel(), L, 2))


@pytest.mark.parametrize("kind", ["fibonacci-s2", "random-uniform", "gauss-product-s2"])
def test_grid_weights(kind):
    g = sphere_grid(2, 2000, kind, seed=0)
    assert g.weights.sum() == pytest.approx(OMEGA2, rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(g.points, axis=1), 1.0, atol=1e-14)
    assert g.integrate(np.ones(g.size)) == pytest.approx(OMEGA2, rel=1e-13)


def test_grid_second_moment():
    exact = OMEGA2 / 3
    g = sphere_grid(2, 2000, "gauss-product-s2")
    assert g.integrate(g.points[:, 0] ** 2) == pytest.approx(exact, abs=1e-12)
    r = sphere_grid(2, 4000, "random-uniform", seed=1)
    vals = OMEGA2 * r.points[:, 0] ** 2
    se = vals.std(ddof=1) / math.sqrt(r.size)
    assert abs(vals.mean() - exact) < 3 * se
    assert sphere_grid(5, 100, "random-uniform").weights.sum() == pytest.approx(sphere_area(5))


def test_grid_validation():
    with pytest.raises(ValidationError):
        sphere_grid(3, 100, "fibonacci-s2")
    with pytest.raises(ValidationError):
        sphere_grid(2, 100, "hexagonal")


def test_single_mode_field_is_linear():
    spec = NormalizedSpectrum(2, 1, np.array([0.0, 1 / 3]))
    x = np.array([0.3, -0.5, math.sqrt(1 - 0.34)])
    f = synthesize_field_s2(spec, _points_grid([x, -x]), seed=4)
    assert f.values[1] == pytest.approx(-f.values[0], abs=1e-14)


def test_ring_and_point_paths_agree():
    spec = _relu_spectrum(3)
    rings = ring_grid(40)
    a = SpectralSynthesizer(spec, rings, 30).draw([stream(1)])[0]
    b = SpectralSynthesizer(spec, _points_grid(rings.points), 30).draw([stream(1)])[0]
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_synthesized_covariance_and_variance():
    spec = _relu_spectrum(5)
    u = 0.5
    pts = pair_points([u])
    synth = SpectralSynthesizer(spec, _points_grid(pts))
    vals = synth.draw([stream(2, r) for r in range(2000)])
    n = vals.shape[0]
    var = vals[:, 0] ** 2
    assert abs(var.mean() - 1.0) < 3 * var.std(ddof=1) / math.sqrt(n)
    prod = vals[:, 0] * vals[:, 1]
    target = normalized_kernel(relu_kernel(), 5, 2)(np.array([u]))[0]
    assert abs(prod.mean() - target) < 3 * prod.std(ddof=1) / math.sqrt(n)


def test_cholesky_antipodal_anticorrelation():
    khat = lambda u: np.asarray(u)  # kappa(u) = u has kappa_hat = u
    x = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    s = sample_field_cholesky(khat, x, seed=3, replicates=50)
    np.testing.assert_allclose(s.values[:, 1], -s.values[:, 0], atol=1e-5)


def test_cholesky_not_psd():
    with pytest.raises(NotPSDError):
        cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_gram_in_d5():
    grid = sphere_grid(5, 256, "random-uniform", seed=5)
    nk = normalized_kernel(relu_kernel(), 20, 5)
    s = sample_field_cholesky(nk, grid, seed=6, replicates=500)
    emp = s.values.T @ s.values / 500
    u = np.clip(grid.points @ grid.points.T, -1, 1)
    iu = np.triu_indices(256, 1)
    theory = nk(u[iu])
    # compare per inner-product decile: mean error against its Monte Carlo spread
    bins = np.quantile(u[iu], np.linspace(0, 1, 11))
    idx = np.clip(np.digitize(u[iu], bins) - 1, 0, 9)
    for b in range(10):
        sel = idx == b
        diff = emp[iu][sel] - theory[sel]
        per_rep = (s.values[:, iu[0][sel]] * s.values[:, iu[1][sel]]).mean(axis=1)
        se = per_rep.std(ddof=1) / math.sqrt(500)
        assert abs(diff.mean()) < 3 * se + 1e-12


def test_cross_method_agreement():
    L = 4
    spec = _relu_spectrum(L)
    rng = stream(9)
    pts = rng.standard_normal((5, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    a = SpectralSynthesizer(spec, _points_grid(pts)).draw([stream(10, r) for r in range(1000)])
    nk = normalized_kernel(relu_kernel(), L, 2)
    b = sample_field_cholesky(nk, pts, seed=11, replicates=1000).values
    assert stats.ks_2samp(a.ravel(), b.ravel()).pvalue > 0.01


def test_functional_estimators():
    grid = ring_grid(64)
    field = synthesize_field_s2(_relu_spectrum(10), grid, seed=0)
    assert estimate_functional(field, lambda x: np.ones_like(x)) == pytest.approx(OMEGA2, rel=1e-13)
    assert estimate_functional(field, excursion(-10.0)) == pytest.approx(OMEGA2, rel=1e-13)
    with pytest.raises(ValidationError):
        estimate_chaos_component(field, 1, 0.5)


def test_excursion_mean_and_chaos_mean():
    cfg = ExperimentConfig(kernel=relu_kernel(), d=2, depths=[30], replicates=400,
                           observable=excursion(1.0), seed=0)
    fs = monte_carlo_experiment(cfg)[0]
    target = OMEGA2 * stats.norm.sf(1.0)
    assert abs(fs.values.mean() - target) < 3 * fs.values.std(ddof=1) / math.sqrt(400)
    spec = _relu_spectrum(30)
    phi2 = hermite_expand(excursion(1.0)).coeffs[2]
    synth = SpectralSynthesizer(spec, ring_grid(128))
    from nngf.fieldsim import FieldSample

    draws = synth.draw([stream(12, r) for r in range(200)])
    comp = estimate_chaos_component(FieldSample(synth.grid, draws, "spectral-s2"), 2, phi2)
    assert abs(comp.mean()) < 3 * comp.std(ddof=1) / math.sqrt(200)


def test_experiment_shapes_and_worker_determinism():
    base = dict(kernel=relu_kernel(), d=2, depths=[10, 40], replicates=70,
                observable=excursion(0.0), seed=5)
    one = monte_carlo_experiment(ExperimentConfig(**base, workers=1))
    four = monte_carlo_experiment(ExperimentConfig(**base, workers=4))
    assert [s.values.shape for s in one] == [(70,), (70,)]
    for a, b in zip(one, four):
        np.testing.assert_array_equal(a.values, b.values)


def test_chi2_sampler_matches_theory():
    k = kernel_from_series([0.0, 0.9] + [0.0] * 8 + [0.1])
    from nngf.functionals import hermite_monomial, total_variance

    cfg = ExperimentConfig(kernel=k, d=2, depths=[20], replicates=2000,
                           observable=hermite_monomial(2), seed=1)
    fs = monte_carlo_experiment(cfg)[0]
    assert fs.method == "spectral-chi2"
    th = total_variance(hermite_expand(hermite_monomial(2)), k, 20, 2).totals[20]
    x = fs.values - fs.values.mean()
    se = math.sqrt((np.mean(x**4) - np.mean(x**2) ** 2) / x.size)
    assert abs(fs.values.var(ddof=1) - th) < 3 * se


def test_identity_network_covariance():
    u = np.array([-0.4, 0.3, 0.8])
    est = network_covariance(ActivationSpec("identity"), [1, 1], u, 3000, seed=1)
    assert np.all(np.abs(est.mean - u) < 3 * est.se)


def test_relu_network_covariance_small():
    u = np.array([0.5])
    est = network_covariance(ActivationSpec("relu"), [256] * 3, u, 300, seed=2)
    k3 = iterate_kernel(relu_kernel(), 3, u)
    assert abs(est.mean[0] - k3[0]) < 3 * est.se[0]
    assert abs(est.variance[0] - 1.0) < 3 * est.variance_se[0]


def test_network_draw_shapes():
    pts = pair_points([0.1, 0.2])
    draw = finite_width_network_sample(ActivationSpec("relu"), [8, 4], pts, seed=0)
    assert draw.output.shape == (3,) and draw.features.shape == (4, 3)
    with pytest.raises(ValidationError):
        finite_width_network_sample(ActivationSpec("relu"), [], pts)
