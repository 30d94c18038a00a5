from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from diffuse_domain.fields import (
    AngularFourier,
    BoxGrid,
    Closure,
    Constant,
    NodalField,
    Radial,
    constant_normal_extension,
    cutoff,
    cutoff_prime,
    default_eta,
    dirichlet_lifting,
    fd_gradient,
    neumann_lifting,
    parse_data,
    reflection_extension,
)

COS = AngularFourier([(1, 1.0)])


def _band_points(geom, lo, hi, n, seed=0):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 2 * np.pi, n)
    s = rng.uniform(lo, hi, n) * rng.choice([-1.0, 1.0], n)
    p = geom.curve_point(t)
    return p + s[:, None] * geom.normal(p)


def test_cutoff_shape():
    assert cutoff(0.0) == 1.0 and cutoff(0.5) == 1.0 and cutoff(1.0) == 0.0 and cutoff(3.0) == 0.0
    t = np.concatenate([np.linspace(0.0, 0.49, 50), np.linspace(0.51, 0.99, 50), np.linspace(1.01, 1.5, 50)])
    fd = (cutoff(t + 1e-6) - cutoff(t - 1e-6)) / 2e-6
    assert_allclose(cutoff_prime(t), fd, atol=1e-8)


def test_constant_extension_examples(circle):
    ext = constant_normal_extension(Constant(1.0), circle, 0.2)
    assert ext([1.05, 0.0]) == 1.0
    ext = constant_normal_extension(COS, circle, 0.2)
    assert ext([1.05, 0.0]) == pytest.approx(1.0)
    assert ext([0.0, 0.0]) == 0.0  # cut off before the medial axis


def test_constant_extension_kills_normal_derivative(circle, ellipse):
    for geom in (circle, ellipse):
        eta = 0.9 * geom.reach
        ext = constant_normal_extension(COS if geom is circle else Closure(lambda x: np.sin(x[..., 0]) * x[..., 1]),
                                        geom, eta)
        x = _band_points(geom, 0.0, 0.45 * eta, 100)
        p = geom.closest_point(x)
        fd = fd_gradient(ext, x, step=1e-5)
        assert np.max(np.abs(np.sum(fd * geom.normal(p), axis=-1))) < 1e-4
        assert_allclose(ext.grad(x), fd, atol=1e-5)


def test_reflection_examples(circle):
    u = Radial("r2")
    ext = reflection_extension(u, circle, 0.5)
    assert ext([1.2, 0.0]) == pytest.approx(0.64)
    assert reflection_extension(Constant(3.0), circle, 0.5)([1.7, -0.2]) == 3.0
    rule = circle.surface_rule(64)
    w = Closure(lambda x: np.exp(x[..., 0]) * np.cos(3 * x[..., 1]))
    assert_allclose(reflection_extension(w, circle, 0.5)(rule.points), w(rule.points), atol=1e-12)
    # clamped depth beyond eta
    assert ext([1.8, 0.0]) == pytest.approx(0.25)


def test_reflection_gradient_matches_fd(ellipse):
    u = Closure(lambda x: x[..., 0] ** 2 - x[..., 0] * x[..., 1],
                grad=lambda x: np.stack([2 * x[..., 0] - x[..., 1], -x[..., 0]], axis=-1))
    eta = 0.4
    ext = reflection_extension(u, ellipse, eta)
    x = _band_points(ellipse, 0.02, 0.35, 50, seed=2)
    assert_allclose(ext.grad(x), fd_gradient(ext, x, step=1e-6), atol=1e-6)


def test_dirichlet_lifting_examples(circle):
    eta = 0.4
    g = dirichlet_lifting(Constant(1.0), circle, eta)
    assert g([0.0, 1.0]) == pytest.approx(1.0)
    assert g([1.0 + eta, 0.0]) == 0.0 and g([0.3, 0.0]) == 0.0
    gc = dirichlet_lifting(COS, circle, eta)
    rule = circle.surface_rule(32)
    assert_allclose(gc(rule.points), COS(rule.points), atol=1e-14)


def _grid_h1_squared(data, h):
    grid = BoxGrid.from_spacing((-2.0, 2.0, -2.0, 2.0), h)
    fld = NodalField.inject(grid, data)
    c = np.stack(np.meshgrid(grid.xs()[:-1] + h / 2, grid.ys()[:-1] + h / 2), axis=-1).reshape(-1, 2)
    # midpoint values and gradients of the bilinear interpolant
    v, g = fld(c), fld.gradient(c)
    return float(np.sum(v * v + np.sum(g * g, axis=-1)) * h * h)


def test_dirichlet_lifting_h1_bounded(circle):
    g = dirichlet_lifting(COS, circle, default_eta(circle))
    n = [_grid_h1_squared(g, h) for h in (0.04, 0.02, 0.01, 0.005)]
    ratios = [abs(b / a - 1.0) for a, b in zip(n, n[1:])]
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] <= 0.02


def test_neumann_lifting(circle):
    eta = 0.4
    h = neumann_lifting(Constant(1.0), np.eye(2), circle, eta)
    r = 1e-4
    dr = (h([1 + r, 0.0]) - h([1 - r, 0.0])) / (2 * r)
    assert dr == pytest.approx(1.0, abs=1e-6)
    assert neumann_lifting(Constant(0.0), np.eye(2), circle, eta)([1.1, 0.3]) == 0.0
    hc = neumann_lifting(COS, 2.0 * np.eye(2), circle, eta)
    rule = circle.surface_rule(16)
    assert_allclose(hc(rule.points), 0.0, atol=1e-15)
    # conormal derivative reproduces g
    nu = rule.normals
    flux = 2.0 * np.sum(fd_gradient(hc, rule.points, step=1e-5) * nu, axis=-1)
    assert_allclose(flux, COS(rule.points), atol=1e-5)


def test_neumann_divergence_closed_form(circle):
    hc = neumann_lifting(AngularFourier([(2, 0.5, -0.3)]), 1.5 * np.eye(2), circle, 0.4)
    x = _band_points(circle, 0.01, 0.38, 40, seed=5)
    from diffuse_domain.fields import fd_divergence
    fd = fd_divergence(lambda y: 1.5 * hc.grad(y), x, step=1e-5)
    assert_allclose(hc.div_flux(x), fd, atol=2e-4)


def test_interpolation():
    grid = BoxGrid.from_spacing((-2.0, 2.0, -2.0, 2.0), 0.01)
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, (200, 2))
    assert_allclose(NodalField.inject(grid, 2.5)(x), 2.5)
    assert_allclose(NodalField.inject(grid, lambda y: y[..., 0])(x), x[:, 0], atol=1e-13)
    err = np.abs(NodalField.inject(grid, lambda y: np.sin(y[..., 0]))(x) - np.sin(x[:, 0]))
    assert err.max() <= 0.125 * 0.01 ** 2 + 1e-15
    with pytest.raises(ValueError):
        NodalField.inject(grid, 1.0)([2.5, 0.0])


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3), h=st.sampled_from([0.5, 0.25, 0.1]))
def test_bilinear_reproduces_affine(a, b, c, h):
    grid = BoxGrid.from_spacing((-2.0, 2.0, -1.0, 1.0), h)
    f = lambda y: a + b * y[..., 0] + c * y[..., 1]
    x = np.random.default_rng(0).uniform([-2, -1], [2, 1], (50, 2))
    fld = NodalField.inject(grid, f)
    assert_allclose(fld(x), f(x), atol=1e-12)
    assert_allclose(fld.gradient(x), np.broadcast_to([b, c], (50, 2)), atol=1e-11)


def test_grid_validation():
    with pytest.raises(ValueError):
        BoxGrid((-2.0, 2.0, -1.0, 1.0), 10, 10)
    with pytest.raises(ValueError):
        NodalField(BoxGrid((0.0, 1.0, 0.0, 1.0), 2, 2), [np.nan] * 9)


def test_parse_data():
    assert parse_data({"const": 1.0})(np.zeros((1, 2)))[0] == 1.0
    g = parse_data({"fourier": [[1, 1.0]]})
    assert g([0.0, 2.0]) == pytest.approx(0.0, abs=1e-15) and g([3.0, 0.0]) == 1.0
    assert parse_data({"radial": "one"}).is_constant
    for bad in ({"spline": 1}, {"const": 1, "radial": "one"}, "x"):
        with pytest.raises(ValueError):
            parse_data(bad)
    with pytest.raises(ValueError):
        parse_data({"radial": "bessel"})
