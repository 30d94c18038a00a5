from __future__ import annotations

import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import iv, ivp

from diffuse_domain.fields import AngularFourier, Closure, Constant, default_eta, dirichlet_lifting, neumann_lifting
from diffuse_domain.geometry import make_geometry
from diffuse_domain.oracle import (
    OracleError,
    fourier_decompose,
    manufactured,
    robin_penalty_study,
    solve_sharp_disc,
    surface_laplacian,
)
from diffuse_domain.norms import surface_norm_exact

CIRCLE = make_geometry("circle", radius=1.0)
ORIGIN = np.array([[0.0, 0.0]])


def test_rsi_bessel():
    sol = solve_sharp_disc("RSI", CIRCLE, A=1.0, a=1.0, f=0.0, g=1.0, beta=1.0, n_r=512)
    c = 1.0 / (iv(0, 1) + iv(1, 1))
    assert sol.u(ORIGIN)[0] == pytest.approx(c, abs=1e-9)
    assert sol.u(ORIGIN)[0] == pytest.approx(0.546082, abs=1e-6)
    x = np.array([[0.3, 0.4], [0.0, 0.9], [-0.7, -0.1]])
    r = np.linalg.norm(x, axis=1)
    assert_allclose(sol.u(x), c * iv(0, r), atol=1e-9)
    assert_allclose(sol.grad_u(x), (c * iv(1, r) / r)[:, None] * x, atol=1e-7)
    assert sol.diagnostics["observed_order"] == pytest.approx(2.0, abs=0.1)


def test_csi_bessel():
    sol = solve_sharp_disc("CSI", CIRCLE, A=1.0, a=1.0, f=1.0, B=1.0, b=1.0, g=0.0, K=1.0, beta=1.0, n_r=512)
    c = -1.0 / (iv(0, 1) + 2 * iv(1, 1))
    v_exact = 1 + c * (iv(0, 1) + iv(1, 1))
    assert sol.u(ORIGIN)[0] == pytest.approx(1 + c, abs=1e-9)
    assert sol.u(ORIGIN)[0] == pytest.approx(0.582704, abs=1e-6)
    assert sol.v(np.linspace(0, 6, 7)) == pytest.approx(v_exact, abs=1e-9)
    assert v_exact == pytest.approx(0.235838, abs=1e-6)
    assert sol.diagnostics["flux_mismatch"] <= 1e-8


def test_ssi_single_mode():
    sol = solve_sharp_disc("SSI", CIRCLE, B=1.0, b=1.0, g=AngularFourier([(1, 1.0)]))
    t = np.linspace(0, 2 * np.pi, 17)
    assert_allclose(sol.v(t), np.cos(t) / 2, atol=1e-15)
    # Parseval against the surface quadrature
    assert sol.surface_h1() == pytest.approx(surface_norm_exact(sol.surface, CIRCLE), abs=1e-8)


def test_dsih_and_nsih_bessel():
    g = AngularFourier([(1, 1.0)])
    eta = default_eta(CIRCLE)
    lift = dirichlet_lifting(g, CIRCLE, eta)
    sol = solve_sharp_disc("DSIH", CIRCLE, A=1.0, a=1.0, f=0.0, g=g, lifting=lift, n_r=512)
    x = np.array([[0.5, 0.2], [-0.1, 0.95], [0.7, -0.6]])
    r, th = np.linalg.norm(x, axis=1), np.arctan2(x[:, 1], x[:, 0])
    full = iv(1, r) / iv(1, 1) * np.cos(th)
    assert_allclose(sol.u(x), full - lift(x), atol=1e-8)
    nl = neumann_lifting(g, np.eye(2), CIRCLE, eta)
    sol = solve_sharp_disc("NSIH", CIRCLE, A=1.0, a=1.0, f=0.0, g=g, lifting=nl, n_r=512)
    full = iv(1, r) / ivp(1, 1) * np.cos(th)
    assert_allclose(sol.u(x), full - nl(x), atol=1e-8)


def test_oracle_rejects_bad_input():
    with pytest.raises(OracleError):
        solve_sharp_disc("RSI", make_geometry("ellipse", radii=(1.5, 1.0)), g=1.0)
    with pytest.raises(OracleError):
        solve_sharp_disc("RSI", CIRCLE, a=Closure(lambda x: 1 + x[..., 0] ** 2), g=1.0)
    with pytest.raises(OracleError):
        solve_sharp_disc("XSI", CIRCLE)
    with pytest.raises(OracleError):
        solve_sharp_disc("SSI", CIRCLE).u(np.array([[3.0, 0.0]]))


def test_fourier_truncation_indicator():
    smooth = AngularFourier([(2, 0.5, 0.25)])
    _, _, tail = fourier_decompose(Closure(smooth), (0.0, 0.0), np.array([0.5, 1.0]), 4)
    assert tail <= 1e-14
    rough = Closure(lambda x: np.abs(x[..., 0]))
    _, _, tail = fourier_decompose(rough, (0.0, 0.0), np.array([1.0]), 4)
    assert tail > 1e-3


def test_manufactured_examples():
    bundle = manufactured("RSI", CIRCLE, u=Constant(1.0), a=2.0)
    x = np.array([[0.2, 0.1], [1.3, -0.2]])
    assert_allclose(bundle.f(x), 2.0)
    assert_allclose(bundle.g(x), 1.0)
    bundle = manufactured("SSI", CIRCLE, v=AngularFourier([(1, 1.0)]))
    p = CIRCLE.surface_rule(16).points
    assert_allclose(bundle.g(p), 2 * p[:, 0], atol=1e-9)


def test_manufactured_csi_residual():
    u = Closure(lambda x: x[..., 0] * x[..., 1] + x[..., 0] ** 2,
                grad=lambda x: np.stack([x[..., 1] + 2 * x[..., 0], x[..., 0]], axis=-1),
                laplacian=lambda x: 2.0 + 0 * x[..., 0])
    K, beta = 2.0, 3.0
    bundle = manufactured("CSI", CIRCLE, u=u, K=K, beta=beta, a=1.0, b=3.0)
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 2 * np.pi, 1000)
    p = np.stack([np.cos(t), np.sin(t)], axis=-1)
    # analytic: on the unit circle du/dnu = 2 u, so v = u + 2u/K
    uu = 0.5 * np.sin(2 * t) + 0.5 * (1 + np.cos(2 * t))
    v = (1 + 2 / K) * uu
    lap_v = (1 + 2 / K) * (-2 * np.sin(2 * t) - 2 * np.cos(2 * t))
    g = (-lap_v + 3.0 * v + K * (v - uu)) / beta
    assert_allclose(bundle.v(p), v, atol=1e-12)
    assert_allclose(bundle.g(p), g, atol=1e-8)
    x = rng.uniform(-0.7, 0.7, (1000, 2))
    assert_allclose(bundle.f(x), -2.0 + u(x), atol=1e-12)


def test_surface_laplacian_of_mode():
    p = CIRCLE.surface_rule(32).points
    t = np.arctan2(p[:, 1], p[:, 0])
    assert_allclose(surface_laplacian(AngularFourier([(3, 1.0)]), CIRCLE, p), -9 * np.cos(3 * t), atol=1e-8)


def test_robin_penalty_study():
    rows = robin_penalty_study(CIRCLE, [10, 100, 1000], A=1.0, a=1.0, f=0.0, g=1.0, n_r=256)
    errs = [r["h1_error"] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    slope = np.log(errs[1] / errs[2]) / np.log(10)
    assert slope == pytest.approx(1.0, abs=0.05)
    zero = robin_penalty_study(CIRCLE, [10, 100], g=0.0, f=0.0, n_r=64)
    assert all(r["h1_error"] == 0.0 for r in zero)


def test_radial_profile_export(tmp_path):
    sol = solve_sharp_disc("RSI", CIRCLE, g=AngularFourier([(0, 1.0), (2, 0.5)]), n_r=64)
    path = tmp_path / "profiles.csv"
    sol.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["r", "u0_cos", "u0_sin", "u2_cos", "u2_sin"]
    assert len(rows) == 1 + 65
    assert float(rows[-1][0]) == 1.0
