from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from diffuse_domain.fields import AngularFourier, BoxGrid, Closure, Constant, NodalField
from diffuse_domain.geometry import make_geometry
from diffuse_domain.norms import (
    NormReport,
    delta_functional,
    restricted_integrals,
    restricted_h1_error,
    surface_integral,
    surface_norm_exact,
    weighted_integrals,
    weighted_norm,
)
from diffuse_domain.profiles import ScaledWeights, cxi_constant, get_profile

CIRCLE = make_geometry("circle", radius=1.0)
DO = get_profile("do")
DW = get_profile("dw")
X = Closure(lambda p: p[..., 0], grad=lambda p: np.stack([np.ones(p.shape[:-1]), np.zeros(p.shape[:-1])], axis=-1))


def _grid(h):
    return BoxGrid.from_spacing(CIRCLE.box, h)


def test_weighted_norm_examples():
    w = ScaledWeights(DO, 0.1, CIRCLE)
    assert weighted_norm(Constant(1.0), w, "delta", "L2", _grid(0.025)) == pytest.approx(math.sqrt(2 * math.pi), abs=1e-3)
    assert weighted_norm(Constant(0.0), w, "xi", "H1", _grid(0.05)) == 0.0
    with pytest.raises(ValueError):
        weighted_norm(Constant(1.0), w, "delta", "H2", _grid(0.05))
    with pytest.raises(ValueError):
        weighted_norm(Constant(1.0), w, "mass", "L2", _grid(0.05))


def test_xi_norm_of_x_approaches_disc_integral():
    vals = []
    for eps in (0.1, 0.05, 0.025, 0.0125):
        w = ScaledWeights(DO, eps, CIRCLE)
        i0, _ = weighted_integrals(X, w, "xi", _grid(eps / 2), need_grad=False)
        vals.append(i0)
    gaps = [abs(v - math.pi / 4) for v in vals]
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] <= 0.01 * math.pi / 4


def test_nodal_gradient_is_patch_gradient():
    grid = _grid(0.05)
    w = ScaledWeights(DW, 0.1, CIRCLE)
    fld = NodalField.inject(grid, X)
    a0, a1 = weighted_integrals(fld, w, "xi", grid)
    b0, b1 = weighted_integrals(X, w, "xi", grid)
    assert a0 == pytest.approx(b0, rel=1e-12)
    assert a1 == pytest.approx(b1, rel=1e-12)


def test_restricted_error_examples():
    u = Closure(lambda p: np.sin(p[..., 0]) * np.cos(p[..., 1]),
                grad=lambda p: np.stack([np.cos(p[..., 0]) * np.cos(p[..., 1]),
                                         -np.sin(p[..., 0]) * np.sin(p[..., 1])], axis=-1))
    errs = []
    for h in (0.1, 0.05, 0.025):
        grid = _grid(h)
        i0, _ = restricted_integrals(NodalField.inject(grid, u), u, CIRCLE, grid)
        errs.append(math.sqrt(i0))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)
    grid = _grid(0.05)
    assert restricted_h1_error(NodalField.inject(grid, 2.0), Constant(2.0), CIRCLE, grid) <= 1e-14
    area, _ = restricted_integrals(Constant(1.0), None, CIRCLE, grid, need_grad=False)
    assert area == pytest.approx(math.pi, abs=5 * 0.05 ** 2)


def test_surface_norms():
    assert surface_norm_exact(Constant(1.0), CIRCLE) == pytest.approx(math.sqrt(2 * math.pi), abs=1e-12)
    assert surface_norm_exact(AngularFourier([(1, 1.0)]), CIRCLE) == pytest.approx(math.sqrt(2 * math.pi), abs=1e-10)
    c2 = make_geometry("circle", radius=2.0, box=(-3.0, 3.0, -3.0, 3.0))
    # oracle: arclength quadrature of |v|^2 + |dv/ds|^2 with s = 2 t
    # v = cos 2t, dv/ds = -2 sin 2t / R, ds = R dt
    val, _ = integrate.quad(lambda t: (np.cos(2 * t) ** 2 + np.sin(2 * t) ** 2) * 2.0, 0, 2 * np.pi)
    ref = math.sqrt(val)
    assert surface_norm_exact(AngularFourier([(2, 1.0)]), c2) == pytest.approx(ref, rel=1e-8)
    with pytest.raises(ValueError):
        surface_norm_exact(Closure(lambda p: p[..., 0]), CIRCLE)


def test_delta_functional_examples():
    Y = Closure(lambda p: p[..., 1])
    X2 = Closure(lambda p: p[..., 0] ** 2)
    errs = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        w = ScaledWeights(DO, eps, CIRCLE)
        grid = _grid(eps / 4)
        assert delta_functional(Constant(1.0), w, grid) == pytest.approx(2 * math.pi, abs=1e-3)
        assert abs(delta_functional(Y, w, grid)) <= 1e-6
        errs.append(abs(delta_functional(X2, w, grid) - math.pi))
    slope = np.polyfit(np.log([0.2, 0.1, 0.05, 0.025]), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)
    assert surface_integral(X2, CIRCLE) == pytest.approx(math.pi, abs=1e-12)


def test_norm_report_rejects_bad_values():
    NormReport({"l2_xi": 0.5, "h1_gamma_exact": None})
    with pytest.raises(ValueError):
        NormReport({"l2_xi": -1.0})
    with pytest.raises(ValueError):
        NormReport({"l2_xi": float("nan")})


@settings(max_examples=15, deadline=None)
@given(k=st.integers(0, 3), a=st.floats(-2, 2), eps=st.sampled_from([0.2, 0.1]))
def test_weight_domination(k, a, eps):
    f = Closure(lambda p: np.cos(k * p[..., 0]) + a * p[..., 1])
    for prof in (DW, DO):
        w = ScaledWeights(prof, eps, CIRCLE)
        grid = _grid(eps / 2)
        d0, _ = weighted_integrals(f, w, "delta", grid, need_grad=False)
        x0, _ = weighted_integrals(f, w, "xi", grid, need_grad=False)
        assert d0 * cxi_constant(prof, n=20001) * eps <= x0 * (1 + 1e-12)
