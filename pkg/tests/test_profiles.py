from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from diffuse_domain.geometry import make_geometry
from diffuse_domain.profiles import (
    ProfileAssumptionError,
    ScaledWeights,
    custom_profile,
    cxi_constant,
    delta_base,
    get_profile,
    require_verified,
    verify_profile,
    xi_base,
)

DW = get_profile("double-well")
DO = get_profile("double-obstacle")


def test_xi_examples():
    assert xi_base("double-well", 0.0) == 0.5
    assert xi_base("double-obstacle", np.pi / 2) == 0.0
    assert xi_base("double-obstacle", -np.pi) == 1.0


def test_delta_examples():
    assert delta_base("double-obstacle", 0.0) == pytest.approx(2 / np.pi, abs=1e-15)
    assert delta_base("double-obstacle", np.pi) == 0.0


def test_double_well_mass_against_adaptive_quadrature():
    # oracle: adaptive quadrature of the printed sech^4 formula
    raw = lambda s: 3 / (2 * np.sqrt(2)) / np.cosh(s / np.sqrt(2)) ** 4
    printed, _ = integrate.quad(raw, -40, 40, epsabs=1e-13, limit=200)
    assert printed == pytest.approx(2.0, abs=1e-10)
    assert DW.normalization == pytest.approx(1 / printed, rel=1e-10)
    total, _ = integrate.quad(DW.delta, -40, 40, epsabs=1e-13, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_scaled_weights_examples():
    geom = make_geometry("circle", radius=1.0)
    w = ScaledWeights(DO, 0.1, geom)
    assert w.delta_eps([1.2, 0.0]) == 0.0
    assert w.delta_eps([1.0, 0.0]) == pytest.approx(20 / np.pi)
    for prof in (DW, DO):
        assert ScaledWeights(prof, 0.05, geom).xi_eps([0.0, 1.0]) == 0.5
    with pytest.raises(ValueError):
        ScaledWeights(DW, 0.0, geom)


def test_cxi_constants():
    c = cxi_constant(DO)
    # 1% below the analytic bound pi/8, up to cancellation in 1 - sin s at the edge
    assert 0.99 * np.pi / 8 * (1 - 1e-9) <= c <= np.pi / 8
    c_dw = cxi_constant(DW)
    assert 0 < c_dw < np.inf
    s = np.linspace(-40, 40, 400001)
    assert np.all(c_dw * DW.delta(s) <= DW.xi(s))
    broken = custom_profile(DO.xi, lambda s: np.exp(-s * s) / np.sqrt(np.pi))
    with pytest.raises(ProfileAssumptionError):
        cxi_constant(broken)


def test_verify_shipped_profiles():
    for prof in (DW, DO):
        rep = verify_profile(prof)
        assert rep.passed, rep.failures
        assert rep.xi_at_zero == 0.5
        assert abs(rep.delta_integral - 1.0) <= 1e-8
        assert np.isfinite(rep.c_delta_int)
    assert verify_profile(DW).raw_integral == pytest.approx(2.0, rel=1e-10)
    assert verify_profile(DW).as_dict()["passed"] is True


def test_cauchy_profile_fails_moment_check():
    xi = lambda s: 0.5 - np.arctan(s) / np.pi
    cauchy = custom_profile(xi, lambda s: 1 / (1 + s * s) / np.pi, normalize=False)
    rep = verify_profile(cauchy)
    assert not rep.passed
    assert any("second" in f for f in rep.failures)
    with pytest.raises(ProfileAssumptionError):
        require_verified(cauchy)


def test_evenness_and_monotonicity():
    s = np.linspace(0, 12, 5001)
    for prof in (DW, DO):
        assert np.max(np.abs(prof.delta(s) - prof.delta(-s))) == 0.0
        assert np.all(np.diff(prof.delta(s)) <= 0)
        assert np.all(np.diff(prof.xi(np.linspace(-12, 12, 5001))) <= 0)


@pytest.mark.parametrize("prof", [DW, DO], ids=["dw", "do"])
@pytest.mark.parametrize("x", [-0.3, 0.2])
def test_pointwise_limit(prof, x):
    seq = [prof.xi(x / e) for e in (0.1, 0.01, 0.001)]
    target = 1.0 if x < 0 else 0.0
    dist = [abs(v - target) for v in seq]
    assert dist[0] >= dist[1] >= dist[2]
    assert dist[2] < 1e-3


@pytest.mark.parametrize("eps", [0.2, 0.05, 0.01])
def test_scaling_identity(eps):
    for prof in (DW, DO):
        w = prof.window * eps
        val, _ = integrate.quad(lambda s: prof.delta(s / eps) / eps, -w, w, epsabs=1e-12, limit=200)
        assert val == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=80, deadline=None)
@given(x=st.floats(-3.0, 3.0), eps=st.floats(0.01, 0.5))
def test_scaled_domination(x, eps):
    for prof in (DW, DO):
        c = cxi_constant(prof, n=20001)
        assert c * prof.delta(x / eps) / eps <= prof.xi(x / eps) / eps + 1e-12
