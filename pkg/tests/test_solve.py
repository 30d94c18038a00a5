from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from diffuse_domain.assembly import ProblemSpec, assemble, eliminate_degenerate_dofs
from diffuse_domain.fields import BoxGrid
from diffuse_domain.geometry import make_geometry
from diffuse_domain.profiles import get_profile
from diffuse_domain.solve import SolverError, cg_solve


def _laplacian_1d(n, shift=0.1):
    return sp.diags([-np.ones(n - 1), (2 + shift) * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def test_identity_solves_in_one_step():
    b = np.arange(1.0, 8.0)
    x, st_ = cg_solve((sp.identity(7, format="csr"), b))
    assert_allclose(x, b)
    assert st_.iterations <= 1 and st_.converged


def test_diagonal_two_by_two():
    x, _ = cg_solve((sp.csr_matrix(np.diag([2.0, 8.0])), np.array([2.0, 8.0])), precond=None)
    assert_allclose(x, [1.0, 1.0])


def test_zero_rhs():
    x, st_ = cg_solve((_laplacian_1d(5), np.zeros(5)))
    assert np.all(x == 0) and st_.iterations == 0


def test_preconditioner_independence_and_energy():
    rng = np.random.default_rng(4)
    M = _laplacian_1d(200) + sp.diags(rng.uniform(0, 3, 200))
    b = rng.standard_normal(200)
    tol = 1e-11
    xj, sj = cg_solve((M, b), tol=tol, precond="jacobi")
    xn, sn = cg_solve((M, b), tol=tol, precond=None)
    assert np.max(np.abs(xj - xn)) <= 10 * tol * np.max(np.abs(xj))
    assert np.linalg.norm(M @ xj - b) <= tol * np.linalg.norm(b)
    for s in (sj, sn):
        assert np.all(np.diff(s.energy) <= 1e-12 * abs(s.energy[-1]))


def test_breakdown_reported():
    M = sp.csr_matrix(np.diag([1.0, -1.0, 2.0]))
    with pytest.raises(SolverError) as exc:
        cg_solve((M, np.array([1.0, 1.0, 1.0])), precond=None)
    assert exc.value.stats.breakdown and exc.value.stats.breakdown_iteration is not None
    with pytest.raises(ValueError):
        cg_solve((M, np.ones(3)), precond="jacobi")


def test_maxit_reported():
    M = _laplacian_1d(400, shift=1e-4)
    b = np.ones(400)
    with pytest.raises(SolverError):
        cg_solve((M, b), maxit=3)
    x, st_ = cg_solve((M, b), maxit=3, raise_on_failure=False)
    assert not st_.converged and st_.iterations == 3
    with pytest.raises(ValueError):
        cg_solve((M, b), tol=0.0)


def test_bitwise_determinism_across_threads():
    M = _laplacian_1d(5000) + sp.diags(np.linspace(0, 1, 5000))
    b = np.sin(np.arange(5000.0))
    x1, _ = cg_solve((M, b), threads=1)
    x8, _ = cg_solve((M, b), threads=8)
    x1b, _ = cg_solve((M, b), threads=1)
    assert np.array_equal(x1, x8) and np.array_equal(x1, x1b)


def test_rdd_disc_iteration_bound():
    geom = make_geometry("circle", radius=1.0)
    spec = ProblemSpec("rdd", geom, get_profile("dw"), 0.1, f=0.0, g=1.0, beta=1.0)
    s = eliminate_degenerate_dofs(assemble(spec, BoxGrid(geom.box, 160, 160)))
    x, st_ = cg_solve(s, tol=1e-10)
    assert st_.converged and st_.iterations <= 3000
    assert np.linalg.norm(s.matrix @ x - s.rhs) <= 1e-10 * np.linalg.norm(s.rhs)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2 ** 32 - 1))
def test_random_spd_systems(n, seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    M = sp.csr_matrix(G @ G.T + n * np.eye(n))
    b = rng.standard_normal(n)
    x, st_ = cg_solve((M, b), tol=1e-12)
    assert np.linalg.norm(M @ x - b) <= 1e-12 * np.linalg.norm(b)
    assert np.all(np.diff(st_.energy) <= 1e-10 * max(1.0, abs(st_.energy[-1])))
