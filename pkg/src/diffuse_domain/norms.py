"""Weighted norms, restricted errors, exact surface norms and delta functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import BoxGrid, NodalField, ScalarData, as_data, surface_gradient
from .geometry import SignedGeometry
from .profiles import ScaledWeights
from .quadrature import CellQuadrature, QuadSpec

WEIGHTS = ("xi", "delta", "penalty")
REPORT_KEYS = ("l2_xi", "h1_xi", "l2_delta", "h1_delta", "l2_delta_penalty",
               "h1_omega_star_err", "h1_gamma_exact")


@dataclass
class NormReport:
    values: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.values.items():
            if v is None:
                continue
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"norm {k} = {v} is not a finite non-negative number")

    def __getitem__(self, key):
        return self.values[key]

    def as_dict(self) -> dict:
        return {k: (None if v is None else float(v)) for k, v in self.values.items()}


def _quadrature(grid: BoxGrid, quad, epsilon: float | None) -> CellQuadrature:
    if isinstance(quad, CellQuadrature):
        return quad
    quad = quad or QuadSpec()
    return CellQuadrature(grid, quad.order, quad.subdivisions(grid.h, epsilon))


class _Evaluable:
    """Uniform value/gradient access for nodal fields, scalar data and differences."""

    def __init__(self, fld, ref=None, need_grad=True):
        self.fld = fld
        self.ref = None if ref is None else as_data(ref)
        self.need_grad = need_grad

    @staticmethod
    def _one(fld, quad, ci, cj, P, need_grad):
        if isinstance(fld, NodalField):
            val, grad = quad.values(fld.values, ci, cj)
            return val, grad
        if isinstance(fld, np.ndarray):
            val, grad = quad.values(fld, ci, cj)
            return val, grad
        fld = as_data(fld)
        return fld(P), (fld.grad(P) if need_grad else None)

    def __call__(self, quad, ci, cj, P, mask=None):
        val, grad = self._one(self.fld, quad, ci, cj, P, self.need_grad)
        if self.ref is not None:
            if mask is None:
                rv = self.ref(P)
                rg = self.ref.grad(P) if self.need_grad else None
            else:
                rv = np.zeros(P.shape[:-1])
                rv[mask] = self.ref(P[mask])
                rg = None
                if self.need_grad:
                    rg = np.zeros(P.shape)
                    rg[mask] = self.ref.grad(P[mask])
            val = val - rv
            grad = None if grad is None or rg is None else grad - rg
        return val, grad


def _weight_values(weights: ScaledWeights, kind: str, d):
    if kind == "xi":
        return weights.xi_of_distance(d)
    if kind == "delta":
        return weights.delta_of_distance(d)
    if kind == "penalty":
        return weights.delta_of_distance(d) / weights.epsilon
    raise ValueError(f"unknown weight {kind!r}; expected one of {WEIGHTS}")


def _cells_in_band(quad: CellQuadrature, geom: SignedGeometry, halfwidth: float):
    """Cells whose centre lies within ``halfwidth + h`` of the curve (all cells when infinite)."""
    g = quad.grid
    cj, ci = np.meshgrid(np.arange(g.ny), np.arange(g.nx), indexing="ij")
    if not np.isfinite(halfwidth):
        return ci.ravel(), cj.ravel()
    centres = np.stack([g.box[0] + g.h * (ci + 0.5), g.box[2] + g.h * (cj + 0.5)], axis=-1)
    d = geom.sdf(centres)
    keep = np.abs(d) < halfwidth + g.h
    return ci[keep], cj[keep]


def _excluded_cells(quad: CellQuadrature, ci, cj, active_nodes):
    if active_nodes is None:
        return None
    ids = quad.node_ids(ci, cj)
    return ~np.any(active_nodes[ids], axis=-1)


def weighted_integrals(fld, weights: ScaledWeights, kind: str, grid: BoxGrid, quad=None,
                       ref=None, active_nodes=None, need_grad: bool = True):
    """``(int w |f|^2, int w |grad f|^2)`` over the box for ``f = fld - ref``.

    Cells whose four nodes are all inactive get zero weight.
    """
    cq = _quadrature(grid, quad, weights.epsilon)
    geom = weights.geometry
    if kind == "xi":
        # xi vanishes beyond the outer edge of the layer for compact profiles
        band = weights.epsilon * weights.profile.support
        ci, cj = _cells_xi(cq, geom, band)
    else:
        ci, cj = _cells_in_band(cq, geom, weights.epsilon * weights.profile.support)
    ev = _Evaluable(fld, ref, need_grad)
    s0 = []
    s1 = []
    for bi, bj in cq.cell_chunks(ci, cj):
        P = cq.points(bi, bj)
        w = _weight_values(weights, kind, geom.sdf(P)) * cq.w
        ex = _excluded_cells(cq, bi, bj, active_nodes)
        if ex is not None:
            w[ex] = 0.0
        val, grad = ev(cq, bi, bj, P)
        s0.append(np.sum(w * val * val))
        if need_grad:
            s1.append(np.sum(w * np.sum(grad * grad, axis=-1)))
    return float(np.sum(s0)), (float(np.sum(s1)) if need_grad else 0.0)


def _cells_xi(quad: CellQuadrature, geom: SignedGeometry, band: float):
    g = quad.grid
    cj, ci = np.meshgrid(np.arange(g.ny), np.arange(g.nx), indexing="ij")
    if not np.isfinite(band):
        return ci.ravel(), cj.ravel()
    centres = np.stack([g.box[0] + g.h * (ci + 0.5), g.box[2] + g.h * (cj + 0.5)], axis=-1)
    keep = geom.sdf(centres) < band + g.h
    return ci[keep], cj[keep]


def weighted_norm(fld, weights: ScaledWeights, kind: str, order: str, grid: BoxGrid, quad=None,
                  ref=None, active_nodes=None) -> float:
    """``sqrt(int w (|f|^2 [+ |grad f|^2]))`` with ``w`` one of xi_eps, delta_eps, delta_eps/eps."""
    order = order.upper()
    if order not in ("L2", "H1"):
        raise ValueError("order must be 'L2' or 'H1'")
    i0, i1 = weighted_integrals(fld, weights, kind, grid, quad, ref, active_nodes, need_grad=order == "H1")
    return math.sqrt(i0 + i1)


def restricted_integrals(u_h, u_ref, geom: SignedGeometry, grid: BoxGrid, quad=None,
                         cut_refine: int = 4, need_grad: bool = True):
    """``(int_{d<0} |u_h - u_ref|^2, int_{d<0} |grad(u_h - u_ref)|^2)``.

    Cells cut by the curve use ``cut_refine`` times more subcells, and every
    quadrature point is kept only when ``d < 0`` there.
    """
    cq = _quadrature(grid, quad, None)
    fine = CellQuadrature(grid, cq.order, cq.ns * cut_refine)
    g = grid
    cj, ci = np.meshgrid(np.arange(g.ny), np.arange(g.nx), indexing="ij")
    centres = np.stack([g.box[0] + g.h * (ci + 0.5), g.box[2] + g.h * (cj + 0.5)], axis=-1)
    dc = geom.sdf(centres)
    half_diag = g.h / math.sqrt(2.0)
    cut = np.abs(dc) < half_diag
    inner = (dc <= -half_diag)
    ev = _Evaluable(u_h, u_ref, need_grad)
    s0, s1 = [], []
    for q, sel in ((cq, inner), (fine, cut)):
        for bi, bj in q.cell_chunks(ci[sel], cj[sel]):
            P = q.points(bi, bj)
            mask = geom.sdf(P) < 0.0
            w = np.where(mask, q.w, 0.0)
            val, grad = ev(q, bi, bj, P, mask=mask)
            s0.append(np.sum(w * val * val))
            if need_grad:
                s1.append(np.sum(w * np.sum(grad * grad, axis=-1)))
    return float(np.sum(s0)), (float(np.sum(s1)) if need_grad else 0.0)


def restricted_h1_error(u_h, u_ref, geom: SignedGeometry, grid: BoxGrid, quad=None,
                        cut_refine: int = 4) -> float:
    """``|u_h - u_ref|_{H^1(Ω*)}`` by sampling the inside indicator at quadrature points."""
    i0, i1 = restricted_integrals(u_h, u_ref, geom, grid, quad, cut_refine)
    return math.sqrt(i0 + i1)


def surface_norm_exact(v: ScalarData, geom: SignedGeometry, n_points: int = 4096) -> float:
    """``H^1(Γ)`` norm of curve data from the geometry's surface rule."""
    v = as_data(v)
    if not v.has_grad():
        raise ValueError("surface data needs a derivative closure for an H1 norm")
    rule = geom.surface_rule(n_points)
    val = v(rule.points)
    gs = surface_gradient(v, geom, rule.points)
    return math.sqrt(float(np.sum(rule.weights * (val * val + np.sum(gs * gs, axis=-1)))))


def surface_integral(f: ScalarData, geom: SignedGeometry, n_points: int = 4096) -> float:
    rule = geom.surface_rule(n_points)
    return float(np.sum(rule.weights * as_data(f)(rule.points)))


def delta_functional(f, weights: ScaledWeights, grid: BoxGrid, quad=None) -> float:
    """``int_Ω delta_eps f dx`` by grid quadrature."""
    cq = _quadrature(grid, quad, weights.epsilon)
    geom = weights.geometry
    ci, cj = _cells_in_band(cq, geom, weights.epsilon * weights.profile.support)
    ev = _Evaluable(f, None, need_grad=False)
    parts = []
    for bi, bj in cq.cell_chunks(ci, cj):
        P = cq.points(bi, bj)
        w = weights.delta_of_distance(geom.sdf(P)) * cq.w
        val, _ = ev(cq, bi, bj, P)
        parts.append(np.sum(w * val))
    return float(np.sum(parts))
