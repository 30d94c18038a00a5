"""Analytic signed-distance geometry for closed planar curves.

Point arrays have shape ``(..., 2)``; scalar results have shape ``(...,)``.
The sign convention is negative inside the enclosed region, zero on the
curve and positive outside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

_F = npt.NDArray[np.floating]

MEDIAL_TOL = 1e-9
REACH_FRACTION = 0.99


class GeometryError(ValueError):
    """Raised for queries outside the region where an operator is defined."""


class ConvergenceError(RuntimeError):
    """Raised when the ellipse closest-point iteration fails to converge."""


def _as_points(x) -> _F:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError(f"expected points with trailing dimension 2, got shape {x.shape}")
    return x


def _outer(a: _F, b: _F) -> _F:
    return a[..., :, None] * b[..., None, :]


@dataclass(frozen=True)
class TubularRule:
    """Quadrature over the band ``|d| < eta`` in (closest point, distance) coordinates."""

    eta: float
    points: _F
    weights: _F
    jacobian: _F
    offsets: _F

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.points)))


@dataclass(frozen=True)
class SurfaceRule:
    """Quadrature on the curve: nodes, weights summing to its length, unit tangents."""

    points: _F
    weights: _F
    tangents: _F
    normals: _F
    params: _F

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.points)))


@dataclass(frozen=True)
class SignedGeometry:
    """Base class; subclasses supply the curve-specific pieces."""

    center: tuple[float, float] = (0.0, 0.0)
    box: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0)

    kind: str = field(default="", init=False)

    # curve-specific hooks --------------------------------------------------
    @property
    def reach(self) -> float:
        raise NotImplementedError

    @property
    def perimeter(self) -> float:
        raise NotImplementedError

    def curve_point(self, t) -> _F:
        raise NotImplementedError

    def curve_tangent(self, t) -> _F:
        """Derivative of the parameterisation with respect to ``t``."""
        raise NotImplementedError

    def param_of(self, p) -> _F:
        """Curve parameter of points already on the curve."""
        raise NotImplementedError

    def medial_distance(self, x) -> _F:
        raise NotImplementedError

    def _project(self, x: _F) -> tuple[_F, _F]:
        """Return (closest point, signed distance) without validity checks."""
        raise NotImplementedError

    def curvature(self, p) -> _F:
        raise NotImplementedError

    def normal(self, p) -> _F:
        raise NotImplementedError

    # shared operators ------------------------------------------------------
    def _local(self, x) -> _F:
        return _as_points(x) - np.asarray(self.center, dtype=float)

    def sdf(self, x) -> _F:
        return self._project(_as_points(x))[1]

    def _check_medial(self, x: _F) -> None:
        md = self.medial_distance(x)
        if np.any(md <= MEDIAL_TOL):
            bad = x.reshape(-1, 2)[np.argmin(md.reshape(-1))]
            raise GeometryError(f"query {bad.tolist()} lies on or near the medial axis")

    def closest_point(self, x) -> _F:
        x = _as_points(x)
        self._check_medial(x)
        return self._project(x)[0]

    def project(self, x) -> tuple[_F, _F]:
        """Closest point and signed distance in one pass (medial axis rejected)."""
        x = _as_points(x)
        self._check_medial(x)
        return self._project(x)

    def tangent(self, p) -> _F:
        nu = self.normal(p)
        return np.stack([-nu[..., 1], nu[..., 0]], axis=-1)

    def sdf_hessian(self, x) -> _F:
        """Hessian of the signed distance, ``kappa / (1 + d kappa) * tau tau^T``."""
        x = _as_points(x)
        p, d = self.project(x)
        kappa = self.curvature(p)
        denom = 1.0 + d * kappa
        if np.any(denom <= 1.0 - REACH_FRACTION):
            raise GeometryError("Hessian requested beyond the reach of the curve")
        tau = self.tangent(p)
        return (kappa / denom)[..., None, None] * _outer(tau, tau)

    def inside(self, x) -> npt.NDArray[np.bool_]:
        return self.sdf(x) < 0.0

    def clearance(self) -> float:
        """Smallest distance between the curve and the box boundary."""
        rule = self.surface_rule(2048)
        xmin, xmax, ymin, ymax = self.box
        px, py = rule.points[:, 0], rule.points[:, 1]
        return float(min((px - xmin).min(), (xmax - px).min(), (py - ymin).min(), (ymax - py).min()))

    def check_inside_box(self) -> None:
        if self.clearance() <= 0.0:
            raise GeometryError("curve must lie strictly inside the box")

    def surface_rule(self, n_p: int) -> SurfaceRule:
        if n_p < 8:
            raise ValueError("surface rule needs at least 8 nodes")
        t = 2.0 * np.pi * np.arange(n_p) / n_p
        pts = self.curve_point(t)
        dt = self.curve_tangent(t)
        speed = np.linalg.norm(dt, axis=-1)
        w = speed * (2.0 * np.pi / n_p)
        tau = dt / speed[:, None]
        nu = np.stack([tau[:, 1], -tau[:, 0]], axis=-1)
        return SurfaceRule(points=pts, weights=w, tangents=tau, normals=nu, params=t)

    def tubular_rule(self, eta: float, n_t: int, n_p: int) -> TubularRule:
        if not 0.0 < eta < REACH_FRACTION * self.reach:
            raise GeometryError(f"eta={eta} must lie in (0, {REACH_FRACTION} * reach={self.reach})")
        srule = self.surface_rule(n_p)
        gx, gw = np.polynomial.legendre.leggauss(n_t)
        t = eta * gx
        kappa = self.curvature(srule.points)
        jac = 1.0 + t[None, :] * kappa[:, None]
        pts = srule.points[:, None, :] + t[None, :, None] * srule.normals[:, None, :]
        w = srule.weights[:, None] * (eta * gw)[None, :] * jac
        return TubularRule(
            eta=eta,
            points=pts.reshape(-1, 2),
            weights=w.reshape(-1),
            jacobian=jac.reshape(-1),
            offsets=np.broadcast_to(t[None, :], jac.shape).reshape(-1),
        )


@dataclass(frozen=True)
class Circle(SignedGeometry):
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", "circle")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def reach(self) -> float:
        return float(self.radius)

    @property
    def perimeter(self) -> float:
        return 2.0 * np.pi * self.radius

    def curve_point(self, t) -> _F:
        t = np.asarray(t, dtype=float)
        c = np.asarray(self.center, dtype=float)
        return c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def curve_tangent(self, t) -> _F:
        t = np.asarray(t, dtype=float)
        return self.radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def param_of(self, p) -> _F:
        y = self._local(p)
        return np.arctan2(y[..., 1], y[..., 0])

    def medial_distance(self, x) -> _F:
        return np.linalg.norm(self._local(x), axis=-1)

    def _project(self, x: _F) -> tuple[_F, _F]:
        y = x - np.asarray(self.center, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        safe = np.where(r > 0.0, r, 1.0)
        u = y / safe[..., None]
        u = np.where((r > 0.0)[..., None], u, np.array([1.0, 0.0]))
        p = np.asarray(self.center, dtype=float) + self.radius * u
        return p, r - self.radius

    def curvature(self, p) -> _F:
        return np.full(np.shape(p)[:-1], 1.0 / self.radius)

    def normal(self, p) -> _F:
        y = self._local(p)
        return y / np.linalg.norm(y, axis=-1)[..., None]


@dataclass(frozen=True)
class Ellipse(SignedGeometry):
    """Axis-aligned ellipse ``(x/a)^2 + (y/b)^2 = 1`` about ``center``."""

    radii: tuple[float, float] = (2.0, 1.0)
    max_iter: int = 50
    tol: float = 1e-13

    def __post_init__(self):
        object.__setattr__(self, "kind", "ellipse")
        a, b = self.radii
        if a <= 0 or b <= 0:
            raise ValueError("radii must be positive")

    @property
    def reach(self) -> float:
        return float(min(self.radii) ** 2 / max(self.radii))

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.surface_rule(4096).weights))

    def curve_point(self, t) -> _F:
        t = np.asarray(t, dtype=float)
        a, b = self.radii
        return np.asarray(self.center, dtype=float) + np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)

    def curve_tangent(self, t) -> _F:
        t = np.asarray(t, dtype=float)
        a, b = self.radii
        return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1)

    def param_of(self, p) -> _F:
        y = self._local(p)
        a, b = self.radii
        return np.arctan2(y[..., 1] / b, y[..., 0] / a)

    def medial_distance(self, x) -> _F:
        y = self._local(x)
        a, b = self.radii
        if a >= b:
            half = (a * a - b * b) / a
            along, across = y[..., 0], y[..., 1]
        else:
            half = (b * b - a * a) / b
            along, across = y[..., 1], y[..., 0]
        dist = np.hypot(np.maximum(np.abs(along) - half, 0.0), across)
        # the medial axis is interior: exterior points are never ambiguous
        outside = (y[..., 0] / a) ** 2 + (y[..., 1] / b) ** 2 >= 1.0
        return np.where(outside, np.inf, dist)

    def _project(self, x: _F) -> tuple[_F, _F]:
        y = x - np.asarray(self.center, dtype=float)
        a, b = self.radii
        shape = y.shape[:-1]
        y0 = np.abs(y[..., 0]).reshape(-1)
        y1 = np.abs(y[..., 1]).reshape(-1)
        swap = a < b
        if swap:
            a, b = b, a
            y0, y1 = y1, y0
        # closest point on the first-quadrant arc via the Lagrange multiplier s:
        # F(s) = (a y0/(s+a^2))^2 + (b y1/(s+b^2))^2 - 1 is decreasing on (-b^2, inf)
        lo = np.maximum(-b * b + b * y1, -a * a + a * y0)
        hi = np.hypot(a * y0, b * y1) - b * b
        hi = np.maximum(hi, lo)
        on_axis = y1 == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            s = self._solve_multiplier(a, b, y0, y1, lo, hi, on_axis)
            p0 = a * a * y0 / (s + a * a)
            p1 = np.where(on_axis, 0.0, b * b * y1 / (s + b * b))
        # points on the major axis: the root is s = a|y0| - a^2 when it exceeds -b^2
        s_axis = a * y0 - a * a
        axis_ok = s_axis > -b * b
        p0 = np.where(on_axis & axis_ok, a, p0)
        p1 = np.where(on_axis & axis_ok, 0.0, p1)
        xm = a * a * y0 / (a * a - b * b) if a != b else np.zeros_like(y0)
        off = on_axis & ~axis_ok
        p0 = np.where(off, xm, p0)
        p1 = np.where(off, b * np.sqrt(np.clip(1.0 - (xm / a) ** 2, 0.0, None)), p1)
        if swap:
            p0, p1 = p1, p0
            a, b = b, a
            y0, y1 = y1, y0
        sx = np.where(y[..., 0].reshape(-1) < 0.0, -1.0, 1.0)
        sy = np.where(y[..., 1].reshape(-1) < 0.0, -1.0, 1.0)
        q = np.stack([sx * p0, sy * p1], axis=-1)
        yf = y.reshape(-1, 2)
        dist = np.linalg.norm(yf - q, axis=-1)
        inside = (yf[:, 0] / a) ** 2 + (yf[:, 1] / b) ** 2 < 1.0
        d = np.where(inside, -dist, dist)
        p = q + np.asarray(self.center, dtype=float)
        return p.reshape(shape + (2,)), d.reshape(shape)

    def _solve_multiplier(self, a, b, y0, y1, lo, hi, skip):
        """Safeguarded Newton for the root of F(s) on the bracket [lo, hi]."""
        s = 0.5 * (lo + hi)
        converged = skip.copy()
        for _ in range(self.max_iter):
            r0 = a * y0 / (s + a * a)
            r1 = b * y1 / (s + b * b)
            F = r0 * r0 + r1 * r1 - 1.0
            dF = -2.0 * (r0 * r0 / (s + a * a) + r1 * r1 / (s + b * b))
            lo = np.where(F > 0.0, s, lo)
            hi = np.where(F < 0.0, s, hi)
            step = np.where(dF < 0.0, F / dF, 0.0)
            s_new = s - step
            # a converged Newton step may land exactly on a bracket end
            newton_done = np.abs(step) <= self.tol * np.maximum(1.0, np.abs(s))
            bad = ~((s_new >= lo) & (s_new <= hi)) & ~newton_done
            s_new = np.where(bad, 0.5 * (lo + hi), s_new)
            delta = np.abs(s_new - s)
            s = np.where(skip, s, s_new)
            converged = skip | (delta <= self.tol * np.maximum(1.0, np.abs(s))) | (F == 0.0) | (hi - lo <= 0.0)
            if np.all(converged):
                return s
        raise ConvergenceError(
            f"ellipse closest-point iteration did not converge in {self.max_iter} steps; "
            "parameters may be degenerate"
        )

    def curvature(self, p) -> _F:
        y = self._local(p)
        a, b = self.radii
        # kappa = a b / (a^2 sin^2 t + b^2 cos^2 t)^{3/2} with cos t = x/a, sin t = y/b
        c, s = y[..., 0] / a, y[..., 1] / b
        return a * b / (a * a * s * s + b * b * c * c) ** 1.5

    def normal(self, p) -> _F:
        y = self._local(p)
        a, b = self.radii
        g = np.stack([y[..., 0] / (a * a), y[..., 1] / (b * b)], axis=-1)
        return g / np.linalg.norm(g, axis=-1)[..., None]


def make_geometry(kind: str, **params) -> SignedGeometry:
    kind = kind.lower()
    box = tuple(float(v) for v in params.get("box", (-2.0, 2.0, -2.0, 2.0)))
    center = tuple(float(v) for v in params.get("center", (0.0, 0.0)))
    if kind == "circle":
        geom: SignedGeometry = Circle(center=center, box=box, radius=float(params.get("radius", 1.0)))
    elif kind == "ellipse":
        radii = tuple(float(v) for v in params.get("radii", (2.0, 1.0)))
        geom = Ellipse(center=center, box=box, radii=radii)
    else:
        raise ValueError(f"unknown geometry kind {kind!r}")
    geom.check_inside_box()
    return geom
