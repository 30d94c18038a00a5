"""Sharp-interface reference solutions on a disc and manufactured data.

Every problem on the disc with radial coefficients splits into independent
Fourier modes.  Mode ``k`` of the bulk field solves

    -(1/r) (r alpha u_k')' + (alpha k^2 / r^2 + a) u_k = f_k   on (0, R)

with a condition at ``r = R`` that depends on the problem.  The radial
equations are discretised by a vertex-centred finite volume scheme on three
nested grids; the two finest are combined by Richardson extrapolation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .fields import (
    AngularFourier,
    Closure,
    Constant,
    Radial,
    ScalarData,
    as_data,
)
from .geometry import Circle, SignedGeometry, _as_points

SHARP_VARIANTS = ("CSI", "SSI", "RSI", "DSIH", "NSIH")


class OracleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# radial coefficients and data decomposition
# ---------------------------------------------------------------------------

def _radial_coefficient(c, center, name: str):
    """Turn a coefficient into a function of ``r``; non-radial data is rejected."""
    if callable(c) and not isinstance(c, ScalarData):
        return c
    c = as_data(c)
    if isinstance(c, Constant):
        v = float(c.value)
        return lambda r: np.full_like(np.asarray(r, dtype=float), v)
    if isinstance(c, Radial) and np.allclose(c.center, center):
        return lambda r: np.asarray(c.fn(np.asarray(r, dtype=float)), dtype=float)
    # anything else must at least be numerically radial
    r = np.linspace(0.05, 1.0, 7)
    t = np.linspace(0, 2 * np.pi, 13, endpoint=False)
    pts = np.asarray(center) + np.stack([np.outer(r, np.cos(t)), np.outer(r, np.sin(t))], axis=-1)
    vals = c(pts)
    if np.max(np.ptp(vals, axis=1)) > 1e-12 * max(1.0, np.max(np.abs(vals))):
        raise OracleError(f"coefficient {name} is not radial about the disc centre")

    def fn(rr):
        rr = np.asarray(rr, dtype=float)
        p = np.stack([center[0] + rr, center[1] + 0.0 * rr], axis=-1)
        return c(p)

    return fn


def fourier_decompose(data: ScalarData, center, r: np.ndarray, modes: int, oversample: int = 4):
    """Cosine/sine coefficients ``(a[k, i], b[k, i])`` of ``data`` on circles of radius ``r[i]``.

    Also returns the largest coefficient beyond ``modes`` relative to the
    largest retained one (the truncation indicator).
    """
    M = max(8, oversample * (modes + 1))
    t = 2 * np.pi * np.arange(M) / M
    pts = np.asarray(center, dtype=float) + np.stack(
        [np.outer(r, np.cos(t)), np.outer(r, np.sin(t))], axis=-1)
    vals = data(pts)
    F = np.fft.rfft(vals, axis=1) / M
    a = 2 * F.real
    b = -2 * F.imag
    a[:, 0] *= 0.5
    b[:, 0] = 0.0
    if M % 2 == 0:
        a[:, -1] *= 0.5
        b[:, -1] = 0.0
    kept = min(modes + 1, a.shape[1])
    scale = max(np.max(np.abs(a[:, :kept])), np.max(np.abs(b[:, :kept])), 1e-300)
    tail = 0.0
    if a.shape[1] > kept:
        tail = max(np.max(np.abs(a[:, kept:])), np.max(np.abs(b[:, kept:]))) / scale
    # drop round-off noise so that absent modes are not solved for
    a[np.abs(a) < 1e-14 * scale] = 0.0
    b[np.abs(b) < 1e-14 * scale] = 0.0
    A = np.zeros((modes + 1, r.size))
    B = np.zeros((modes + 1, r.size))
    A[:kept] = a[:, :kept].T
    B[:kept] = b[:, :kept].T
    return A, B, float(tail)


def surface_coefficients(g: ScalarData, geom: Circle, modes: int):
    if isinstance(g, AngularFourier) and np.allclose(g.center, geom.center):
        return (*g.coefficients(modes), 0.0)
    A, B, tail = fourier_decompose(g, geom.center, np.array([geom.radius]), modes)
    return A[:, 0], B[:, 0], tail


# ---------------------------------------------------------------------------
# radial solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialBC:
    """Condition at ``r = R``.

    ``kind`` is ``"robin"`` (``alpha u' + coef u = data``) or ``"dirichlet"``
    (``u = data``); Neumann is Robin with ``coef = 0``.
    """

    kind: str
    coef: float = 0.0


def radial_matrix(k: int, n: int, R: float, alpha, a, bc: RadialBC):
    """Banded finite-volume matrix and control volumes for mode ``k`` on ``n`` cells."""
    dr = R / n
    r = dr * np.arange(n + 1)
    rh = r[:-1] + 0.5 * dr
    ah = alpha(rh)
    flux = rh * ah / dr  # conductance of each half-node face
    vol = r * dr
    vol[0] = dr * dr / 8.0
    vol[-1] = (R * R - (R - 0.5 * dr) ** 2) / 2.0
    al = alpha(r)
    reac = a(r) * vol
    safe = np.where(r > 0, r, 1.0)
    reac = reac + np.where(r > 0, al * k * k / (safe * safe), 0.0) * vol
    diag = reac.copy()
    diag[:-1] += flux
    diag[1:] += flux
    upper = np.zeros(n + 1)
    lower = np.zeros(n + 1)
    upper[1:] = -flux          # entry (i, i+1) stored at column i+1
    lower[:-1] = -flux         # entry (i+1, i) stored at column i
    if k > 0:
        # regularity: u_k(0) = 0
        diag[0] = 1.0
        upper[1] = 0.0
    if bc.kind == "robin":
        diag[-1] += R * bc.coef
    elif bc.kind == "dirichlet":
        diag[-1] = 1.0
        lower[-2] = 0.0
    else:
        raise OracleError(f"unknown radial condition {bc.kind!r}")
    ab = np.vstack([upper, diag, lower])
    return ab, vol, r


def solve_radial(k: int, n: int, R: float, alpha, a, rhs_f: np.ndarray, bc: RadialBC, bc_data: float):
    """Solve one mode; ``rhs_f`` holds ``f_k`` at the ``n + 1`` nodes."""
    ab, vol, r = radial_matrix(k, n, R, alpha, a, bc)
    rhs = vol * rhs_f
    if k > 0:
        rhs[0] = 0.0
    if bc.kind == "robin":
        rhs[-1] += R * bc_data
    else:
        rhs[-1] = bc_data
    u = solve_banded((1, 1), ab, rhs)
    resid = _banded_apply(ab, u) - rhs
    return r, u, float(np.max(np.abs(resid)) / max(1.0, np.max(np.abs(rhs))))


def _banded_apply(ab, u):
    y = ab[1] * u
    y[:-1] += ab[0, 1:] * u[1:]
    y[1:] += ab[2, :-1] * u[:-1]
    return y


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------

class ModalField(ScalarData):
    """``sum_k a_k(r) cos(k t) + b_k(r) sin(k t)`` from tabulated radial profiles."""

    def __init__(self, r: np.ndarray, cos_prof: np.ndarray, sin_prof: np.ndarray, center, lifting=None):
        self.r = r
        self.R = float(r[-1])
        self.cos_prof = cos_prof
        self.sin_prof = sin_prof
        self.center = np.asarray(center, dtype=float)
        self.lifting = lifting
        self.active = [k for k in range(cos_prof.shape[0])
                       if np.any(cos_prof[k] != 0.0) or np.any(sin_prof[k] != 0.0)]
        self._spl = {k: (CubicSpline(r, cos_prof[k]), CubicSpline(r, sin_prof[k])) for k in self.active}

    def has_grad(self):
        return True

    def _polar(self, x):
        y = _as_points(x) - self.center
        r = np.linalg.norm(y, axis=-1)
        if np.any(r > self.R * (1 + 1e-9)):
            raise OracleError("sharp bulk solution evaluated outside the disc")
        return y, np.minimum(r, self.R), np.arctan2(y[..., 1], y[..., 0])

    def raw(self, x):
        _, r, t = self._polar(x)
        out = np.zeros_like(r)
        for k in self.active:
            sc, ss = self._spl[k]
            out += sc(r) * np.cos(k * t) + ss(r) * np.sin(k * t)
        return out

    def raw_grad(self, x):
        y, r, t = self._polar(x)
        ur = np.zeros_like(r)
        ut_over_r = np.zeros_like(r)
        small = r < 1e-12
        safe = np.where(small, 1.0, r)
        for k in self.active:
            sc, ss = self._spl[k]
            c, s = np.cos(k * t), np.sin(k * t)
            ur += sc(r, 1) * c + ss(r, 1) * s
            if k > 0:
                # u_k(r)/r -> u_k'(0) as r -> 0
                ratio_c = np.where(small, sc(0.0, 1), sc(r) / safe)
                ratio_s = np.where(small, ss(0.0, 1), ss(r) / safe)
                ut_over_r += k * (-ratio_c * s + ratio_s * c)
        er = np.stack([np.cos(t), np.sin(t)], axis=-1)
        et = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        g = ur[..., None] * er + ut_over_r[..., None] * et
        if np.any(small):
            # at the centre only the k = 0 (zero slope) and k = 1 modes contribute
            g0 = np.zeros(2)
            if 1 in self.active:
                sc, ss = self._spl[1]
                g0 = np.array([float(sc(0.0, 1)), float(ss(0.0, 1))])
            g[small] = g0
        return g

    def __call__(self, x):
        out = self.raw(x)
        if self.lifting is not None:
            out = out - self.lifting(x)
        return out

    def grad(self, x):
        out = self.raw_grad(x)
        if self.lifting is not None:
            out = out - self.lifting.grad(x)
        return out


@dataclass
class SharpSolution:
    """Reference solution of a sharp-interface problem on a disc.

    ``bulk`` is the Ω*-field (``None`` for the surface problem); for the
    homogenised Dirichlet/Neumann problems it already has the lifting
    subtracted.  ``surface`` is the curve field as an angular Fourier series.
    """

    variant: str
    geometry: Circle
    r: np.ndarray | None
    cos_prof: np.ndarray | None
    sin_prof: np.ndarray | None
    boundary_derivative: np.ndarray | None
    surface_modes: list
    bulk: ModalField | None
    surface: AngularFourier | None
    diagnostics: dict = field(default_factory=dict)

    def _need_bulk(self) -> ModalField:
        if self.bulk is None:
            raise OracleError(f"{self.variant} has no bulk field")
        return self.bulk

    def u(self, x):
        return self._need_bulk()(x)

    def grad_u(self, x):
        return self._need_bulk().grad(x)

    def v(self, theta):
        return self.surface.of_angle(theta)

    def dv_dtheta(self, theta):
        return self.surface.of_angle(theta, 1)

    def mode_h1_squared(self) -> float:
        """``|u|^2_{H^1(disc)}`` of the bulk part (without lifting), from the radial profiles."""
        return _modal_h1_squared(self.r, self.cos_prof, self.sin_prof)

    def surface_h1(self) -> float:
        """``H^1(Γ)`` norm of the surface part by Parseval."""
        R = self.geometry.radius
        tot = 0.0
        for k, a, b in self.surface_modes:
            c = 2 * np.pi if k == 0 else np.pi
            tot += c * R * (1 + k * k / (R * R)) * (a * a + b * b)
        return float(np.sqrt(tot))

    def to_csv(self, path) -> None:
        """Tabulated radial profiles: ``r`` then ``u_k`` cosine and sine columns."""
        if self.r is None:
            raise OracleError("surface-only solution has no radial profiles")
        ks = [k for k in range(self.cos_prof.shape[0])
              if np.any(self.cos_prof[k]) or np.any(self.sin_prof[k])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r"] + [f"u{k}_{part}" for k in ks for part in ("cos", "sin")])
            for i, ri in enumerate(self.r):
                row = [repr(float(ri))]
                for k in ks:
                    row += [repr(float(self.cos_prof[k, i])), repr(float(self.sin_prof[k, i]))]
                w.writerow(row)


def _modal_h1_squared(r, cp, sp_) -> float:
    xg, wg = np.polynomial.legendre.leggauss(6)
    tot = 0.0
    for k in range(cp.shape[0]):
        for prof in (cp[k], sp_[k]):
            if not np.any(prof):
                continue
            c = 2 * np.pi if k == 0 else np.pi
            s = CubicSpline(r, prof)
            lo, hi = r[:-1], r[1:]
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            rq = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
            wq = (half[:, None] * wg[None, :]).ravel()
            u, du = s(rq), s(rq, 1)
            integrand = (u * u + du * du) * rq + k * k * u * u / rq
            tot += c * float(np.sum(wq * integrand))
    return tot


def _check_disc(geometry) -> Circle:
    if not isinstance(geometry, Circle):
        raise OracleError("the sharp oracle needs a circular interface")
    return geometry


def solve_sharp_disc(variant: str, geometry: Circle, A=1.0, a=1.0, f=0.0, B=1.0, b=1.0, g=0.0,
                     K: float = 1.0, beta: float = 1.0, lifting: ScalarData | None = None,
                     modes: int = 16, n_r: int = 1024, tol: float = 1e-8) -> SharpSolution:
    """Solve one of CSI, SSI, RSI, DSIH, NSIH on the disc bounded by ``geometry``.

    ``g`` is Dirichlet data (DSIH), conormal data (NSIH), Robin data (RSI) or
    surface data (CSI, SSI).  For DSIH and NSIH ``lifting`` (the same
    function the diffuse problem uses) is subtracted from the full solution.
    """
    variant = variant.upper()
    if variant.startswith("DSIH") or variant == "DSI":
        variant = "DSIH"
    if variant == "NSI":
        variant = "NSIH"
    if variant not in SHARP_VARIANTS:
        raise OracleError(f"unknown sharp problem {variant!r}")
    geom = _check_disc(geometry)
    R, c = geom.radius, np.asarray(geom.center, dtype=float)
    g = as_data(g)
    gc, gs, gtail = surface_coefficients(g, geom, modes)
    Bs, bs = _surface_constant(B, "B"), _surface_constant(b, "b")
    diag = {"surface_truncation": gtail}

    if variant == "SSI":
        vmodes = []
        for k in range(modes + 1):
            den = Bs * k * k / (R * R) + bs
            if den <= 0:
                raise OracleError("surface operator is not positive")
            if gc[k] or gs[k]:
                vmodes.append((k, gc[k] / den, gs[k] / den))
        surf = AngularFourier(vmodes or [(0, 0.0, 0.0)], center=c)
        return SharpSolution(variant, geom, None, None, None, None, vmodes, None, surf, diag)

    alpha = _radial_coefficient(A, c, "A")
    areac = _radial_coefficient(a, c, "a")
    f = as_data(f)
    alpha_R = float(alpha(np.array([R]))[0])

    # three nested grids: order check plus Richardson on the two finest
    grids = (n_r, 2 * n_r, 4 * n_r)
    sols = []
    resid = 0.0
    for n in grids:
        r = (R / n) * np.arange(n + 1)
        fc, fs, ftail = fourier_decompose(f, c, r, modes)
        diag["bulk_truncation"] = max(diag.get("bulk_truncation", 0.0), ftail)
        cp = np.zeros((modes + 1, n + 1))
        sp_ = np.zeros((modes + 1, n + 1))
        for k in range(modes + 1):
            bc, data_c, data_s = _mode_condition(variant, k, R, gc[k], gs[k], Bs, bs, K, beta)
            for prof, fk, dk in ((cp, fc[k], data_c), (sp_, fs[k], data_s)):
                if k == 0 and prof is sp_:
                    continue
                if not np.any(fk) and dk == 0.0:
                    continue
                _, u, res = solve_radial(k, n, R, alpha, areac, fk, bc, dk)
                prof[k] = u
                resid = max(resid, res)
        sols.append((r, cp, sp_))
    (r0, c0, s0), (_, c1, s1), (_, c2, s2) = sols
    c1, s1 = c1[:, ::2], s1[:, ::2]
    c2, s2 = c2[:, ::4], s2[:, ::4]
    d01 = max(np.max(np.abs(c1 - c0)), np.max(np.abs(s1 - s0)))
    d12 = max(np.max(np.abs(c2 - c1)), np.max(np.abs(s2 - s1)))
    cp = (4 * c2 - c1) / 3
    sp_ = (4 * s2 - s1) / 3
    diag.update({
        "discrete_residual": resid,
        "observed_order": float(np.log2(d01 / d12)) if d12 > 0 and d01 > 0 else float("inf"),
        "richardson_correction": float(d12 / 3),
    })

    # the boundary derivative follows from the condition at r = R
    uR_c, uR_s = cp[:, -1], sp_[:, -1]
    du = np.zeros((modes + 1, 2))
    vmodes = []
    for k in range(modes + 1):
        for j, (uR, gk) in enumerate(((uR_c[k], gc[k]), (uR_s[k], gs[k]))):
            if variant == "RSI":
                du[k, j] = beta * (gk - uR) / alpha_R
            elif variant == "NSIH":
                du[k, j] = gk / alpha_R
            elif variant == "CSI":
                D = Bs * k * k / (R * R) + bs + K
                vk = (beta * gk + K * uR) / D
                du[k, j] = K * (vk - uR) / alpha_R
        if variant == "CSI":
            D = Bs * k * k / (R * R) + bs + K
            va = (beta * gc[k] + K * uR_c[k]) / D
            vb = (beta * gs[k] + K * uR_s[k]) / D
            if va or vb:
                vmodes.append((k, float(va), float(vb)))
    if variant == "DSIH":
        # one-sided fourth-order difference of the extrapolated profile
        h = r0[1] - r0[0]
        w = np.array([3.0, -16.0, 36.0, -48.0, 25.0]) / (12 * h)
        du[:, 0] = cp[:, -5:] @ w
        du[:, 1] = sp_[:, -5:] @ w
    surf = AngularFourier(vmodes, center=c) if variant == "CSI" and vmodes else (
        AngularFourier([(0, 0.0, 0.0)], center=c) if variant == "CSI" else None)
    sub = lifting if variant in ("DSIH", "NSIH") else None
    bulk = ModalField(r0, cp, sp_, c, lifting=sub)
    if variant == "CSI":
        D = Bs * np.arange(modes + 1) ** 2 / (R * R) + bs + K
        v_c = np.array([(beta * gc[k] + K * uR_c[k]) / D[k] for k in range(modes + 1)])
        v_s = np.array([(beta * gs[k] + K * uR_s[k]) / D[k] for k in range(modes + 1)])
        diag["flux_mismatch"] = float(np.max(np.abs(alpha_R * du[:, 0] - K * (v_c - uR_c))) +
                                      np.max(np.abs(alpha_R * du[:, 1] - K * (v_s - uR_s))))
    if resid > tol:
        raise OracleError(f"radial solve residual {resid:.2e} above {tol:g}")
    return SharpSolution(variant, geom, r0, cp, sp_, du, vmodes, bulk, surf, diag)


def _surface_constant(c, name):
    c = as_data(c)
    if not c.is_constant:
        raise OracleError(f"surface coefficient {name} must be constant")
    return float(np.ravel(c(np.zeros((1, 2))))[0])


def _mode_condition(variant, k, R, gk_c, gk_s, Bs, bs, K, beta):
    if variant == "RSI":
        return RadialBC("robin", beta), beta * gk_c, beta * gk_s
    if variant == "DSIH":
        return RadialBC("dirichlet"), gk_c, gk_s
    if variant == "NSIH":
        return RadialBC("robin", 0.0), gk_c, gk_s
    if variant == "CSI":
        # eliminating v_k turns the coupling into an effective Robin condition
        D = Bs * k * k / (R * R) + bs + K
        coef = K * (Bs * k * k / (R * R) + bs) / D
        return RadialBC("robin", coef), K * beta * gk_c / D, K * beta * gk_s / D
    raise OracleError(variant)


# ---------------------------------------------------------------------------
# manufactured data
# ---------------------------------------------------------------------------

@dataclass
class DataBundle:
    f: ScalarData | None
    g: ScalarData | None
    u: ScalarData | None
    v: ScalarData | None


def surface_laplacian(v: ScalarData, geom: SignedGeometry, p, step: float = 1e-3):
    """Laplace-Beltrami of ``v`` at curve points ``p`` by differences in arclength."""
    p = _as_points(p)
    t = geom.param_of(p)
    speed = lambda s: np.linalg.norm(geom.curve_tangent(s), axis=-1)
    vt = lambda s: v(geom.curve_point(s))

    def dv_ds(s):
        return (-vt(s + 2 * step) + 8 * vt(s + step) - 8 * vt(s - step) + vt(s - 2 * step)) / (12 * step) / speed(s)

    return (-dv_ds(t + 2 * step) + 8 * dv_ds(t + step) - 8 * dv_ds(t - step) + dv_ds(t - 2 * step)) / (
        12 * step) / speed(t)


def manufactured(variant: str, geometry: SignedGeometry, u: ScalarData | None = None,
                 v: ScalarData | None = None, A: float = 1.0, a=1.0, B: float = 1.0, b=1.0,
                 K: float = 1.0, beta: float = 1.0) -> DataBundle:
    """Data ``(f, g)`` for which the chosen fields solve the sharp problem exactly.

    Diffusion coefficients are constant scalars.  For CSI the surface field
    is fixed by the flux condition, ``v = u + (A/K) du/dnu`` on the curve, and
    is returned in the bundle.  The returned ``g`` evaluates at the closest
    point, so it is constant along normals.
    """
    variant = variant.upper()
    a, b = as_data(a), as_data(b)
    f = None
    if u is not None:
        u = as_data(u)
        f = Closure(lambda x: -A * u.laplacian(x) + a(x) * u(x), name="f")

    def on_curve(fn):
        return Closure(lambda x: fn(geometry.closest_point(x)), name="g")

    def dnu(p):
        return np.sum(u.grad(p) * geometry.normal(p), axis=-1)

    if variant == "RSI":
        g = on_curve(lambda p: u(p) + A / beta * dnu(p))
    elif variant in ("DSI", "DSIH"):
        g = on_curve(lambda p: u(p))
    elif variant in ("NSI", "NSIH"):
        g = on_curve(lambda p: A * dnu(p))
    elif variant == "SSI":
        v = as_data(v)
        g = on_curve(lambda p: -B * surface_laplacian(v, geometry, p) + b(p) * v(p))
    elif variant == "CSI":
        v = on_curve(lambda p: u(p) + A / K * dnu(p))
        vv = v
        g = on_curve(lambda p: (-B * surface_laplacian(vv, geometry, p) + b(p) * vv(p)
                                + K * (vv(p) - u(p))) / beta)
    else:
        raise OracleError(f"unknown sharp problem {variant!r}")
    return DataBundle(f=f, g=g, u=u, v=v)


# ---------------------------------------------------------------------------
# Robin to Dirichlet
# ---------------------------------------------------------------------------

def modal_h1_distance(s1: SharpSolution, s2: SharpSolution) -> float:
    """``H^1(disc)`` distance of two bulk solutions on the same radial grid (liftings cancel)."""
    if s1.r.shape != s2.r.shape or not np.array_equal(s1.r, s2.r):
        raise OracleError("solutions live on different radial grids")
    return float(np.sqrt(_modal_h1_squared(s1.r, s1.cos_prof - s2.cos_prof, s1.sin_prof - s2.sin_prof)))


def robin_penalty_study(geometry: Circle, betas, A=1.0, a=1.0, f=0.0, g=0.0, lifting=None,
                        modes: int = 16, n_r: int = 1024) -> list[dict]:
    """``|w^beta - w_D|_{H^1(disc)}`` for each Robin coefficient.

    ``w^beta = u^beta - g~`` and ``w_D = u_D - g~`` share the lifting, so the
    distance is that of the full Robin and Dirichlet solutions.
    """
    ref = solve_sharp_disc("DSIH", geometry, A=A, a=a, f=f, g=g, lifting=lifting, modes=modes, n_r=n_r)
    rows = []
    for beta in betas:
        sol = solve_sharp_disc("RSI", geometry, A=A, a=a, f=f, g=g, beta=float(beta), modes=modes, n_r=n_r)
        rows.append({"beta": float(beta), "h1_error": modal_h1_distance(sol, ref)})
    return rows
