"""Grid fields, coefficient descriptors and extension operators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from .geometry import Circle, SignedGeometry, _as_points

_F = npt.NDArray[np.floating]


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

def cutoff(t, plateau: float = 0.5):
    """C^1 cutoff: 1 on [0, plateau], cubic smoothstep down to 0 at 1."""
    t = np.asarray(t, dtype=float)
    s = np.clip((t - plateau) / (1.0 - plateau), 0.0, 1.0)
    return 1.0 - 3.0 * s * s + 2.0 * s ** 3


def cutoff_prime(t, plateau: float = 0.5):
    t = np.asarray(t, dtype=float)
    s = np.clip((t - plateau) / (1.0 - plateau), 0.0, 1.0)
    return (-6.0 * s + 6.0 * s * s) / (1.0 - plateau)


def cutoff_second(t, plateau: float = 0.5):
    t = np.asarray(t, dtype=float)
    inside = (t > plateau) & (t < 1.0)
    s = np.clip((t - plateau) / (1.0 - plateau), 0.0, 1.0)
    return np.where(inside, (-6.0 + 12.0 * s) / (1.0 - plateau) ** 2, 0.0)


# ---------------------------------------------------------------------------
# scalar data
# ---------------------------------------------------------------------------

class ScalarData:
    """A scalar function on the plane with optional derivative closures."""

    is_constant = False

    def __call__(self, x) -> _F:
        raise NotImplementedError

    def grad(self, x) -> _F:
        return fd_gradient(self, _as_points(x))

    def laplacian(self, x) -> _F:
        return fd_laplacian(self, _as_points(x))

    def has_grad(self) -> bool:
        return False


def fd_gradient(f: Callable, x: _F, step: float = 1e-4) -> _F:
    """Fourth-order central difference gradient."""
    out = np.empty(x.shape, dtype=float)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        out[..., k] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * step)
    return out


def fd_laplacian(f: Callable, x: _F, step: float = 1e-3) -> _F:
    out = np.zeros(x.shape[:-1], dtype=float)
    fx = f(x)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        out += (-f(x + 2 * e) + 16 * f(x + e) - 30 * fx + 16 * f(x - e) - f(x - 2 * e)) / (12 * step * step)
    return out


@dataclass(frozen=True)
class Constant(ScalarData):
    value: float

    is_constant = True

    def __call__(self, x):
        return np.full(np.shape(x)[:-1], float(self.value))

    def grad(self, x):
        return np.zeros(np.shape(x), dtype=float)

    def laplacian(self, x):
        return np.zeros(np.shape(x)[:-1], dtype=float)

    def has_grad(self):
        return True


_RADIAL = {
    "zero": (lambda r: 0.0 * r, lambda r: 0.0 * r, lambda r: 0.0 * r),
    "one": (lambda r: 1.0 + 0.0 * r, lambda r: 0.0 * r, lambda r: 0.0 * r),
    "r2": (lambda r: r * r, lambda r: 2.0 * r, lambda r: 2.0 + 0.0 * r),
    "r4": (lambda r: r ** 4, lambda r: 4.0 * r ** 3, lambda r: 12.0 * r * r),
    "gauss": (lambda r: np.exp(-r * r), lambda r: -2 * r * np.exp(-r * r),
              lambda r: (4 * r * r - 2) * np.exp(-r * r)),
}


class Radial(ScalarData):
    """``f(|x - center|)`` with closures for the first two radial derivatives."""

    def __init__(self, fn, dfn=None, d2fn=None, center=(0.0, 0.0), name: str | None = None):
        if isinstance(fn, str):
            name = fn
            try:
                fn, dfn, d2fn = _RADIAL[fn]
            except KeyError:
                raise ValueError(f"unknown radial function {name!r}; known: {sorted(_RADIAL)}") from None
        self.fn, self.dfn, self.d2fn = fn, dfn, d2fn
        self.center = np.asarray(center, dtype=float)
        self.name = name
        self.is_constant = name in ("zero", "one")

    def _r(self, x):
        y = _as_points(x) - self.center
        return y, np.linalg.norm(y, axis=-1)

    def __call__(self, x):
        _, r = self._r(x)
        return np.asarray(self.fn(r), dtype=float)

    def has_grad(self):
        return self.dfn is not None

    def grad(self, x):
        if self.dfn is None:
            return super().grad(x)
        y, r = self._r(x)
        safe = np.where(r > 0, r, 1.0)
        return (self.dfn(r) / safe)[..., None] * y

    def laplacian(self, x):
        if self.d2fn is None or self.dfn is None:
            return super().laplacian(x)
        _, r = self._r(x)
        safe = np.where(r > 0, r, 1.0)
        # f'' + f'/r, with the r -> 0 limit 2 f''(0)
        return np.where(r > 0, self.d2fn(r) + self.dfn(r) / safe, 2.0 * self.d2fn(r))


class AngularFourier(ScalarData):
    """Trigonometric polynomial in the polar angle about ``center``.

    ``modes`` is a list of ``(k, a_k, b_k)`` meaning ``a_k cos(k t) + b_k sin(k t)``.
    As a function on the plane it is constant along rays from the centre.
    """

    def __init__(self, modes: Sequence, center=(0.0, 0.0)):
        cleaned = []
        for m in modes:
            m = list(m)
            k = int(m[0])
            a = float(m[1]) if len(m) > 1 else 0.0
            b = float(m[2]) if len(m) > 2 else 0.0
            if k < 0:
                raise ValueError("Fourier modes must be non-negative")
            cleaned.append((k, a, b))
        self.modes = tuple(cleaned)
        self.center = np.asarray(center, dtype=float)
        self.is_constant = all(k == 0 or (a == 0.0 and b == 0.0) for k, a, b in self.modes)

    def theta(self, x):
        y = _as_points(x) - self.center
        return np.arctan2(y[..., 1], y[..., 0])

    def of_angle(self, t, deriv: int = 0):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, a, b in self.modes:
            if deriv == 0:
                out += a * np.cos(k * t) + b * np.sin(k * t)
            elif deriv == 1:
                out += k * (-a * np.sin(k * t) + b * np.cos(k * t))
            elif deriv == 2:
                out += -k * k * (a * np.cos(k * t) + b * np.sin(k * t))
            else:
                raise ValueError("deriv must be 0, 1 or 2")
        return out

    def coefficients(self, kmax: int):
        """Dense cosine/sine coefficient arrays of length ``kmax + 1``."""
        a = np.zeros(kmax + 1)
        b = np.zeros(kmax + 1)
        for k, ak, bk in self.modes:
            if k > kmax:
                raise ValueError(f"mode {k} exceeds truncation {kmax}")
            a[k] += ak
            b[k] += bk
        return a, b

    def __call__(self, x):
        return self.of_angle(self.theta(x))

    def has_grad(self):
        return True

    def grad(self, x):
        y = _as_points(x) - self.center
        r2 = np.sum(y * y, axis=-1)
        safe = np.where(r2 > 0, r2, 1.0)
        dt = self.of_angle(np.arctan2(y[..., 1], y[..., 0]), 1)
        perp = np.stack([-y[..., 1], y[..., 0]], axis=-1)
        return (dt / safe)[..., None] * perp

    def laplacian(self, x):
        y = _as_points(x) - self.center
        r2 = np.sum(y * y, axis=-1)
        return self.of_angle(np.arctan2(y[..., 1], y[..., 0]), 2) / r2


class Closure(ScalarData):
    """Arbitrary callables; derivatives fall back to finite differences."""

    def __init__(self, fn, grad=None, laplacian=None, name: str | None = None):
        self.fn, self._grad, self._lap = fn, grad, laplacian
        self.name = name

    def __call__(self, x):
        return np.asarray(self.fn(_as_points(x)), dtype=float)

    def has_grad(self):
        return self._grad is not None

    def grad(self, x):
        if self._grad is None:
            return super().grad(x)
        return np.asarray(self._grad(_as_points(x)), dtype=float)

    def laplacian(self, x):
        if self._lap is None:
            return super().laplacian(x)
        return np.asarray(self._lap(_as_points(x)), dtype=float)


class Sum(ScalarData):
    def __init__(self, *terms: ScalarData, weights=None):
        self.terms = terms
        self.weights = tuple(weights) if weights is not None else (1.0,) * len(terms)
        self.is_constant = all(t.is_constant for t in terms)

    def __call__(self, x):
        return sum(w * t(x) for w, t in zip(self.weights, self.terms))

    def has_grad(self):
        return all(t.has_grad() for t in self.terms)

    def grad(self, x):
        return sum(w * t.grad(x) for w, t in zip(self.weights, self.terms))

    def laplacian(self, x):
        return sum(w * t.laplacian(x) for w, t in zip(self.weights, self.terms))


def as_data(value) -> ScalarData:
    if isinstance(value, ScalarData):
        return value
    if np.isscalar(value):
        return Constant(float(value))
    if callable(value):
        return Closure(value)
    raise TypeError(f"cannot interpret {value!r} as scalar data")


def parse_data(spec, center=(0.0, 0.0)) -> ScalarData:
    """Build scalar data from a config entry such as ``{"const": 1.0}``."""
    if isinstance(spec, ScalarData):
        return spec
    if isinstance(spec, (int, float)):
        return Constant(float(spec))
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError(f"scalar data entry must be a number or a one-key table, got {spec!r}")
    (key, val), = spec.items()
    if key == "const":
        return Constant(float(val))
    if key == "radial":
        return Radial(str(val), center=center)
    if key == "fourier":
        return AngularFourier(val, center=center)
    raise ValueError(f"unknown scalar data descriptor {key!r}")


def surface_gradient(g: ScalarData, geom: SignedGeometry, p) -> _F:
    """Tangential gradient of ``g`` at points ``p`` on the curve."""
    p = _as_points(p)
    if g.is_constant:
        return np.zeros_like(p)
    nu = geom.normal(p)
    G = g.grad(p)
    return G - np.sum(G * nu, axis=-1)[..., None] * nu


def check_lower_bound(data: ScalarData, bound: float, points) -> float:
    """Minimum of ``data`` over ``points``; raises when it drops below ``bound``."""
    m = float(np.min(data(points)))
    if m < bound:
        raise ValueError(f"coefficient lower bound violated: min {m:.6g} < {bound:.6g}")
    return m


# ---------------------------------------------------------------------------
# grid and nodal fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxGrid:
    box: tuple[float, float, float, float]
    nx: int
    ny: int

    def __post_init__(self):
        xmin, xmax, ymin, ymax = self.box
        if not (xmax > xmin and ymax > ymin) or self.nx < 1 or self.ny < 1:
            raise ValueError("degenerate grid")
        hx = (xmax - xmin) / self.nx
        hy = (ymax - ymin) / self.ny
        if abs(hx - hy) > 1e-12:
            raise ValueError(f"grid spacing must be uniform: hx={hx}, hy={hy}")

    @classmethod
    def from_spacing(cls, box, h: float) -> "BoxGrid":
        xmin, xmax, ymin, ymax = (float(v) for v in box)
        nx = int(round((xmax - xmin) / h))
        ny = int(round((ymax - ymin) / h))
        return cls((xmin, xmax, ymin, ymax), nx, ny)

    @property
    def h(self) -> float:
        return (self.box[1] - self.box[0]) / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        """Node array shape ``(ny + 1, nx + 1)``."""
        return (self.ny + 1, self.nx + 1)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def xs(self) -> _F:
        return self.box[0] + self.h * np.arange(self.nx + 1)

    def ys(self) -> _F:
        return self.box[2] + self.h * np.arange(self.ny + 1)

    def nodes(self) -> _F:
        X, Y = np.meshgrid(self.xs(), self.ys())
        return np.stack([X, Y], axis=-1).reshape(-1, 2)

    def check_clearance(self, geom: SignedGeometry, cells: float = 4.0) -> None:
        c = geom.clearance()
        if c < cells * self.h:
            raise ValueError(f"curve is {c:.4g} from the box edge; need at least {cells} cells ({cells * self.h:.4g})")

    def locate(self, x) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64], _F, _F]:
        """Cell indices and local coordinates in [0, 1] for points inside the box."""
        x = _as_points(x)
        xmin, xmax, ymin, ymax = self.box
        tol = 1e-12 * max(1.0, abs(xmax - xmin))
        if np.any((x[..., 0] < xmin - tol) | (x[..., 0] > xmax + tol) |
                  (x[..., 1] < ymin - tol) | (x[..., 1] > ymax + tol)):
            raise ValueError("point outside the box")
        fx = (x[..., 0] - xmin) / self.h
        fy = (x[..., 1] - ymin) / self.h
        i = np.clip(np.floor(fx).astype(np.int64), 0, self.nx - 1)
        j = np.clip(np.floor(fy).astype(np.int64), 0, self.ny - 1)
        return i, j, fx - i, fy - j


class NodalField:
    """Piecewise bilinear field given by one value per grid node."""

    def __init__(self, grid: BoxGrid, values):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != grid.n_nodes:
            raise ValueError(f"expected {grid.n_nodes} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("nodal values must be finite")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def inject(cls, grid: BoxGrid, data) -> "NodalField":
        return cls(grid, as_data(data)(grid.nodes()))

    def _corners(self, i, j):
        V = self.values.reshape(self.grid.shape)
        return V[j, i], V[j, i + 1], V[j + 1, i], V[j + 1, i + 1]

    def interpolate(self, x) -> _F:
        i, j, s, t = self.grid.locate(x)
        v00, v10, v01, v11 = self._corners(i, j)
        return (1 - s) * (1 - t) * v00 + s * (1 - t) * v10 + (1 - s) * t * v01 + s * t * v11

    __call__ = interpolate

    def gradient(self, x) -> _F:
        i, j, s, t = self.grid.locate(x)
        v00, v10, v01, v11 = self._corners(i, j)
        gx = ((1 - t) * (v10 - v00) + t * (v11 - v01)) / self.grid.h
        gy = ((1 - s) * (v01 - v00) + s * (v11 - v10)) / self.grid.h
        return np.stack([gx, gy], axis=-1)


# ---------------------------------------------------------------------------
# extensions
# ---------------------------------------------------------------------------

def _normal_frame(geom: SignedGeometry, p: _F):
    nu = geom.normal(p)
    tau = np.stack([-nu[..., 1], nu[..., 0]], axis=-1)
    return nu, tau


class NormalExtension(ScalarData):
    """``x -> zeta(|d(x)|/eta) * g(p(x))``.

    Inside the half tube the value is exactly ``g`` at the closest point; the
    cutoff removes all closest-point queries outside the tube.
    """

    def __init__(self, g: ScalarData, geom: SignedGeometry, eta: float, plateau: float = 0.5):
        if not 0.0 < eta < geom.reach:
            raise ValueError(f"eta={eta} must lie below the reach {geom.reach}")
        if not 0.0 <= plateau < 1.0:
            raise ValueError("plateau must lie in [0, 1)")
        self.g, self.geom, self.eta, self.plateau = g, geom, float(eta), float(plateau)

    def __call__(self, x):
        x = _as_points(x)
        d = self.geom.sdf(x)
        z = cutoff(np.abs(d) / self.eta, self.plateau)
        out = np.zeros(x.shape[:-1])
        m = z > 0.0
        if np.any(m):
            p, _ = self.geom.project(x[m])
            out[m] = z[m] * self.g(p)
        return out

    def has_grad(self):
        return True

    def grad(self, x):
        x = _as_points(x)
        d = self.geom.sdf(x)
        t = np.abs(d) / self.eta
        z = cutoff(t, self.plateau)
        out = np.zeros(x.shape, dtype=float)
        m = z > 0.0
        if np.any(m):
            xm, dm = x[m], d[m]
            p, _ = self.geom.project(xm)
            nu, tau = _normal_frame(self.geom, p)
            kappa = self.geom.curvature(p)
            gs = surface_gradient(self.g, self.geom, p)
            # (I - d H) applied to a tangent vector scales it by 1/(1 + d kappa)
            tang = gs / (1.0 + dm * kappa)[:, None]
            radial = (cutoff_prime(t[m], self.plateau) * np.sign(dm) / self.eta * self.g(p))[:, None] * nu
            out[m] = radial + z[m][:, None] * tang
        return out


EXTENSION_REACH = 0.98
EXTENSION_PLATEAU = 0.9


def constant_normal_extension(g, geom: SignedGeometry, eta: float | None = None) -> ScalarData:
    """Constant extension of curve data along normals.

    The value is ``g(p(x))`` for ``|d| <= 0.9 eta`` and is cut off to zero at
    ``|d| = eta`` (default ``0.98 * reach``), where closest points stop being
    unique.  Constants are returned unchanged: their constant extension needs
    no closest point and is kept on the whole box.
    """
    g = as_data(g)
    if g.is_constant:
        return Constant(float(np.ravel(g(np.zeros((1, 2))))[0]))
    if eta is None:
        eta = EXTENSION_REACH * geom.reach
    return NormalExtension(g, geom, eta, plateau=EXTENSION_PLATEAU)


def dirichlet_lifting(g, geom: SignedGeometry, eta: float) -> ScalarData:
    """``g~ = zeta(|d|/eta) g(p)``: trace ``g`` on the curve, zero outside the tube."""
    return NormalExtension(as_data(g), geom, eta)


class ReflectionExtension(ScalarData):
    """Extension across the curve by the mirror point ``x - 2 d nu(p)``.

    Beyond distance ``eta`` the mirror depth is clamped at ``eta``.
    """

    def __init__(self, u: ScalarData, geom: SignedGeometry, eta: float):
        if not 0.0 < eta < geom.reach:
            raise ValueError(f"eta={eta} must lie below the reach {geom.reach}")
        self.u, self.geom, self.eta = u, geom, float(eta)

    def _mirror(self, x):
        d = self.geom.sdf(x)
        out_m = d > 0.0
        m = x.copy()
        p = None
        if np.any(out_m):
            p, _ = self.geom.project(x[out_m])
            nu = self.geom.normal(p)
            depth = np.minimum(d[out_m], self.eta)
            m[out_m] = p - depth[:, None] * nu
        return m, d, out_m, p

    def __call__(self, x):
        x = _as_points(x)
        shape = x.shape[:-1]
        xf = x.reshape(-1, 2)
        m, _, _, _ = self._mirror(xf)
        return self.u(m).reshape(shape)

    def has_grad(self):
        return self.u.has_grad()

    def grad(self, x):
        x = _as_points(x)
        shape = x.shape
        xf = x.reshape(-1, 2)
        m, d, out_m, p = self._mirror(xf)
        g = self.u.grad(m)
        if np.any(out_m):
            dm = d[out_m]
            nu, tau = _normal_frame(self.geom, p)
            kappa = self.geom.curvature(p)
            gm = g[out_m]
            gn = np.sum(gm * nu, axis=-1)
            gt = np.sum(gm * tau, axis=-1)
            near = dm < self.eta
            # Jacobian of the mirror map: -nu nu^T + (1 - d kappa)/(1 + d kappa) tau tau^T,
            # and (1 - eta kappa)/(1 + d kappa) tau tau^T once the depth is clamped
            tfac = np.where(near, (1.0 - dm * kappa), (1.0 - self.eta * kappa)) / (1.0 + dm * kappa)
            nfac = np.where(near, -1.0, 0.0)
            g[out_m] = (nfac * gn)[:, None] * nu + (tfac * gt)[:, None] * tau
        return g.reshape(shape)


def reflection_extension(u, geom: SignedGeometry, eta: float) -> ScalarData:
    u = as_data(u)
    if u.is_constant:
        return u
    return ReflectionExtension(u, geom, eta)


class NeumannLifting(ScalarData):
    """``h = d zeta(|d|/eta) q(p)`` with ``q = g / (nu . A nu)`` so that ``A grad h . nu = g``."""

    def __init__(self, g: ScalarData, A, geom: SignedGeometry, eta: float):
        if not 0.0 < eta < geom.reach:
            raise ValueError(f"eta={eta} must lie below the reach {geom.reach}")
        self.g, self.geom, self.eta = g, geom, float(eta)
        self.A = np.asarray(A, dtype=float) if not isinstance(A, ScalarData) else A
        if isinstance(self.A, np.ndarray):
            if self.A.shape == ():
                self.A = self.A * np.eye(2)
            if self.A.shape != (2, 2) or np.any(np.linalg.eigvalsh(0.5 * (self.A + self.A.T)) <= 0):
                raise ValueError("A must be a symmetric positive definite 2x2 matrix")

    def _isotropic(self) -> bool:
        return isinstance(self.A, np.ndarray) and np.allclose(self.A, self.A[0, 0] * np.eye(2))

    def _q_constant(self) -> bool:
        return self.g.is_constant and self._isotropic()

    def _Amat(self, x):
        if isinstance(self.A, np.ndarray):
            return np.broadcast_to(self.A, x.shape[:-1] + (2, 2))
        return self.A(x)[..., None, None] * np.eye(2)

    def q(self, p):
        nu = self.geom.normal(p)
        A = self._Amat(p)
        nAn = np.einsum("...i,...ij,...j->...", nu, A, nu)
        return self.g(p) / nAn

    def __call__(self, x):
        x = _as_points(x)
        d = self.geom.sdf(x)
        z = cutoff(np.abs(d) / self.eta)
        out = np.zeros(x.shape[:-1])
        m = z > 0.0
        if np.any(m):
            p, _ = self.geom.project(x[m])
            out[m] = d[m] * z[m] * self.q(p)
        return out

    def has_grad(self):
        return True

    def grad(self, x):
        x = _as_points(x)
        d = self.geom.sdf(x)
        t = np.abs(d) / self.eta
        z = cutoff(t)
        out = np.zeros(x.shape, dtype=float)
        m = z > 0.0
        if np.any(m):
            dm = d[m]
            p, _ = self.geom.project(x[m])
            nu = self.geom.normal(p)
            kappa = self.geom.curvature(p)
            qv = self.q(p)
            if self._q_constant():
                qs = np.zeros_like(p)
            elif isinstance(self.g, AngularFourier) and self._isotropic():
                qs = surface_gradient(self.g, self.geom, p) / float(self.A[0, 0])
            else:
                qs = surface_gradient(Closure(self.q), self.geom, p)
            phi = dm * z[m]
            dphi = z[m] + np.abs(dm) * cutoff_prime(t[m]) / self.eta
            out[m] = (dphi * qv)[:, None] * nu + (phi / (1.0 + dm * kappa))[:, None] * qs
        return out

    def div_flux(self, x):
        """``div(A grad h)``: closed form on a circle with isotropic constant A, else finite differences."""
        x = _as_points(x)
        if isinstance(self.geom, Circle) and self._isotropic() and isinstance(self.g, (AngularFourier, Constant)):
            return self._div_flux_circle(x)
        return fd_divergence(lambda y: np.einsum("...ij,...j->...i", self._Amat(y), self.grad(y)), x)

    def _div_flux_circle(self, x):
        alpha = float(self.A[0, 0])
        c = np.asarray(self.geom.center, dtype=float)
        y = x - c
        r = np.linalg.norm(y, axis=-1)
        d = r - self.geom.radius
        t = np.abs(d) / self.eta
        th = np.arctan2(y[..., 1], y[..., 0])
        if isinstance(self.g, Constant):
            q0 = np.full_like(r, self.g.value / alpha)
            q2 = np.zeros_like(r)
        else:
            q0 = self.g.of_angle(th) / alpha
            q2 = self.g.of_angle(th, 2) / alpha
        z = cutoff(t)
        phi = d * z
        dphi = z + np.abs(d) * cutoff_prime(t) / self.eta
        d2phi = np.sign(d) * (2.0 * cutoff_prime(t) / self.eta + np.abs(d) * cutoff_second(t) / self.eta ** 2)
        safe = np.where(r > 0, r, 1.0)
        lap = d2phi * q0 + dphi * q0 / safe + phi * q2 / safe ** 2
        return np.where(z > 0.0, alpha * lap, 0.0)


def fd_divergence(F: Callable, x: _F, step: float = 1e-4) -> _F:
    out = np.zeros(x.shape[:-1])
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        out += (-F(x + 2 * e)[..., k] + 8 * F(x + e)[..., k] - 8 * F(x - e)[..., k]
                + F(x - 2 * e)[..., k]) / (12 * step)
    return out


def neumann_lifting(g, A, geom: SignedGeometry, eta: float) -> NeumannLifting:
    return NeumannLifting(as_data(g), A, geom, eta)


def default_eta(geom: SignedGeometry) -> float:
    return min(0.5 * geom.reach, 0.25 * geom.clearance())
