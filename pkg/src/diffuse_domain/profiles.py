"""Regularisation profiles for the indicator and the surface delta.

A profile pairs a smoothed Heaviside ``xi(s)`` (1 inside, 0 outside) with a
smoothed delta ``delta(s)``.  Both are evaluated on the stretched variable
``s = d(x) / eps``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

SQRT2 = np.sqrt(2.0)
DW_TRUNCATION = 40.0


class ProfileAssumptionError(ValueError):
    pass


def _gauss_panels(a: float, b: float, panels: int, order: int = 10):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(fn: Callable, a: float, b: float, panels: int = 400, order: int = 10) -> float:
    """Composite Gauss-Legendre quadrature of ``fn`` over ``[a, b]``."""
    s, w = _gauss_panels(a, b, panels, order)
    return float(np.sum(w * fn(s)))


def _sech(z):
    z = np.abs(z)
    e = np.exp(-z)
    return 2.0 * e / (1.0 + e * e)


def xi_double_well(s):
    # 0.5 * (1 - tanh(s / sqrt 2)) written as a logistic to avoid cancellation
    return expit(-SQRT2 * np.asarray(s, dtype=float))


def delta_double_well_raw(s):
    return 3.0 / (2.0 * SQRT2) * _sech(np.asarray(s, dtype=float) / SQRT2) ** 4


def delta_double_well_raw_prime(s):
    z = np.asarray(s, dtype=float) / SQRT2
    return -3.0 / (2.0 * SQRT2) * 4.0 * _sech(z) ** 4 * np.tanh(z) / SQRT2


def xi_double_obstacle(s):
    s = np.asarray(s, dtype=float)
    mid = 0.5 * (1.0 - np.sin(np.clip(s, -np.pi / 2, np.pi / 2)))
    return np.where(s < -np.pi / 2, 1.0, np.where(s > np.pi / 2, 0.0, mid))


def delta_double_obstacle(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) <= np.pi / 2, 2.0 / np.pi * np.cos(s) ** 2, 0.0)


def delta_double_obstacle_prime(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) <= np.pi / 2, -2.0 / np.pi * np.sin(2.0 * s), 0.0)


@dataclass(frozen=True)
class Profile:
    """A (xi, delta) pair.

    ``delta_raw`` is the formula as written; ``normalization`` scales it so
    the integral over the real line is one.  ``support`` is the half-width of
    the support of delta (``inf`` when it never vanishes).
    """

    kind: str
    xi: Callable
    delta_raw: Callable
    support: float
    normalization: float = 1.0
    delta_raw_prime: Callable | None = None
    verified: bool = False
    quad_window: float = DW_TRUNCATION

    def delta(self, s):
        return self.normalization * self.delta_raw(s)

    def delta_prime(self, s):
        if self.delta_raw_prime is not None:
            return self.normalization * self.delta_raw_prime(s)
        s = np.asarray(s, dtype=float)
        h = 1e-6
        return self.normalization * (self.delta_raw(s + h) - self.delta_raw(s - h)) / (2 * h)

    @property
    def compact(self) -> bool:
        return bool(np.isfinite(self.support))

    @property
    def window(self) -> float:
        """Half-width of the interval used for quadrature over the real line."""
        return float(self.support) if self.compact else self.quad_window


def raw_integral(delta: Callable, window: float, panels: int = 800) -> float:
    return integrate(delta, -window, window, panels=panels)


def double_well() -> Profile:
    raw = raw_integral(delta_double_well_raw, DW_TRUNCATION)
    return Profile(
        kind="double-well",
        xi=xi_double_well,
        delta_raw=delta_double_well_raw,
        support=np.inf,
        normalization=1.0 / raw,
        delta_raw_prime=delta_double_well_raw_prime,
        verified=True,
    )


def double_obstacle() -> Profile:
    return Profile(
        kind="double-obstacle",
        xi=xi_double_obstacle,
        delta_raw=delta_double_obstacle,
        support=np.pi / 2,
        normalization=1.0,
        delta_raw_prime=delta_double_obstacle_prime,
        verified=True,
    )


def get_profile(name: str) -> Profile:
    key = name.lower().replace("_", "-")
    if key in ("double-well", "dw"):
        return double_well()
    if key in ("double-obstacle", "do"):
        return double_obstacle()
    raise ValueError(f"unknown profile {name!r}")


def custom_profile(xi, delta, support=np.inf, delta_prime=None, normalize=True, kind="custom") -> Profile:
    """Wrap user callables; the result is unverified until passed to :func:`verify_profile`."""
    window = float(support) if np.isfinite(support) else DW_TRUNCATION
    norm = 1.0 / raw_integral(delta, window) if normalize else 1.0
    return Profile(kind=kind, xi=xi, delta_raw=delta, support=support, normalization=norm,
                   delta_raw_prime=delta_prime, verified=False)


def xi_base(kind: str, s):
    return get_profile(kind).xi(s)


def delta_base(kind: str, s):
    return get_profile(kind).delta(s)


@dataclass(frozen=True)
class ScaledWeights:
    """``xi_eps = xi(d/eps)`` and ``delta_eps = delta(d/eps)/eps`` on a geometry."""

    profile: Profile
    epsilon: float
    geometry: object

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def xi_of_distance(self, d):
        return self.profile.xi(np.asarray(d) / self.epsilon)

    def delta_of_distance(self, d):
        return self.profile.delta(np.asarray(d) / self.epsilon) / self.epsilon

    def xi_eps(self, x):
        return self.xi_of_distance(self.geometry.sdf(x))

    def delta_eps(self, x):
        return self.delta_of_distance(self.geometry.sdf(x))

    @property
    def layer_halfwidth(self) -> float:
        """Half-width of the delta layer (``inf`` for non-compact profiles)."""
        return self.epsilon * self.profile.support


def cxi_constant(profile: Profile, n: int = 200001, shrink: float = 0.01) -> float:
    """Largest grid-verified ``C`` with ``C delta <= xi``, shrunk by ``shrink``."""
    w = profile.window
    s = np.linspace(-w, w, n)
    dl = profile.delta(s)
    xi = profile.xi(s)
    # cos^2 at the edge of a compact support evaluates to ~1e-33, not 0
    pos = dl > 1e-12 * np.max(dl)
    if not np.any(pos):
        raise ProfileAssumptionError("delta vanishes identically on the sampled window")
    ratio = xi[pos] / dl[pos]
    inf = float(np.min(ratio))
    if not inf > 0.0:
        raise ProfileAssumptionError(
            f"no positive constant with C*delta <= xi: xi/delta reaches {inf:.3g}"
        )
    c = (1.0 - shrink) * inf
    fine = np.linspace(-w, w, 4 * n - 3)
    if np.any(c * profile.delta(fine) > profile.xi(fine) + 1e-14):
        raise ProfileAssumptionError("C_xi failed on the verification grid")
    return c


@dataclass
class ProfileReport:
    kind: str
    raw_integral: float
    delta_integral: float
    evenness_max: float
    delta_monotone_violations: int
    xi_monotone_violations: int
    xi_at_zero: float
    xi_limits: tuple[float, float]
    c_xi: float | None
    c_delta_int: float
    moments: dict
    decay: dict
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "raw_integral": self.raw_integral,
            "delta_integral": self.delta_integral,
            "evenness_max": self.evenness_max,
            "delta_monotone_violations": self.delta_monotone_violations,
            "xi_monotone_violations": self.xi_monotone_violations,
            "xi_at_zero": self.xi_at_zero,
            "xi_limits": list(self.xi_limits),
            "c_xi": self.c_xi,
            "c_delta_int": self.c_delta_int,
            "moments": self.moments,
            "decay": {f"q={q},eps={e}": v for (q, e), v in self.decay.items()},
            "failures": list(self.failures),
            "passed": self.passed,
        }


def _moment_terms(profile: Profile, window: float) -> dict:
    panels = max(400, int(40 * window))

    def fisher(s):
        d = profile.delta(s)
        dp = profile.delta_prime(s)
        out = np.zeros_like(d)
        pos = d > 1e-300
        out[pos] = dp[pos] ** 2 / d[pos]
        return out

    return {
        "fisher": integrate(fisher, -window, window, panels),
        "sqrt": integrate(lambda s: np.sqrt(profile.delta(s)), -window, window, panels),
        "first": integrate(lambda s: profile.delta(s) * np.abs(s), -window, window, panels),
        "second": integrate(lambda s: profile.delta(s) * s * s, -window, window, panels),
    }


def verify_profile(profile: Profile, tol: float = 1e-8, eta: float = 0.25,
                   decay_eps=(0.1, 0.05, 0.025), decay_q=(1, 2)) -> ProfileReport:
    """Check the structural assumptions on ``(xi, delta)`` and list any failures."""
    failures: list[str] = []
    w = profile.window
    raw = raw_integral(profile.delta_raw, w)
    total = raw_integral(profile.delta, w)
    if abs(total - 1.0) > tol:
        failures.append(f"integral of delta is {total!r}, not 1")

    s = np.linspace(0.0, max(w, 10.0), 100001)
    even = float(np.max(np.abs(profile.delta(s) - profile.delta(-s))))
    if even > 0.0:
        failures.append(f"delta not even (max asymmetry {even:.3g})")
    d_mono = int(np.count_nonzero(np.diff(profile.delta(s)) > 0.0))
    if d_mono:
        failures.append(f"delta increases in |s| at {d_mono} samples")
    full = np.linspace(-max(w, 10.0), max(w, 10.0), 200001)
    x_mono = int(np.count_nonzero(np.diff(profile.xi(full)) > 0.0))
    if x_mono:
        failures.append(f"xi increases at {x_mono} samples")
    xi0 = float(profile.xi(0.0))
    if xi0 != 0.5:
        failures.append(f"xi(0) = {xi0!r}, not 1/2")
    lim = (float(profile.xi(-1e3)), float(profile.xi(1e3)))
    if abs(lim[0] - 1.0) > tol or abs(lim[1]) > tol:
        failures.append(f"xi limits {lim} are not (1, 0)")

    try:
        c_xi: float | None = cxi_constant(profile)
    except ProfileAssumptionError as exc:
        c_xi = None
        failures.append(str(exc))

    # a finite C_{delta,int} must not grow when the window widens tenfold
    near = _moment_terms(profile, w)
    if profile.compact:
        far = near
    else:
        far = _moment_terms(profile, 10.0 * w)
    c_int = float(sum(near.values()))
    for name in near:
        a, b = near[name], far[name]
        if not (np.isfinite(a) and np.isfinite(b)) or abs(b - a) > 1e-6 * max(1.0, abs(a)):
            failures.append(f"moment term {name!r} does not converge ({a:.6g} -> {b:.6g})")
    if not np.isfinite(c_int):
        failures.append("C_delta_int is not finite")

    decay = {}
    for q in decay_q:
        seq = []
        for eps in decay_eps:
            v = float(eps ** (-q) * profile.delta(eta / eps))
            decay[(q, eps)] = v
            seq.append(v)
        if any(b > a for a, b in zip(seq, seq[1:])) or seq[-1] >= seq[0] * 0.5 and seq[0] > 0:
            failures.append(f"eps^-{q} delta(eta/eps) does not decay: {seq}")

    return ProfileReport(
        kind=profile.kind,
        raw_integral=raw,
        delta_integral=total,
        evenness_max=even,
        delta_monotone_violations=d_mono,
        xi_monotone_violations=x_mono,
        xi_at_zero=xi0,
        xi_limits=lim,
        c_xi=c_xi,
        c_delta_int=c_int,
        moments=near,
        decay=decay,
        failures=failures,
    )


def require_verified(profile: Profile) -> Profile:
    """Return a profile cleared for assembly, running the checks for custom ones."""
    if profile.verified:
        return profile
    report = verify_profile(profile)
    if not report.passed:
        raise ProfileAssumptionError("; ".join(report.failures))
    from dataclasses import replace

    return replace(profile, verified=True)
