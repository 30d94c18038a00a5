"""Run configuration: TOML or JSON files, validated into :class:`RunConfig`."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .fields import parse_data
from .geometry import make_geometry
from .profiles import get_profile

KNOWN_KEYS = {
    "geometry", "radius", "radii", "center", "box", "profile", "epsilon", "rho", "h",
    "problem", "A", "a", "f", "B", "b", "g", "K", "beta", "m", "eta",
    "quad_order", "subdiv", "tol", "maxit", "precond", "reference", "u_exact", "v_exact",
    "modes", "radial_points", "floor", "allow_underresolved", "seed", "thresholds", "lemmas", "name",
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` and ``line`` locate the problem when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{': '.join(where + [message]) if where else message}")
        self.key, self.line, self.path = key, line, path


@dataclass
class RunConfig:
    raw: dict
    geometry: object
    profile: object
    epsilons: list
    rho: float | None
    h: float | None
    problem: str
    coefficients: dict
    quad_order: int = 3
    subdiv: object = "auto"
    tol: float = 1e-10
    maxit: int | None = None
    precond: str | None = "jacobi"
    reference: str = "oracle"
    u_exact: object = None
    v_exact: object = None
    modes: int = 16
    radial_points: int = 1024
    floor: float | None = None
    allow_underresolved: bool = False
    seed: int = 0
    thresholds: dict = field(default_factory=dict)
    lemmas: dict = field(default_factory=dict)

    def spacing(self, eps: float) -> float:
        return self.h if self.h is not None else eps / self.rho


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    pat = re.compile(r'^\s*"?' + re.escape(key) + r'"?\s*[=:]')
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def read_config_file(path) -> tuple[dict, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from None
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text), text
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno, path=path) from None
    try:
        return tomli.loads(text), text
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc), path=path) from None


def load_config(path, overrides: dict | None = None) -> RunConfig:
    raw, text = read_config_file(path)
    if overrides:
        raw.update(overrides)
    return parse_config(raw, text=text, path=path)


def parse_config(raw: dict, text: str | None = None, path=None) -> RunConfig:
    """Validate a configuration mapping."""

    def fail(msg, key=None):
        raise ConfigError(msg, key=key, line=_line_of(text, key) if key else None, path=path)

    if not isinstance(raw, dict):
        fail("configuration must be a table of keys")
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        fail(f"unknown key(s): {', '.join(unknown)}", unknown[0])

    box = raw.get("box", [-2.0, 2.0, -2.0, 2.0])
    if not (isinstance(box, list) and len(box) == 4):
        fail("box must be [xmin, xmax, ymin, ymax]", "box")
    center = raw.get("center", [0.0, 0.0])
    kind = str(raw.get("geometry", "circle")).lower()
    try:
        if kind == "circle":
            geom = make_geometry("circle", radius=float(raw.get("radius", 1.0)),
                                 center=tuple(map(float, center)), box=tuple(map(float, box)))
        elif kind == "ellipse":
            geom = make_geometry("ellipse", radii=tuple(map(float, raw.get("radii", [2.0, 1.0]))),
                                 center=tuple(map(float, center)), box=tuple(map(float, box)))
        else:
            fail(f"unknown geometry {kind!r} (circle or ellipse)", "geometry")
        geom.check_inside_box()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        fail(str(exc), "geometry")

    try:
        profile = get_profile(str(raw.get("profile", "double-well")))
    except ValueError as exc:
        fail(str(exc), "profile")

    if "epsilon" not in raw:
        fail("missing required key", "epsilon")
    eps = raw["epsilon"]
    eps = list(eps) if isinstance(eps, list) else [eps]
    try:
        eps = [float(e) for e in eps]
    except (TypeError, ValueError):
        fail("epsilon must be a number or a list of numbers", "epsilon")
    if not eps or any(e <= 0 for e in eps):
        fail("epsilon values must be positive", "epsilon")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        fail("epsilon values must be strictly decreasing", "epsilon")

    rho = h = None
    if "h" in raw and "rho" in raw:
        fail("give either h or rho, not both", "h")
    if "h" in raw:
        h = float(raw["h"])
        if h <= 0:
            fail("h must be positive", "h")
    else:
        rho = float(raw.get("rho", 4.0))
        if rho < 2:
            fail("rho must be at least 2", "rho")

    problem = str(raw.get("problem", "")).lower()
    if problem.startswith("dddh"):
        problem = "dddh"
    if problem not in ("cdd", "sdd", "rdd", "dddh", "nddh"):
        fail("problem must be one of cdd, sdd, rdd, dddh, nddh", "problem")

    coefs = {}
    c = tuple(map(float, center))
    for key in ("A", "a", "f", "B", "b", "g"):
        if key in raw:
            val = raw[key]
            try:
                if key in ("A", "B") and isinstance(val, list):
                    coefs[key] = [[float(x) for x in row] for row in val]
                else:
                    coefs[key] = parse_data(val, center=c)
            except (ValueError, TypeError) as exc:
                fail(str(exc), key)
    for key in ("K", "beta", "m", "eta"):
        if key in raw:
            try:
                coefs[key] = float(raw[key])
            except (TypeError, ValueError):
                fail("must be a number", key)

    subdiv = raw.get("subdiv", "auto")
    if subdiv != "auto" and not (isinstance(subdiv, int) and subdiv >= 1):
        fail('subdiv must be "auto" or a positive integer', "subdiv")
    precond = raw.get("precond", "jacobi")
    precond = None if precond in (None, "none") else str(precond).lower()
    if precond not in (None, "jacobi"):
        fail("precond must be none or jacobi", "precond")
    tol = float(raw.get("tol", 1e-10))
    if not 0 < tol < 1:
        fail("tol must lie in (0, 1)", "tol")
    reference = str(raw.get("reference", "oracle")).lower()
    if reference not in ("oracle", "manufactured", "none"):
        fail("reference must be oracle, manufactured or none", "reference")
    u_exact = v_exact = None
    try:
        if "u_exact" in raw:
            u_exact = parse_data(raw["u_exact"], center=c)
        if "v_exact" in raw:
            v_exact = parse_data(raw["v_exact"], center=c)
    except ValueError as exc:
        fail(str(exc), "u_exact")
    if reference == "manufactured" and u_exact is None and v_exact is None:
        fail("manufactured reference needs u_exact or v_exact", "reference")
    if reference == "oracle" and kind != "circle":
        fail("the sharp oracle only covers circles; use a manufactured reference", "reference")

    seed = int(raw.get("seed", 0))
    if not 0 <= seed < 2 ** 64:
        fail("seed must be an unsigned 64-bit integer", "seed")
    return RunConfig(
        raw=raw, geometry=geom, profile=profile, epsilons=eps, rho=rho, h=h, problem=problem,
        coefficients=coefs, quad_order=int(raw.get("quad_order", 3)), subdiv=subdiv, tol=tol,
        maxit=None if raw.get("maxit") is None else int(raw["maxit"]), precond=precond,
        reference=reference, u_exact=u_exact, v_exact=v_exact, modes=int(raw.get("modes", 16)),
        radial_points=int(raw.get("radial_points", 1024)),
        floor=None if raw.get("floor") is None else float(raw["floor"]),
        allow_underresolved=bool(raw.get("allow_underresolved", False)), seed=seed,
        thresholds=dict(raw.get("thresholds", {})), lemmas=dict(raw.get("lemmas", {})),
    )
