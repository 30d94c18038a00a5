"""Weighted Q1 finite-element systems for the five diffuse domain formulations."""

from __future__ import annotations

import hashlib
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from .fields import (
    BoxGrid,
    ScalarData,
    as_data,
    constant_normal_extension,
    default_eta,
    dirichlet_lifting,
    neumann_lifting,
)
from .geometry import SignedGeometry
from .profiles import Profile, ScaledWeights, require_verified
from .quadrature import (
    CellQuadrature,
    QuadSpec,
    accumulate_local,
    accumulate_vector,
    new_stencil,
    stencil_to_csr,
)

VARIANTS = ("CDD", "SDD", "RDD", "DDDH", "NDDH")
DEFAULT_FLOOR = 1e-12


class AssemblyError(ValueError):
    pass


def _variant(name: str) -> str:
    key = name.upper()
    if key.startswith("DDDH"):
        key = "DDDH"
    if key not in VARIANTS:
        raise AssemblyError(f"unknown problem {name!r}; expected one of {', '.join(v.lower() for v in VARIANTS)}")
    return key


class Diffusion:
    """Diffusion coefficient: isotropic scalar data or a constant SPD matrix."""

    def __init__(self, value):
        if isinstance(value, Diffusion):
            self.iso, self.matrix = value.iso, value.matrix
            return
        arr = None if isinstance(value, ScalarData) or callable(value) else np.asarray(value, dtype=float)
        if arr is not None and arr.shape == (2, 2):
            sym = 0.5 * (arr + arr.T)
            if not np.array_equal(arr, arr.T) or np.any(np.linalg.eigvalsh(sym) <= 0):
                raise AssemblyError("diffusion matrix must be symmetric positive definite")
            if arr[0, 1] == 0.0 and arr[0, 0] == arr[1, 1]:
                self.iso, self.matrix = as_data(float(arr[0, 0])), None
            else:
                self.iso, self.matrix = None, arr
        else:
            self.iso, self.matrix = as_data(value if arr is None else float(arr)), None

    @property
    def is_constant(self) -> bool:
        return self.matrix is not None or self.iso.is_constant

    def constant_value(self):
        """Scalar or 2x2 matrix; only valid when :attr:`is_constant`."""
        if self.matrix is not None:
            return self.matrix
        return float(np.ravel(self.iso(np.zeros((1, 2))))[0])

    def min_eigenvalue(self, pts) -> float:
        if self.matrix is not None:
            return float(np.linalg.eigvalsh(self.matrix).min())
        return float(np.min(self.iso(pts)))


@dataclass
class ProblemSpec:
    """One diffuse domain problem: variant, coefficients, geometry, profile and epsilon.

    Surface coefficients and data (``B``, ``b``, ``g``) are given on the curve
    and extended off it by the constant normal extension.  Bulk data ``f`` is
    taken to be defined on the whole box.
    """

    variant: str
    geometry: SignedGeometry
    profile: Profile
    epsilon: float
    A: object = 1.0
    a: object = 1.0
    f: object = 0.0
    B: object = 1.0
    b: object = 1.0
    g: object = 0.0
    K: float = 1.0
    beta: float = 1.0
    m: float = 1.0
    eta: float | None = None

    def __post_init__(self):
        self.variant = _variant(self.variant)
        self.A = Diffusion(self.A)
        self.B = Diffusion(self.B)
        self.a, self.f, self.b, self.g = (as_data(v) for v in (self.a, self.f, self.b, self.g))
        if self.eta is None:
            self.eta = default_eta(self.geometry)

    @property
    def weights(self) -> ScaledWeights:
        return ScaledWeights(self.profile, self.epsilon, self.geometry)

    def validate(self, samples: int = 512) -> None:
        if not self.epsilon > 0:
            raise AssemblyError("epsilon must be positive")
        require_verified(self.profile)
        geom = self.geometry
        geom.check_inside_box()
        surf = geom.surface_rule(samples).points
        xmin, xmax, ymin, ymax = geom.box
        gx, gy = np.meshgrid(np.linspace(xmin, xmax, 33), np.linspace(ymin, ymax, 33))
        bulk = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        v = self.variant
        if v in ("CDD", "RDD", "DDDH", "NDDH"):
            if self.A.min_eigenvalue(bulk) <= 0:
                raise AssemblyError("bulk diffusion A must be uniformly positive")
            amin = float(np.min(self.a(bulk)))
            need_positive = v in ("CDD", "NDDH")
            if amin < 0 or (need_positive and amin <= 0):
                raise AssemblyError(f"bulk reaction a has lower bound {amin:.4g}; "
                                    f"{'positive' if need_positive else 'non-negative'} required")
        if v in ("CDD", "SDD"):
            if self.B.min_eigenvalue(surf) <= 0:
                raise AssemblyError("surface diffusion B must be uniformly positive")
            bmin = float(np.min(self.b(surf)))
            if bmin <= 0:
                raise AssemblyError(f"surface reaction b has lower bound {bmin:.4g}; positive required")
        if v == "CDD":
            if not self.K > 0:
                raise AssemblyError("coupling constant K must be positive")
            if float(np.min(self.b(surf))) < self.K:
                raise AssemblyError(f"coercivity needs b >= K everywhere on the curve (K={self.K})")
        if v == "RDD" and not self.beta > 0:
            raise AssemblyError("Robin coefficient beta must be positive")
        if v == "DDDH" and not (0.0 < self.m <= 1.0):
            raise AssemblyError(f"penalty exponent m={self.m} must lie in (0, 1]")

    def blocks(self) -> tuple[str, ...]:
        if self.variant == "CDD":
            return ("u", "v")
        if self.variant == "SDD":
            return ("v",)
        return ("u",)

    def block_weight(self, block: str) -> str:
        return "xi" if block == "u" else "delta"

    def lifting(self) -> ScalarData | None:
        if self.variant == "DDDH":
            return dirichlet_lifting(self.g, self.geometry, self.eta)
        if self.variant == "NDDH":
            A = self.A.constant_value() if self.A.is_constant else self.A.iso
            return neumann_lifting(self.g, A, self.geometry, self.eta)
        return None


@dataclass
class DofMap:
    """Active unknowns: position ``k`` of the reduced vector is ``full[active[k]]``.

    The full vector stacks the blocks, ``n_nodes`` entries each.
    """

    blocks: tuple[str, ...]
    n_nodes: int
    active: np.ndarray

    @property
    def n_full(self) -> int:
        return self.n_nodes * len(self.blocks)

    @property
    def n_active(self) -> int:
        return int(self.active.size)

    def block_slice(self, name: str) -> slice:
        k = self.blocks.index(name)
        return slice(k * self.n_nodes, (k + 1) * self.n_nodes)

    def active_mask(self, name: str) -> np.ndarray:
        mask = np.zeros(self.n_full, dtype=bool)
        mask[self.active] = True
        return mask[self.block_slice(name)]

    def scatter(self, x: np.ndarray) -> np.ndarray:
        full = np.zeros(self.n_full)
        full[self.active] = x
        return full


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    grid: BoxGrid
    spec: ProblemSpec
    measures: dict
    quad: CellQuadrature
    eliminated: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.rhs.size

    def expand(self, x: np.ndarray) -> dict:
        """Nodal values per block on the whole grid.

        Eliminated u-nodes become 0; eliminated v-nodes copy the value at the
        closest active node.
        """
        full = self.dofmap.scatter(np.asarray(x, dtype=float))
        out = {}
        for name in self.dofmap.blocks:
            vals = full[self.dofmap.block_slice(name)].copy()
            mask = self.dofmap.active_mask(name)
            if name == "v" and not mask.all():
                shape = self.grid.shape
                _, (ij, ii) = ndimage.distance_transform_edt(~mask.reshape(shape), return_indices=True)
                vals = vals.reshape(shape)[ij, ii].ravel()
            out[name] = vals
        return out


# ---------------------------------------------------------------------------
# element kernels
# ---------------------------------------------------------------------------

def _stiff_kernel(quad: CellQuadrature, coef: Diffusion):
    """Per-point 4x4 stiffness tables for constant coefficient parts."""
    T = quad.stiff_table
    if coef.matrix is not None:
        return np.einsum("ij,qijab->qab", coef.matrix, T)
    return T[:, 0, 0] + T[:, 1, 1]


def _local_form(quad: CellQuadrature, wts, stiff_coef, mass_coef, stiff_tab):
    """``sum_q w_q (stiff_coef_q S_q + mass_coef_q M_q)`` per cell."""
    shape = wts.shape[:-1] + (4, 4)
    K = np.zeros(shape)
    M = quad.mass_table
    for q in range(quad.n_points):
        if stiff_coef is not None:
            K += (wts[..., q] * stiff_coef[..., q])[..., None, None] * stiff_tab[q]
        if mass_coef is not None:
            K += (wts[..., q] * mass_coef[..., q])[..., None, None] * M[q]
    return K


def _local_load(quad: CellQuadrature, wts, values, grads=None):
    """``sum_q w_q (values_q N_a + grads_q . dN_a)`` per cell."""
    F = np.einsum("...q,qa->...a", wts * values, quad.N)
    if grads is not None:
        F += np.einsum("...qi,qai->...a", wts[..., None] * grads, quad.dN)
    return F


def _coef_values(coef: Diffusion, P):
    if coef.matrix is not None:
        return np.ones(P.shape[:-1])
    return np.broadcast_to(coef.iso(P), P.shape[:-1])


def _chunk_contributions(spec: ProblemSpec, quad: CellQuadrature, ci, cj, extra):
    P = quad.points(ci, cj)
    d = spec.geometry.sdf(P)
    sw = spec.weights
    w = quad.w
    out = {}
    v = spec.variant
    needs_xi = v != "SDD"
    needs_delta = v in ("CDD", "SDD", "RDD", "DDDH")
    if needs_xi:
        xi = sw.xi_of_distance(d)
        wx = xi * w
        out["mu_u"] = _local_load(quad, wx, np.ones_like(xi))
        Ab = _local_form(quad, wx, _coef_values(spec.A, P), spec.a(P), extra["A_tab"])
    if needs_delta:
        de = sw.delta_of_distance(d)
        wd = de * w
        Sm = _local_form(quad, wd, None, np.ones_like(de), None)
    if v in ("CDD", "SDD"):
        out["mu_v"] = _local_load(quad, wd, np.ones_like(de))
        As = _local_form(quad, wd, _coef_values(spec.B, P), extra["bE"](P), extra["B_tab"])
        gE = extra["gE"](P)

    if v == "CDD":
        K = spec.K
        out["uu"] = Ab + K * Sm
        out["vv"] = As + K * Sm
        out["uv"] = -K * Sm
        out["Fu"] = _local_load(quad, wx, spec.f(P))
        out["Fv"] = _local_load(quad, wd, spec.beta * gE)
    elif v == "SDD":
        out["vv"] = As
        out["Fv"] = _local_load(quad, wd, gE)
    elif v == "RDD":
        out["uu"] = Ab + spec.beta * Sm
        gE = extra["gE"](P)
        out["Fu"] = _local_load(quad, wx, spec.f(P)) + _local_load(quad, wd, spec.beta * gE)
    elif v == "DDDH":
        out["uu"] = Ab + spec.epsilon ** (-spec.m) * Sm
        lift = extra["lift"]
        gl = lift(P)
        gg = lift.grad(P)
        if spec.A.matrix is not None:
            flux = np.einsum("ij,...j->...i", spec.A.matrix, gg)
        else:
            flux = spec.A.iso(P)[..., None] * gg
        out["Fu"] = _local_load(quad, wx, spec.f(P) - spec.a(P) * gl, -flux)
    elif v == "NDDH":
        out["uu"] = Ab
        lift = extra["lift"]
        src = spec.f(P) + lift.div_flux(P) - spec.a(P) * lift(P)
        out["Fu"] = _local_load(quad, wx, src)
    return out


def assemble(spec: ProblemSpec, grid: BoxGrid, quad: QuadSpec | None = None,
             allow_underresolved: bool = False, threads: int = 1) -> SparseSystem:
    """Assemble the full (uneliminated) system of ``spec`` on ``grid``.

    Cells are processed in fixed blocks of rows; ``threads`` only changes who
    computes a block, never the order in which blocks are summed.
    """
    quad = quad or QuadSpec()
    spec.validate()
    if tuple(float(c) for c in grid.box) != tuple(float(c) for c in spec.geometry.box):
        raise AssemblyError("grid box and geometry box differ")
    if grid.h > spec.epsilon:
        msg = f"grid spacing h={grid.h:.4g} exceeds epsilon={spec.epsilon:.4g}"
        if not allow_underresolved:
            raise AssemblyError(msg + " (pass allow_underresolved=True to override)")
        warnings.warn(msg, stacklevel=2)
    grid.check_clearance(spec.geometry, cells=2)
    ns = quad.subdivisions(grid.h, spec.epsilon)
    cq = CellQuadrature(grid, quad.order, ns)

    extra = {"A_tab": _stiff_kernel(cq, spec.A), "B_tab": _stiff_kernel(cq, spec.B)}
    if spec.variant in ("CDD", "SDD", "RDD"):
        extra["gE"] = constant_normal_extension(spec.g, spec.geometry)
        extra["bE"] = constant_normal_extension(spec.b, spec.geometry)
    lift = spec.lifting()
    if lift is not None:
        extra["lift"] = lift

    blocks = spec.blocks()
    pairs = {"uu", "vv", "uv"} if spec.variant == "CDD" else ({"vv"} if spec.variant == "SDD" else {"uu"})
    stencils = {k: new_stencil(grid) for k in sorted(pairs)}
    loads = {b: np.zeros(grid.shape) for b in blocks}
    measures = {b: np.zeros(grid.shape) for b in blocks}

    chunks = list(cq.row_chunks())

    def work(chunk):
        j0, j1, ci, cj = chunk
        return j0, j1, _chunk_contributions(spec, cq, ci, cj, extra)

    def consume(res):
        j0, j1, out = res
        for key, st in stencils.items():
            accumulate_local(st, out[key], j0, j1)
        for b in blocks:
            accumulate_vector(loads[b], out["F" + b], j0, j1)
            accumulate_vector(measures[b], out["mu_" + b], j0, j1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(work, chunks):
                consume(res)
    else:
        for ch in chunks:
            consume(work(ch))

    n = grid.n_nodes
    if spec.variant == "CDD":
        Muu = stencil_to_csr(grid, stencils["uu"])
        Mvv = stencil_to_csr(grid, stencils["vv"])
        # the coupling block is -K times the delta mass matrix, itself symmetric
        Muv = stencil_to_csr(grid, stencils["uv"])
        M = sp.bmat([[Muu, Muv], [Muv, Mvv]], format="csr")
    else:
        M = stencil_to_csr(grid, stencils["vv" if spec.variant == "SDD" else "uu"])
    M.sort_indices()
    rhs = np.concatenate([loads[b].ravel() for b in blocks])
    dm = DofMap(blocks=blocks, n_nodes=n, active=np.arange(n * len(blocks)))
    return SparseSystem(
        matrix=M, rhs=rhs, dofmap=dm, grid=grid, spec=spec,
        measures={b: measures[b].ravel() for b in blocks}, quad=cq,
        eliminated={b: 0 for b in blocks},
    )


# ---------------------------------------------------------------------------
# elimination and probing
# ---------------------------------------------------------------------------

def eliminate_degenerate_dofs(system: SparseSystem, floor: float | None = None) -> SparseSystem:
    """Drop unknowns whose basis support carries weight measure ``<= floor * h^2``.

    The default floor is ``1e-12`` for compactly supported profiles and ``0``
    otherwise, so smooth profiles keep every node with a positive weight.
    """
    if floor is None:
        floor = DEFAULT_FLOOR if system.spec.profile.compact else 0.0
    h2 = system.grid.h ** 2
    dm = system.dofmap
    keep = np.zeros(dm.n_full, dtype=bool)
    eliminated = {}
    for b in dm.blocks:
        sl = dm.block_slice(b)
        ok = system.measures[b] > floor * h2
        keep[sl] = ok
        eliminated[b] = int((~ok).sum())
    keep &= np.isin(np.arange(dm.n_full), dm.active)
    if not keep.any():
        raise AssemblyError("every degree of freedom is degenerate")
    # positions of surviving unknowns within the current reduced numbering
    pos = np.flatnonzero(keep[dm.active])
    M = system.matrix[pos][:, pos].tocsr()
    M.sort_indices()
    return SparseSystem(
        matrix=M, rhs=system.rhs[pos].copy(),
        dofmap=DofMap(blocks=dm.blocks, n_nodes=dm.n_nodes, active=dm.active[pos]),
        grid=system.grid, spec=system.spec, measures=system.measures, quad=system.quad,
        eliminated=eliminated,
    )


@dataclass
class SpdReport:
    symmetric: bool
    asymmetry: float
    min_diagonal: float
    quotients: list
    failures: list

    @property
    def passed(self) -> bool:
        return self.symmetric and not self.failures and self.min_diagonal > 0


def spd_probe(system: SparseSystem, trials: int = 8, seed: int = 0) -> SpdReport:
    """Check exact symmetry and ``x^T M x > 0`` on seeded random vectors."""
    M = system.matrix
    diff = (M - M.T).tocsr()
    asym = float(np.max(np.abs(diff.data))) if diff.nnz else 0.0
    rng = np.random.default_rng(seed)
    quotients, failures = [], []
    diag = M.diagonal()
    for t in range(trials):
        x = rng.standard_normal(M.shape[0])
        val = float(np.sum(x * (M @ x)))
        quotients.append(val / float(np.sum(x * x)))
        if not val > 0.0:
            failures.append({"trial": t, "value": val, "witness_sha256": hashlib.sha256(x.tobytes()).hexdigest()})
    return SpdReport(symmetric=asym == 0.0, asymmetry=asym,
                     min_diagonal=float(diag.min()) if diag.size else 0.0,
                     quotients=quotients, failures=failures)
