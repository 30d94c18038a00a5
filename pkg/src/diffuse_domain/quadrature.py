"""Tensor Gauss quadrature on the cells of a uniform grid, Q1 basis tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fields import BoxGrid

# local node k sits at offset LOCAL[k] = (di, dj) from the cell's lower-left node
LOCAL = ((0, 0), (1, 0), (0, 1), (1, 1))
CHUNK_ROWS = 16


@dataclass(frozen=True)
class QuadSpec:
    """Gauss order per axis and the number of subcells per cell edge."""

    order: int = 3
    ns: int | str = "auto"

    def subdivisions(self, h: float, epsilon: float | None) -> int:
        if self.ns == "auto":
            if epsilon is None:
                return 1
            return max(1, math.ceil(2.0 * h / epsilon))
        ns = int(self.ns)
        if ns < 1:
            raise ValueError("subdivision count must be at least 1")
        return ns


def reference_rule(order: int, ns: int):
    """Points in [0,1]^2 and weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    sub = (np.arange(ns)[:, None] + x[None, :]).ravel() / ns
    sw = np.tile(w, ns) / ns
    X, Y = np.meshgrid(sub, sub)
    W = np.outer(sw, sw)
    return np.stack([X.ravel(), Y.ravel()], axis=-1), W.ravel()


def q1_tables(ref: np.ndarray):
    s, t = ref[:, 0], ref[:, 1]
    N = np.stack([(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t], axis=-1)
    dN = np.stack(
        [
            np.stack([-(1 - t), -(1 - s)], axis=-1),
            np.stack([(1 - t), -s], axis=-1),
            np.stack([-t, (1 - s)], axis=-1),
            np.stack([t, s], axis=-1),
        ],
        axis=1,
    )
    return N, dN


class CellQuadrature:
    """Quadrature tables for one grid; cells are addressed by ``(ci, cj)`` arrays."""

    def __init__(self, grid: BoxGrid, order: int = 3, ns: int = 1):
        self.grid = grid
        self.order = order
        self.ns = ns
        self.ref, self.wref = reference_rule(order, ns)
        self.N, self.dN_ref = q1_tables(self.ref)
        self.dN = self.dN_ref / grid.h
        self.w = self.wref * grid.h ** 2

    @property
    def n_points(self) -> int:
        return self.ref.shape[0]

    @cached_property
    def stiff_table(self):
        """``(Q, 2, 2, 4, 4)``: ``dN_a[i] dN_b[j]``."""
        return np.einsum("qai,qbj->qijab", self.dN, self.dN)

    @cached_property
    def mass_table(self):
        return np.einsum("qa,qb->qab", self.N, self.N)

    def points(self, ci, cj) -> np.ndarray:
        g = self.grid
        x0 = g.box[0] + g.h * np.asarray(ci, dtype=float)
        y0 = g.box[2] + g.h * np.asarray(cj, dtype=float)
        px = x0[..., None] + g.h * self.ref[:, 0]
        py = y0[..., None] + g.h * self.ref[:, 1]
        return np.stack([px, py], axis=-1)

    def node_ids(self, ci, cj) -> np.ndarray:
        stride = self.grid.nx + 1
        ci = np.asarray(ci)
        cj = np.asarray(cj)
        return np.stack([(cj + dj) * stride + (ci + di) for di, dj in LOCAL], axis=-1)

    def row_chunks(self, rows: int = CHUNK_ROWS):
        """Yield ``(j0, j1, ci, cj)`` with cells in row-major order; chunking is fixed."""
        nx, ny = self.grid.nx, self.grid.ny
        for j0 in range(0, ny, rows):
            j1 = min(ny, j0 + rows)
            cj, ci = np.meshgrid(np.arange(j0, j1), np.arange(nx), indexing="ij")
            yield j0, j1, ci, cj

    def cell_chunks(self, ci, cj, size: int = 8192):
        ci = np.asarray(ci).ravel()
        cj = np.asarray(cj).ravel()
        for k in range(0, ci.size, size):
            yield ci[k:k + size], cj[k:k + size]

    def values(self, nodal: np.ndarray, ci, cj):
        """Field values and gradients of a nodal vector at the cells' quadrature points."""
        ids = self.node_ids(ci, cj)
        u = nodal[ids]
        val = np.einsum("...a,qa->...q", u, self.N)
        grad = np.einsum("...a,qai->...qi", u, self.dN)
        return val, grad


# upper-triangle stencil offsets (dj, di) used to build exactly symmetric matrices
UPPER = ((0, 0), (0, 1), (1, -1), (1, 0), (1, 1))


def new_stencil(grid: BoxGrid) -> dict:
    return {off: np.zeros(grid.shape) for off in UPPER}


def accumulate_local(stencil: dict, K: np.ndarray, j0: int, j1: int) -> None:
    """Scatter local 4x4 matrices of cell rows ``j0:j1`` into the upper stencil."""
    nrows, nx = K.shape[:2]
    for a, (ia, ja) in enumerate(LOCAL):
        for b, (ib, jb) in enumerate(LOCAL):
            off = (jb - ja, ib - ia)
            if off not in stencil:
                continue
            stencil[off][j0 + ja:j1 + ja, ia:nx + ia] += K[:, :, a, b]


def accumulate_vector(vec2d: np.ndarray, F: np.ndarray, j0: int, j1: int) -> None:
    nx = F.shape[1]
    for a, (ia, ja) in enumerate(LOCAL):
        vec2d[j0 + ja:j1 + ja, ia:nx + ia] += F[:, :, a]


def stencil_to_csr(grid: BoxGrid, stencil: dict):
    """Symmetric CSR matrix from the upper stencil; the lower half is mirrored."""
    import scipy.sparse as sp

    ny1, nx1 = grid.shape
    J, I = np.meshgrid(np.arange(ny1), np.arange(nx1), indexing="ij")
    rows, cols, data = [], [], []
    for (dj, di), S in stencil.items():
        valid = (J + dj >= 0) & (J + dj < ny1) & (I + di >= 0) & (I + di < nx1)
        r = (J * nx1 + I)[valid]
        c = ((J + dj) * nx1 + (I + di))[valid]
        v = S[valid]
        rows.append(r)
        cols.append(c)
        data.append(v)
        if (dj, di) != (0, 0):
            rows.append(c)
            cols.append(r)
            data.append(v)
    n = grid.n_nodes
    M = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    M.sum_duplicates()
    M.sort_indices()
    return M
