"""Global P1 matrices on the periodic mesh.

Conventions (row index ``I``, column index ``J``)::

    M_IJ    = <psi_I, psi_J>
    A_IJ    = <grad psi_I, grad psi_J>
    S(U)_IJ = <V(u) . grad psi_I, psi_J>,   V(u) = (-u_y, u_x)
    R_IJ    = <p_x psi_I,y - p_y psi_I,x, psi_J>

On any counter-clockwise triangle the local convection matrix reduces to
``(1/6) (U3-U2, U1-U3, U2-U1)^T [1 1 1]``, so S(U) is an integer combination
of nodal values divided by 6.  We precompute that integer map once per mesh
(:class:`SOperator`) and refresh S by a single sparse product; this makes
S exactly skew-symmetric in floating point.  With a constant background
gradient R is likewise ``h*k/6`` times an integer matrix.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .sparse import CsrMatrix, add_scaled

_CYCLIC = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]])  # (U3-U2, U1-U3, U2-U1)


# ---------------------------------------------------------------------------
# background gradient fields

@dataclass(frozen=True)
class ConstantGradient:
    """p = k*x + const, so p_x = k and p_y = 0."""

    k: float

    def gradient(self, x, y):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.k), np.zeros_like(x)

    @property
    def sup_norm(self) -> float:
        return abs(self.k)


@dataclass(frozen=True)
class AnalyticGradient:
    """Arbitrary gradient given by two callables of (x, y)."""

    px: Callable
    py: Callable
    sup_hint: float | None = None  # known bound on |p_x|, used for step-size reports

    def gradient(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = np.broadcast_to(np.asarray(self.px(x, y), dtype=float), x.shape)
        gy = np.broadcast_to(np.asarray(self.py(x, y), dtype=float), x.shape)
        return np.array(gx), np.array(gy)

    @property
    def sup_norm(self) -> float:
        return np.nan if self.sup_hint is None else float(self.sup_hint)


def gradient_sup(p, mesh: Mesh) -> float:
    """max |p_x| over the mesh nodes (the gradient norm entering step-size bounds)."""
    if isinstance(p, ConstantGradient):
        return abs(p.k)
    gx, _ = p.gradient(mesh.nodes[:, 0], mesh.nodes[:, 1])
    return float(np.max(np.abs(gx)))


# ---------------------------------------------------------------------------
# local matrices

def _coords(tri) -> np.ndarray:
    P = np.asarray(tri, dtype=float)
    if P.shape[-2:] != (3, 2):
        raise ValueError("expected triangle vertex coordinates of shape (3, 2)")
    return P


def local_basis(tri):
    """Coefficients of psi_i = a_i + b_i x + c_i y plus the difference vectors.

    Returns ``(a, b, c, bhat, chat, area)``.  Works on one triangle ``(3, 2)`` or
    a stack ``(M, 3, 2)``.
    """
    P = _coords(tri)
    x, y = P[..., 0], P[..., 1]
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    bhat = np.stack([y3 - y2, y1 - y3, y2 - y1], axis=-1)
    chat = np.stack([x3 - x2, x1 - x3, x2 - x1], axis=-1)
    area = 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))
    if np.any(area <= 0):
        raise ValueError("degenerate or clockwise triangle")
    two_a = 2.0 * area[..., None]
    a = np.stack([x2 * y3 - x3 * y2, x3 * y1 - x1 * y3, x1 * y2 - x2 * y1], axis=-1) / two_a
    return a, -bhat / two_a, chat / two_a, bhat, chat, area


def local_mass(tri) -> np.ndarray:
    _, _, _, _, _, area = local_basis(tri)
    return area[..., None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))


def local_stiffness(tri) -> np.ndarray:
    _, b, c, _, _, area = local_basis(tri)
    outer = b[..., :, None] * b[..., None, :] + c[..., :, None] * c[..., None, :]
    return area[..., None, None] * outer


def local_S_coefficients(tri) -> np.ndarray:
    """``C`` with ``S_ij = sum_k C_ik U_k`` for every column j (general coordinates)."""
    _, _, _, bhat, chat, area = local_basis(tri)
    d = 1.0 / (12.0 * area)
    C = bhat[..., :, None] * chat[..., None, :] - chat[..., :, None] * bhat[..., None, :]
    return d[..., None, None] * C


def local_S(tri, U_local, fast: bool = False) -> np.ndarray:
    """Local convection matrix for nodal values ``U_local``.

    ``fast=True`` uses the difference form valid on any positively oriented
    triangle; the default evaluates the coordinate formula.
    """
    U_local = np.asarray(U_local, dtype=float)
    if fast:
        _coords(tri)
        col = (_CYCLIC @ U_local) / 6.0
    else:
        col = local_S_coefficients(tri) @ U_local
    return np.repeat(col[:, None], 3, axis=1)


# edge midpoints opposite vertex 0, 1, 2; psi_j is 1/2 on the two edges touching j
_MID_WEIGHTS = 0.5 * (np.ones((3, 3)) - np.eye(3))  # [m, j] = psi_j(mid_m)


def local_R(tri, p) -> np.ndarray:
    """Local background-gradient matrix ``int (p_x psi_i,y - p_y psi_i,x) psi_j``.

    A :class:`ConstantGradient` uses the closed form ``(k/6) chat [1 1 1]``;
    anything else is integrated with the edge-midpoint rule.
    """
    P = _coords(tri)
    _, b, c, _, chat, area = local_basis(P)
    if isinstance(p, ConstantGradient):
        return np.repeat((p.k / 6.0) * chat[:, None], 3, axis=1)
    mids = 0.5 * (P[[1, 2, 0]] + P[[2, 0, 1]])  # midpoint m is opposite vertex m
    gx, gy = p.gradient(mids[:, 0], mids[:, 1])
    # sum_m (c_i gx_m - b_i gy_m) psi_j(mid_m) * area/3
    term = c[:, None] * gx[None, :] - b[:, None] * gy[None, :]
    return (area / 3.0) * term @ _MID_WEIGHTS


# ---------------------------------------------------------------------------
# global assembly

def _connectivity(mesh: Mesh, periodic: bool):
    if periodic:
        return mesh.reduced_triangles(), mesh.num_dofs
    return np.asarray(mesh.triangles), mesh.num_nodes


def _scatter(tris, local, size) -> CsrMatrix:
    """Sum local (M,3,3) blocks into a CSR matrix, triangles in ascending order."""
    rows = np.repeat(tris, 3, axis=1).ravel()  # tris[J, i] for (i, j) row-major
    cols = np.tile(tris, (1, 3)).ravel()
    return CsrMatrix.from_coo(rows, cols, local.ravel(), (size, size))


def assemble(mesh: Mesh, kind: str, periodic: bool = True) -> CsrMatrix:
    """Mass (``"mass"``), stiffness (``"stiffness"``) or H1 (``"h1"``, K = M + A) matrix."""
    tris, size = _connectivity(mesh, periodic)
    coords = mesh.triangle_coordinates()
    if kind == "mass":
        return _scatter(tris, local_mass(coords), size)
    if kind == "stiffness":
        return _scatter(tris, local_stiffness(coords), size)
    if kind in ("h1", "K"):
        return add_scaled(assemble(mesh, "mass", periodic),
                          assemble(mesh, "stiffness", periodic), 1.0, 1.0)
    raise ValueError(f"unknown matrix kind {kind!r}; expected mass, stiffness or h1")


def _integer_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    """Sum duplicate triplets and drop the entries that cancel identically."""
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def R_integer_matrix(mesh: Mesh, periodic: bool = True) -> CsrMatrix:
    """Integer matrix ``B`` with ``R = (h*k/6) B`` for a constant gradient ``k``."""
    if not mesh.is_uniform():
        raise ValueError("the integer form of R needs a uniform mesh")
    tris, size = _connectivity(mesh, periodic)
    _, _, _, _, chat, _ = local_basis(mesh.triangle_coordinates())
    alpha = np.rint(chat / mesh.h)  # entries of {-1, 0, 1}
    local = np.repeat(alpha[:, :, None], 3, axis=2)
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    mat = _integer_csr(rows, cols, local.ravel(), (size, size))
    return CsrMatrix.from_scipy(mat)


def assemble_R(mesh: Mesh, p, periodic: bool = True, quadrature: bool = False) -> CsrMatrix:
    """Background-gradient matrix.

    A constant gradient on a uniform mesh goes through the exact integer form
    unless ``quadrature`` is set; everything else is integrated with the
    edge-midpoint rule on the topological pattern.
    """
    if isinstance(p, (int, float)):
        p = ConstantGradient(float(p))
    if isinstance(p, ConstantGradient) and not quadrature and mesh.is_uniform():
        B = R_integer_matrix(mesh, periodic)
        return B.with_values(B.values * (mesh.h * p.k / 6.0))
    tris, size = _connectivity(mesh, periodic)
    P = mesh.triangle_coordinates()
    _, b, c, _, _, area = local_basis(P)
    mids = 0.5 * (P[:, [1, 2, 0]] + P[:, [2, 0, 1]])
    if isinstance(p, ConstantGradient):
        gx, gy = np.full(mids.shape[:2], p.k), np.zeros(mids.shape[:2])
    else:
        gx, gy = p.gradient(mids[..., 0], mids[..., 1])
    term = c[:, :, None] * gx[:, None, :] - b[:, :, None] * gy[:, None, :]
    local = (area[:, None, None] / 3.0) * (term @ _MID_WEIGHTS)
    return _scatter(tris, local, size)


class SOperator:
    """Linear map U -> values of S(U) on a fixed sparsity pattern.

    ``pattern`` holds the (I, J) slots that are not identically zero; the
    values for a given U are ``coefficients @ U * scale``.  With
    ``method="integer"`` the coefficients are the exact integers of the
    difference form and ``scale = 1/6``; ``method="general"`` builds float
    coefficients from vertex coordinates.
    """

    def __init__(self, mesh: Mesh, periodic: bool = True, method: str = "integer"):
        if method not in ("integer", "general"):
            raise ValueError(f"unknown method {method!r}")
        self.mesh = mesh
        self.periodic = periodic
        self.method = method
        tris, size = _connectivity(mesh, periodic)
        self.size = size
        if method == "integer":
            if np.any(mesh.signed_areas() <= 0):
                raise ValueError("degenerate or clockwise triangle")
            C = np.broadcast_to(_CYCLIC, (len(tris), 3, 3)).astype(float)
            self.scale = 1.0 / 6.0
        else:
            C = local_S_coefficients(mesh.triangle_coordinates())
            self.scale = 1.0

        # topological slots (I, J) in CSR order
        topo_rows = np.repeat(tris, 3, axis=1).ravel()
        topo_cols = np.tile(tris, (1, 3)).ravel()
        keys = np.unique(topo_rows * size + topo_cols)
        # coefficient triplets: slot(tris[t,i], tris[t,j]) <- C[t,i,k] * U[tris[t,k]]
        t_idx, i_idx, j_idx, k_idx = np.meshgrid(
            np.arange(len(tris)), np.arange(3), np.arange(3), np.arange(3), indexing="ij")
        slot = np.searchsorted(keys, tris[t_idx, i_idx] * size + tris[t_idx, j_idx])
        coef = _integer_csr(slot.ravel(), tris[t_idx, k_idx].ravel(),
                            C[t_idx, i_idx, k_idx].ravel(), (len(keys), size))
        if method == "general":
            tiny = 1e-13 * (np.abs(coef.data).max() if coef.nnz else 0.0)
            coef.data[np.abs(coef.data) <= tiny] = 0.0
            coef.eliminate_zeros()
        live = np.diff(coef.indptr) > 0
        self.coefficients = coef[live]
        live_keys = keys[live]
        self.pattern = CsrMatrix.from_coo(live_keys // size, live_keys % size,
                                          np.zeros(len(live_keys)), (size, size))

    @property
    def nnz(self) -> int:
        return self.pattern.nnz

    def values(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.shape != (self.size,):
            raise ValueError(f"U must have length {self.size}, got {U.shape}")
        v = self.coefficients @ U
        return v * self.scale if self.scale != 1.0 else v

    def __call__(self, U, into: CsrMatrix | None = None) -> CsrMatrix:
        vals = self.values(U)
        if into is None:
            return self.pattern.with_values(vals)
        if not into.same_pattern(self.pattern):
            raise ValueError("target matrix does not share the S(U) pattern")
        into.values[:] = vals
        return into


_operators: "weakref.WeakKeyDictionary[Mesh, dict]" = weakref.WeakKeyDictionary()


def s_operator(mesh: Mesh, periodic: bool = True, method: str = "integer") -> SOperator:
    """Cached :class:`SOperator` for a mesh."""
    cache = _operators.setdefault(mesh, {})
    key = (periodic, method)
    if key not in cache:
        cache[key] = SOperator(mesh, periodic, method)
    return cache[key]


def assemble_S(mesh: Mesh, U, into: CsrMatrix | None = None, periodic: bool = True,
               method: str = "integer") -> CsrMatrix:
    """Convection matrix S(U); with ``into`` only the stored values are overwritten."""
    return s_operator(mesh, periodic, method)(U, into=into)


def assemble_S_direct(mesh: Mesh, U, periodic: bool = True) -> CsrMatrix:
    """S(U) by scattering local matrices each call (no precomputed map).

    Kept as the straightforward reference path and for the rebuild-every-step
    timing mode.
    """
    tris, size = _connectivity(mesh, periodic)
    U = np.asarray(U, dtype=float)
    if U.shape != (size,):
        raise ValueError(f"U must have length {size}, got {U.shape}")
    col = local_S_coefficients(mesh.triangle_coordinates()) @ U[tris][..., None]
    local = np.repeat(col, 3, axis=2)
    return _scatter(tris, local, size)
