"""Structured periodic triangulation of a square.

Nodes are numbered left to right, bottom to top.  Public index helpers
(:func:`triangle`, :func:`reduce_index`) take and return 1-based indices so
they line up with hand-drawn node diagrams; every array stored on
:class:`Mesh` is 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np


@dataclass(frozen=True)
class Triangle:
    index: int
    kind: str  # "a" or "b"
    vertices: tuple[int, int, int]
    area: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform triangulation of ``[x0, x0+L] x [y0, y0+L]`` with ``n`` nodes per side.

    Each grid cell is split by its bottom-left/top-right diagonal into a
    type-a triangle (BL, TR, TL) and a type-b triangle (BL, BR, TR); both
    are stored counter-clockwise.
    """

    n: int
    x0: float
    y0: float
    L: float
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    triangles: np.ndarray = field(init=False, repr=False)
    kinds: np.ndarray = field(init=False, repr=False)
    full_to_reduced: np.ndarray = field(init=False, repr=False)
    reduced_to_full: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n, L = self.n, self.L
        if int(n) != n or n < 3:
            raise ValueError(f"need at least 3 nodes per side, got n={n}")
        if not L > 0:
            raise ValueError(f"side length must be positive, got L={L}")
        n = int(n)
        object.__setattr__(self, "n", n)
        h = L / (n - 1)
        ii, jj = np.meshgrid(np.arange(n), np.arange(n))
        nodes = np.column_stack([self.x0 + ii.ravel() * h, self.y0 + jj.ravel() * h])

        # closed-form vertex rule, vectorised over j = 1..(n-1)^2
        j = np.arange(1, (n - 1) ** 2 + 1)
        c = (j + n - 2) // (n - 1) - 1  # ceil(j/(n-1)) - 1
        tri_a = np.column_stack([j + c, j + n + 1 + c, j + n + c])
        tri_b = np.column_stack([j + c, j + 1 + c, j + n + 1 + c])
        tris = np.empty((2 * len(j), 3), dtype=np.int64)
        tris[0::2] = tri_a - 1
        tris[1::2] = tri_b - 1
        kinds = np.tile(np.array(["a", "b"]), len(j))

        col = ii.ravel() % (n - 1)
        row = jj.ravel() % (n - 1)
        f2r = row * (n - 1) + col
        keep = (ii.ravel() < n - 1) & (jj.ravel() < n - 1)
        r2f = np.flatnonzero(keep)

        for name, value in [
            ("h", h), ("nodes", nodes), ("triangles", tris), ("kinds", kinds),
            ("full_to_reduced", f2r), ("reduced_to_full", r2f),
        ]:
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def num_nodes(self) -> int:
        return self.n ** 2

    @property
    def num_triangles(self) -> int:
        return 2 * (self.n - 1) ** 2

    @property
    def num_dofs(self) -> int:
        return (self.n - 1) ** 2

    @property
    def dof_coordinates(self) -> np.ndarray:
        """Coordinates of the representative node of every reduced DOF."""
        return self.nodes[self.reduced_to_full]

    def triangle_coordinates(self) -> np.ndarray:
        """Vertex coordinates, shape ``(M, 3, 2)``."""
        return self.nodes[self.triangles]

    def signed_areas(self) -> np.ndarray:
        p = self.triangle_coordinates()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def reduced_triangles(self) -> np.ndarray:
        return self.full_to_reduced[self.triangles]

    def fold(self, values_full: np.ndarray) -> np.ndarray:
        """Restrict a full nodal vector to the reduced DOFs."""
        return np.asarray(values_full)[self.reduced_to_full]

    def unfold(self, values_reduced: np.ndarray) -> np.ndarray:
        """Expand a reduced vector onto all n^2 nodes (closing edges replicated)."""
        return np.asarray(values_reduced)[self.full_to_reduced]

    def sample(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x, y)`` on the reduced DOFs."""
        xy = self.dof_coordinates
        vals = np.broadcast_to(np.asarray(func(xy[:, 0], xy[:, 1]), dtype=float), (len(xy),))
        return np.array(vals, dtype=float)

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        areas = self.signed_areas()
        return bool(np.allclose(areas, 0.5 * self.h ** 2, rtol=rtol, atol=0.0))


def build_mesh(n: int, x0: float = 0.0, y0: float = 0.0, L: float = 1.0) -> Mesh:
    return Mesh(n, float(x0), float(y0), float(L))


def triangle(J: int, mesh: Mesh) -> Triangle:
    """Triangle ``J`` (1-based) with 1-based global vertex indices."""
    if not 1 <= J <= mesh.num_triangles:
        raise IndexError(f"triangle index {J} outside 1..{mesh.num_triangles}")
    n = mesh.n
    j = (J + 1) // 2
    c = ceil(j / (n - 1)) - 1
    if J % 2:
        kind, verts = "a", (j + c, j + n + 1 + c, j + n + c)
    else:
        kind, verts = "b", (j + c, j + 1 + c, j + n + 1 + c)
    return Triangle(J, kind, verts, 0.5 * mesh.h ** 2)


def reduce_index(I: int, mesh: Mesh) -> int:
    """Reduced (periodic) DOF index of full node ``I``; both 1-based."""
    if not 1 <= I <= mesh.num_nodes:
        raise IndexError(f"node index {I} outside 1..{mesh.num_nodes}")
    return int(mesh.full_to_reduced[I - 1]) + 1


def representative(I: int, mesh: Mesh) -> int:
    """Full index (1-based) of the surviving node that ``I`` is identified with."""
    return int(mesh.reduced_to_full[reduce_index(I, mesh) - 1]) + 1


def node_triangle_counts(mesh: Mesh, periodic: bool = False) -> np.ndarray:
    """Number of triangles touching each full node, or each reduced DOF."""
    tris = mesh.reduced_triangles() if periodic else mesh.triangles
    size = mesh.num_dofs if periodic else mesh.num_nodes
    return np.bincount(tris.ravel(), minlength=size)
