"""Brute-force dense reference implementations.

Nothing here imports the production mesh or assembly code.  The grid is
rebuilt from its parameters, basis functions come from a Vandermonde solve,
integrals use a 7-point degree-5 rule and periodic folding is a coordinate
search.  Only meant for small meshes (n <= 9 or so).
"""
from __future__ import annotations

import numpy as np

_S15 = np.sqrt(15.0)
# 7-point degree-5 rule on a triangle, barycentric points and weights (sum to 1)
_A1, _B1 = (6.0 - _S15) / 21.0, (9.0 + 2.0 * _S15) / 21.0
_A2, _B2 = (6.0 + _S15) / 21.0, (9.0 - 2.0 * _S15) / 21.0
_W1, _W2 = (155.0 - _S15) / 1200.0, (155.0 + _S15) / 1200.0
QUAD_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _A1, _B1], [_A1, _B1, _A1], [_B1, _A1, _A1],
    [_A2, _A2, _B2], [_A2, _B2, _A2], [_B2, _A2, _A2],
])
QUAD_WEIGHTS = np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2])


class OracleGrid:
    """Independent description of the periodic grid used by the oracle."""

    def __init__(self, n: int, x0: float = 0.0, y0: float = 0.0, L: float = 1.0):
        self.n, self.x0, self.y0, self.L = n, x0, y0, L
        h = L / (n - 1)
        self.h = h
        self.points = [(x0 + i * h, y0 + j * h) for j in range(n) for i in range(n)]
        self.survivors = [(x0 + i * h, y0 + j * h) for j in range(n - 1) for i in range(n - 1)]
        self.triangles = []
        for j in range(n - 1):
            for i in range(n - 1):
                bl, br = j * n + i, j * n + i + 1
                tl, tr = (j + 1) * n + i, (j + 1) * n + i + 1
                self.triangles.append((bl, tr, tl))
                self.triangles.append((bl, br, tr))
        self.fold = [self._search(p) for p in self.points]

    def _search(self, p):
        """Index of the surviving node that ``p`` coincides with modulo L."""
        tol = 1e-9 * self.h
        for k, q in enumerate(self.survivors):
            dx = (p[0] - q[0]) / self.L
            dy = (p[1] - q[1]) / self.L
            if abs(dx - round(dx)) * self.L < tol and abs(dy - round(dy)) * self.L < tol:
                return k
        raise RuntimeError(f"no periodic image for {p}")

    @property
    def size(self) -> int:
        return len(self.survivors)


def _basis(P):
    """Rows (a, b, c) of psi_i = a + b x + c y for the triangle with vertices ``P``."""
    V = np.column_stack([np.ones(3), P[:, 0], P[:, 1]])
    coef = np.linalg.solve(V, np.eye(3))  # column i holds (a_i, b_i, c_i)
    return coef.T


def _quadrature(P):
    area = 0.5 * abs(np.linalg.det(np.column_stack([P[1] - P[0], P[2] - P[0]])))
    pts = QUAD_BARY @ P
    return pts, QUAD_WEIGHTS * area


def oracle_assemble(grid: OracleGrid, kind: str, U=None, p=None, periodic: bool = True):
    """Dense M, A, S(U) or R(p) by direct integration over every triangle.

    ``p`` is a callable ``(x, y) -> (p_x, p_y)``.  With ``periodic=False``
    the unfolded n^2 x n^2 matrix is returned.
    """
    size = grid.size if periodic else len(grid.points)
    index = grid.fold if periodic else list(range(len(grid.points)))
    out = np.zeros((size, size))
    if kind == "S":
        U = np.asarray(U, dtype=float)
        if U.shape != (grid.size if periodic else len(grid.points),):
            raise ValueError("U has the wrong length")
    for tri in grid.triangles:
        P = np.array([grid.points[v] for v in tri])
        coef = _basis(P)
        pts, w = _quadrature(P)
        psi = coef[:, 0][None, :] + pts[:, :1] * coef[:, 1][None, :] + pts[:, 1:] * coef[:, 2][None, :]
        gx, gy = coef[:, 1], coef[:, 2]
        gi = [index[v] for v in tri]
        if kind == "mass":
            local = np.einsum("q,qi,qj->ij", w, psi, psi)
        elif kind == "stiffness":
            local = w.sum() * (np.outer(gx, gx) + np.outer(gy, gy))
        elif kind == "S":
            Ul = np.array([U[g] for g in gi])
            ux, uy = Ul @ gx, Ul @ gy
            adv = -uy * gx + ux * gy  # V(u) . grad psi_i, constant on the triangle
            local = np.einsum("q,i,qj->ij", w, adv, psi)
        elif kind == "R":
            px, py = p(pts[:, 0], pts[:, 1])
            px = np.broadcast_to(np.asarray(px, float), w.shape)
            py = np.broadcast_to(np.asarray(py, float), w.shape)
            f = px[:, None] * gy[None, :] - py[:, None] * gx[None, :]
            local = np.einsum("q,qi,qj->ij", w, f, psi)
        else:
            raise ValueError(f"unknown kind {kind!r}")
        for a in range(3):
            for b in range(3):
                out[gi[a], gi[b]] += local[a, b]
    return out


def dense_semilinear_step(M, K, R, S, U, W, tau):
    """One semi-linear step with dense linear algebra; ``S`` is the dense S(U)."""
    W1 = np.linalg.solve(M + tau * S, M @ W + tau * (R @ U))
    U1 = np.linalg.solve(K, M @ W1)
    return U1, W1


def dense_fixedpoint_step(M, K, R, S_of, U, W, tau, tol=1e-13, maxit=200):
    """Fully implicit step by fixed point on the dense operator M - tau R K^-1 M."""
    Kinv_M = np.linalg.solve(K, M)
    B = M - tau * R @ Kinv_M
    Z = M @ W
    Y, Uk = W.copy(), U.copy()
    for _ in range(maxit):
        Ynew = np.linalg.solve(B, Z - tau * S_of(Uk) @ Y)
        Unew = Kinv_M @ Ynew
        err = max(np.linalg.norm(Ynew - Y) / max(np.linalg.norm(Ynew), 1e-300),
                  np.linalg.norm(Unew - Uk) / max(np.linalg.norm(Unew), 1e-300))
        Y, Uk = Ynew, Unew
        if err <= tol:
            break
    return Kinv_M @ Y, Y
