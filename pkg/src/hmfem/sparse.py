"""Small CSR container plus the solvers and discrete norms used by the time stepper.

Storage is our own (pattern arrays kept separate from values so a matrix can
be refreshed in place); the heavy lifting of products and factorizations is
delegated to :mod:`scipy.sparse`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Raised when a linear solve fails; carries the last relative residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(eq=False)
class CsrMatrix:
    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=float)
        off, cols = self.row_offsets, self.col_indices
        if off.shape != (self.nrows + 1,) or off[0] != 0 or off[-1] != len(cols):
            raise ValueError("row_offsets inconsistent with matrix shape")
        if np.any(np.diff(off) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if len(self.values) != len(cols):
            raise ValueError("values and col_indices differ in length")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.ncols):
            raise ValueError("column index out of range")
        # strictly increasing columns inside every row: no duplicates, sorted
        if len(cols) > 1:
            step = np.diff(cols)
            row_start = np.zeros(len(cols), dtype=bool)
            row_start[off[1:-1][off[1:-1] < len(cols)]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices must be sorted and unique within a row")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        """Number of stored entries, explicit zeros included."""
        return len(self.values)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "CsrMatrix":
        """Build from triplets, summing duplicates in input order and keeping zeros."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        nrows, ncols = shape
        if not (len(rows) == len(cols) == len(vals)):
            raise ValueError("triplet arrays differ in length")
        if len(rows) and (rows.min() < 0 or rows.max() >= nrows):
            raise ValueError("row index out of range")
        order = np.lexsort((cols, rows))  # stable, so summation order is input order
        r, c, v = rows[order], cols[order], vals[order]
        if len(r):
            first = np.ones(len(r), dtype=bool)
            first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            starts = np.flatnonzero(first)
            v = np.add.reduceat(v, starts)
            r, c = r[starts], c[starts]
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=nrows), out=offsets[1:])
        return cls(nrows, ncols, offsets, c, v)

    @classmethod
    def from_scipy(cls, mat) -> "CsrMatrix":
        coo = sp.coo_matrix(mat)
        return cls.from_coo(coo.row, coo.col, coo.data, coo.shape)

    @classmethod
    def from_dense(cls, arr, keep_zeros: bool = False) -> "CsrMatrix":
        arr = np.asarray(arr, dtype=float)
        r, c = np.nonzero(np.ones_like(arr, dtype=bool) if keep_zeros else arr)
        return cls.from_coo(r, c, arr[r, c], arr.shape)

    def to_scipy(self) -> sp.csr_matrix:
        """scipy view sharing this matrix's arrays (no copy)."""
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape, copy=False
        )

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))
        np.add.at(out, (rows, self.col_indices), self.values)
        return out

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))

    def copy(self) -> "CsrMatrix":
        return CsrMatrix(self.nrows, self.ncols, self.row_offsets.copy(),
                         self.col_indices.copy(), self.values.copy())

    def with_values(self, values) -> "CsrMatrix":
        """Same pattern (shared), new values."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise ValueError("value array does not match pattern")
        return CsrMatrix(self.nrows, self.ncols, self.row_offsets, self.col_indices, values)

    def same_pattern(self, other: "CsrMatrix") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices))

    def transpose(self) -> "CsrMatrix":
        return CsrMatrix.from_coo(self.col_indices, self.row_indices(), self.values,
                                  (self.ncols, self.nrows))

    @property
    def T(self) -> "CsrMatrix":
        return self.transpose()

    def diagonal(self) -> np.ndarray:
        rows = self.row_indices()
        d = np.zeros(min(self.shape))
        on = rows == self.col_indices
        d[rows[on]] = self.values[on]
        return d

    def __matmul__(self, x):
        return spmv(self, x)

    def __repr__(self):
        return f"CsrMatrix(shape={self.shape}, nnz={self.nnz})"


def spmv(A: CsrMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.ncols:
        raise ValueError(f"dimension mismatch: matrix has {A.ncols} columns, vector {x.shape[0]}")
    return A.to_scipy() @ x


def add_scaled(A: CsrMatrix, B: CsrMatrix, alpha: float, beta: float) -> CsrMatrix:
    """alpha*A + beta*B on the union pattern; cancelled entries stay stored."""
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    rows = np.concatenate([A.row_indices(), B.row_indices()])
    cols = np.concatenate([A.col_indices, B.col_indices])
    vals = np.concatenate([alpha * A.values, beta * B.values])
    return CsrMatrix.from_coo(rows, cols, vals, A.shape)


def _relres(A, x, b) -> float:
    bn = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / bn if bn > 0 else r


def solve_spd(A: CsrMatrix, b, tol: float = 1e-10, maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients, relative residual ``tol``."""
    b = np.asarray(b, dtype=float)
    if A.nrows != A.ncols or b.shape != (A.nrows,):
        raise ValueError("solve_spd needs a square matrix and a matching right-hand side")
    if not np.any(b):
        return np.zeros_like(b)
    S = A.to_scipy()
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("matrix is not positive definite (non-positive diagonal)")
    precond = spla.LinearOperator(S.shape, matvec=lambda v: v / d, dtype=float)
    maxiter = 10 * A.nrows if maxiter is None else maxiter
    x, _ = spla.cg(S, b, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
    res = _relres(S, x, b)
    if not np.all(np.isfinite(x)) or res > tol:
        raise SolverError(f"conjugate gradients did not converge in {maxiter} iterations", res)
    return x


class Factorization:
    """Sparse LU factors of a square matrix, reusable across right-hand sides.

    The default column ordering is minimum degree on A^T + A, which suits the
    structurally symmetric finite-element patterns used here.
    """

    def __init__(self, A: CsrMatrix, permc_spec: str = "MMD_AT_PLUS_A"):
        if A.nrows != A.ncols:
            raise ValueError("factorization needs a square matrix")
        self.matrix = A.to_scipy().tocsc()
        try:
            self._lu = spla.splu(self.matrix, permc_spec=permc_spec)
        except RuntimeError as exc:  # exactly singular
            raise SolverError(f"LU factorization failed: {exc}") from exc

    def solve(self, b, tol: float = 1e-10) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SolverError("LU solve produced non-finite values")
        res = _relres(self.matrix, x, b)
        if res > tol:
            raise SolverError("LU solve residual above tolerance", res)
        return x


def solve_general(A: CsrMatrix, b, tol: float = 1e-10) -> np.ndarray:
    """Direct sparse LU solve for a nonsymmetric system."""
    return Factorization(A).solve(b, tol)


def norm_M(M: CsrMatrix, v) -> float:
    """Energy norm sqrt(v^T M v) for a symmetric positive (semi)definite M."""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(float(v @ spmv(M, v)), 0.0)))


def norm_inf(v) -> float:
    return float(np.max(np.abs(v))) if len(v) else 0.0


def write_matrix_market(path, A: CsrMatrix, comment: str = "") -> None:
    coo = sp.coo_matrix((A.values, (A.row_indices(), A.col_indices)), shape=A.shape)
    scipy.io.mmwrite(str(path), coo, comment=comment, field="real",
                     precision=17, symmetry="general")


def read_matrix_market(path) -> CsrMatrix:
    coo = sp.coo_matrix(scipy.io.mmread(str(path)))
    return CsrMatrix.from_coo(coo.row, coo.col, coo.data, coo.shape)
