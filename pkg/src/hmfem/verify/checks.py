"""Structural checks on assembled matrices and run monitors.

Every check returns a :class:`Report`; nothing raises on failure, so the
reports can be collected into a JSON verification document.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from ..sparse import CsrMatrix


@dataclass
class Report:
    name: str
    passed: bool
    max_violation: float = 0.0
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        d["max_violation"] = float(d["max_violation"])
        return d


def _dense(mat) -> np.ndarray:
    return mat.toarray() if isinstance(mat, CsrMatrix) else np.asarray(mat, dtype=float)


def check_skew(mat, atol: float = 0.0) -> Report:
    """max |A + A^T| <= atol."""
    D = _dense(mat)
    viol = float(np.max(np.abs(D + D.T))) if D.size else 0.0
    return Report("skew_symmetry", viol <= atol, viol, {"atol": atol})


def periodic_neighbours(n: int) -> set:
    """Expected off-diagonal (row, col) slots of S(U) and R on the (n-1)x(n-1) torus.

    Node (i, j) is coupled to the six ends of its mesh edges: left/right,
    down/up and the two diagonal neighbours along the BL-TR split.
    """
    m = n - 1
    slots = set()
    for j in range(m):
        for i in range(m):
            r = j * m + i
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)):
                c = ((j + dj) % m) * m + (i + di) % m
                if c != r:
                    slots.add((r, c))
    return slots


def check_pattern(mat, n: int) -> Report:
    """Periodic S(U) / R layout: 6 per row and column, zero diagonal, block
    tridiagonal with corner blocks, 2(n-1) entries per nonzero block and the
    exact edge-neighbour slots."""
    m = n - 1
    if isinstance(mat, CsrMatrix):
        rows, cols = mat.row_indices(), mat.col_indices
    else:
        rows, cols = np.nonzero(_dense(mat))
    got = set(zip(rows.tolist(), cols.tolist()))
    expected = periodic_neighbours(n)
    per_row = np.bincount(rows, minlength=m * m)
    per_col = np.bincount(cols, minlength=m * m)
    blocks = {}
    for r, c in got:
        blocks[(r // m, c // m)] = blocks.get((r // m, c // m), 0) + 1
    block_ok = all(((bc - br) % m) in (0, 1, m - 1) for br, bc in blocks) if m > 2 else True
    details = {
        "nnz": len(got),
        "expected_nnz": 6 * m * m,
        "diagonal_entries": int(np.sum(rows == cols)),
        "rows_with_6": int(np.sum(per_row == 6)),
        "cols_with_6": int(np.sum(per_col == 6)),
        "nonzero_blocks": len(blocks),
        "block_tridiagonal_with_corners": bool(block_ok),
        "entries_per_block": sorted(set(blocks.values())),
        "missing": len(expected - got),
        "unexpected": len(got - expected),
    }
    passed = (got == expected and len(got) == 6 * m * m and block_ok
              and len(blocks) == 3 * m and set(blocks.values()) == {2 * m})
    return Report("pattern", passed, float(len(expected ^ got)), details)


def check_bounds(mat, U) -> Report:
    """Entry bound |S(U)_ij| <= ||U||_inf / 3."""
    D = _dense(mat)
    bound = float(np.max(np.abs(U))) / 3.0 if len(U) else 0.0
    worst = float(np.max(np.abs(D))) if D.size else 0.0
    return Report("entry_bound", worst <= bound * (1 + 1e-14), max(0.0, worst - bound),
                  {"max_entry": worst, "bound": bound})


def check_R(mat, h: float, k: float) -> Report:
    """Constant-gradient R: skew, zero diagonal and line sums, |entries| <= h|k|/3,
    entries (h k / 6) * alpha with alpha in {-2, -1, 1, 2}."""
    D = _dense(mat)
    scale = abs(h * k)
    tol = 1e-14 * scale
    rows = float(np.max(np.abs(D.sum(axis=1))))
    cols = float(np.max(np.abs(D.sum(axis=0))))
    skew = float(np.max(np.abs(D + D.T)))
    diag = float(np.max(np.abs(np.diag(D))))
    big = float(np.max(np.abs(D)))
    details = {"row_sum": rows, "col_sum": cols, "skew": skew, "diagonal": diag,
               "max_entry": big, "entry_bound": scale / 3.0}
    passed = rows <= tol and cols <= tol and skew <= tol and diag <= tol and big <= scale / 3.0 + tol
    if k != 0:
        nz = D[D != 0] / (h * k / 6.0)
        alpha = np.rint(nz)
        details["alphas"] = sorted(set(alpha.astype(int).tolist()))
        passed = passed and np.all(np.abs(nz - alpha) <= 1e-12) and set(details["alphas"]) <= {-2, -1, 1, 2}
    return Report("R_structure", bool(passed), max(rows, cols, skew, diag), details)


def _series(stats, name):
    if hasattr(stats, "series"):
        return stats.series(name)
    return np.array([r[name] for r in stats["records"]], dtype=float)


def monitor(stats, tau: float, k_sup: float, rtol: float = 1e-9,
            elliptic_tol: float = 1e-8) -> list[Report]:
    """Check a finished run against the discrete a-priori inequalities.

    * growth: ||W^{m+1}||_M <= (1 + tau*k_sup) ||W^m||_M
    * ordering: ||U||_M <= ||U||_K <= ||W||_M at every record
    * k_sup == 0: ||W||_M non-increasing
    * elliptic consistency: ||K U - M W|| / ||M W|| <= elliptic_tol
    """
    W = _series(stats, "W_M")
    UK = _series(stats, "U_K")
    UM = _series(stats, "U_M")
    res = _series(stats, "elliptic_residual")
    out = []
    factor = 1.0 + tau * k_sup
    if len(W) > 1:
        ratio = W[1:] / np.where(W[:-1] > 0, W[:-1], np.inf)
        worst = float(np.max(ratio)) if len(ratio) else 0.0
    else:
        worst = 0.0
    out.append(Report("a_priori_growth", worst <= factor * (1 + rtol),
                      max(0.0, worst - factor), {"worst_step_ratio": worst, "allowed": factor}))
    slack = rtol * np.maximum(W, 1e-300)
    v1 = float(np.max(UM - UK)) if len(W) else 0.0
    v2 = float(np.max(UK - W)) if len(W) else 0.0
    out.append(Report("norm_ordering", bool(np.all(UM <= UK + slack) and np.all(UK <= W + slack)),
                      max(0.0, v1, v2), {"max_UM_minus_UK": v1, "max_UK_minus_WM": v2}))
    if k_sup == 0:
        inc = (W[1:] - W[:-1]) / np.maximum(W[:-1], 1e-300) if len(W) > 1 else np.zeros(0)
        worst_inc = float(np.max(inc)) if len(inc) else 0.0
        out.append(Report("conservation", worst_inc <= rtol, max(0.0, worst_inc),
                          {"max_relative_increase": worst_inc}))
    worst_res = float(np.max(res)) if len(res) else 0.0
    out.append(Report("elliptic_consistency", worst_res <= elliptic_tol, worst_res,
                      {"tolerance": elliptic_tol}))
    return out


def write_report(reports, path) -> dict:
    doc = {
        "passed": all(r.passed for r in reports),
        "checks": [r.to_dict() for r in reports],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=float)
    return doc
