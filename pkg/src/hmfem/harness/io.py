"""File formats: CSV snapshots, JSON statistics, MatrixMarket matrices."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..assembly import assemble, assemble_R, assemble_S
from ..mesh import Mesh
from ..sparse import CsrMatrix, read_matrix_market, write_matrix_market

SNAPSHOT_HEADER = "x,y,u,w"


def write_snapshot(state, mesh: Mesh, path) -> None:
    """One row per full-grid node; periodic values repeated on the closing edges."""
    data = np.column_stack([mesh.nodes, mesh.unfold(state.U), mesh.unfold(state.W)])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=SNAPSHOT_HEADER, comments="")


def read_snapshot(path) -> np.ndarray:
    """Array of shape (n^2, 4) with columns x, y, u, w."""
    with open(path) as fh:
        header = fh.readline().strip()
    if header != SNAPSHOT_HEADER:
        raise ValueError(f"{path}: expected header {SNAPSHOT_HEADER!r}, got {header!r}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def snapshot_state(path, mesh: Mesh):
    """Reduced (U, W) recovered from a snapshot file."""
    data = read_snapshot(path)
    if len(data) != mesh.num_nodes:
        raise ValueError(f"{path}: {len(data)} rows, mesh has {mesh.num_nodes} nodes")
    return mesh.fold(data[:, 2]), mesh.fold(data[:, 3])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(doc: dict, path) -> None:
    """JSON with non-finite floats written as strings ("inf", "nan")."""
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")


def export_matrices(mesh: Mesh, p, U, outdir) -> dict:
    """Write M, A, K, R and S(U) as MatrixMarket files; returns name -> path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    M = assemble(mesh, "mass")
    mats = {
        "M": M,
        "A": assemble(mesh, "stiffness"),
        "K": assemble(mesh, "h1"),
        "R": assemble_R(mesh, p),
        "S0": assemble_S(mesh, U),
    }
    paths = {}
    for name, mat in mats.items():
        path = outdir / f"{name}.mtx"
        write_matrix_market(path, mat, comment=f"{name}, n={mesh.n}, L={mesh.L!r}")
        paths[name] = path
    return paths


def import_matrix(path) -> CsrMatrix:
    return read_matrix_market(path)
