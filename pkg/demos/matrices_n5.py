"""Assemble the n=5 periodic matrices, print their structure and export them.

    python3 demos/matrices_n5.py [outdir]
"""
import sys

import numpy as np

from hmfem.assembly import R_integer_matrix, assemble_S
from hmfem.harness.io import export_matrices
from hmfem.mesh import build_mesh
from hmfem.verify import reference

mesh = build_mesh(5)
U = np.random.default_rng(0).standard_normal(mesh.num_dofs)

S = assemble_S(mesh, U)
print(f"S(U): {S.nnz} stored entries, 6 per row")
for row in (S.toarray() != 0):
    print("  " + "".join("*" if v else "." for v in row))
same = np.array_equal(S.toarray() != 0, reference.s_pattern_n5())
print("pattern matches the reference table:", same)

B = R_integer_matrix(mesh).toarray().astype(int)
print("\nR / (h k / 6):")
for row in B:
    print("  " + " ".join(f"{v:2d}" for v in row))
print("row sums:", B.sum(axis=1).tolist())
print("skew:", bool(np.array_equal(B, -B.T)))
diff = [tuple(map(int, ij)) for ij in np.argwhere(B != reference.R_N5)]
print("slots differing from the printed table:", diff)

out = sys.argv[1] if len(sys.argv) > 1 else "matrices_n5"
for name, path in export_matrices(mesh, 12.0, U, out).items():
    print(f"wrote {name} -> {path}")
