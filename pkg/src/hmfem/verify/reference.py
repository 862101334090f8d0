"""Reference n=5 displays, transcribed verbatim.

``S_PATTERN_N5`` is the star pattern of the periodic S(U) and ``R_N5`` the
integer matrix ``B`` with ``R = (h k / 6) B`` for a constant gradient ``k``,
both in reduced DOF order.  The printed ``R_N5`` contains two entries that
contradict its own skew-symmetry and zero row sums; ``R_N5_ERRATA`` lists the
values those invariants force.
"""
import numpy as np

S_PATTERN_N5 = (
    "0*0***000000*00*",
    "*0*00**00000**00",
    "0*0*00**00000**0",
    "*0*0*00*000000**",
    "*00*0*0***000000",
    "**00*0*00**00000",
    "0**00*0*00**0000",
    "00***0*0*00*0000",
    "0000*00*0*0***00",
    "0000**00*0*00**0",
    "00000**00*0*00**",
    "000000***0*0*00*",
    "**000000*00*0*0*",
    "0**00000**00*0*0",
    "00**00000**00*0*",
    "*00*000000***0*0",
)

R_N5 = np.array([
    [ 0,  1,  0, -1, -2, -1,  0,  0,  0,  0,  0,  0,  2,  0,  0,  1],
    [-1,  0,  1,  0,  0, -2, -1,  0,  0,  0,  0,  0,  1,  2,  0,  0],
    [ 0, -1,  0,  1,  0,  0, -2, -1,  0,  0,  0,  0,  0,  1,  2,  0],
    [ 1,  0, -1,  0, -1,  0,  0, -1,  0,  0,  0,  0,  0,  0,  1,  2],
    [ 2,  0,  0,  1,  0,  1,  0, -1, -2, -1,  0,  0,  0,  0,  0,  0],
    [ 1,  2,  0,  0, -1,  0,  1,  0,  0, -2, -1,  0,  0,  0,  0,  0],
    [ 0,  1,  2,  0,  0, -1,  0,  1,  0,  0, -2, -1,  0,  0,  0,  0],
    [ 0,  0,  1,  2,  1,  0, -1,  0, -1,  0,  0, -2,  0,  0,  0,  0],
    [ 0,  0,  0,  0,  2,  0,  0,  1,  0,  1,  0, -1, -2, -1,  0,  0],
    [ 0,  0,  0,  0,  1,  2,  0,  0, -1,  0,  1,  0,  0, -2, -1,  0],
    [ 0,  0,  0,  0,  0,  1,  2,  0,  0, -1,  0,  1,  0,  0, -1, -1],
    [ 0,  0,  0,  0,  0,  0,  1,  2,  1,  0, -1,  0, -1,  0,  0, -2],
    [-2, -1,  0,  0,  0,  0,  0,  0,  2,  0,  0,  1,  0,  1,  0, -1],
    [ 0, -2, -1,  0,  0,  0,  0,  0,  1,  2,  0,  0, -1,  0,  1,  0],
    [ 0,  0, -2, -1,  0,  0,  0,  0,  0,  1,  2,  0,  0, -1,  0,  1],
    [-1,  0,  0, -2,  0,  0,  0,  0,  0,  0,  1,  2,  1,  0, -1,  0],
], dtype=int)

# (row, col) 0-based -> value implied by skew-symmetry and zero row sums
R_N5_ERRATA = {(3, 7): -2, (10, 14): -2}


def s_pattern_n5() -> np.ndarray:
    """Boolean 16x16 mask of the starred entries."""
    return np.array([[ch == "*" for ch in row] for row in S_PATTERN_N5])


def r_n5_corrected() -> np.ndarray:
    B = R_N5.copy()
    for (i, j), v in R_N5_ERRATA.items():
        B[i, j] = v
    return B
