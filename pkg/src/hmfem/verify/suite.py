"""The verification suite behind ``hmfem verify``."""
from __future__ import annotations

import math
import time
import warnings

import numpy as np

from ..assembly import (AnalyticGradient, ConstantGradient, R_integer_matrix, assemble,
                        assemble_R, assemble_S, s_operator)
from ..mesh import build_mesh
from ..stepper import (Discretization, SchemeConfig, init_state, run, step_fixedpoint,
                       step_semilinear)
from .checks import Report, check_bounds, check_pattern, check_R, check_skew, monitor
from .oracle import (OracleGrid, dense_fixedpoint_step, dense_semilinear_step,
                     oracle_assemble)
from .reference import R_N5, R_N5_ERRATA, r_n5_corrected, s_pattern_n5


def reference_n5() -> list[Report]:
    mesh = build_mesh(5)
    rng = np.random.default_rng(5)
    S = assemble_S(mesh, rng.standard_normal(mesh.num_dofs)).toarray()
    mask = S != 0
    ref = s_pattern_n5()
    s_rep = Report("reference_S_pattern_n5", bool(np.array_equal(mask, ref)),
                   float(np.sum(mask != ref)), {"mismatched_slots": int(np.sum(mask != ref))})
    B = R_integer_matrix(mesh).toarray()
    diff = np.argwhere(B != R_N5)
    mismatches = [tuple(map(int, ij)) for ij in diff]
    r_rep = Report(
        "reference_R_n5",
        bool(np.array_equal(B, r_n5_corrected()) and set(mismatches) == set(R_N5_ERRATA)),
        float(len(set(mismatches) - set(R_N5_ERRATA))),
        {"entries_differing_from_printed": mismatches,
         "printed_values": [int(R_N5[i, j]) for i, j in mismatches],
         "assembled_values": [int(B[i, j]) for i, j in mismatches],
         "equal_after_errata": bool(np.array_equal(B, r_n5_corrected()))},
    )
    return [s_rep, r_rep]


def sparsity_counts(ns=range(4, 13)) -> Report:
    rows = []
    ok = True
    for n in ns:
        mesh = build_mesh(n)
        counts = {
            "n": n,
            "S": s_operator(mesh).nnz,
            "R": assemble_R(mesh, 1.0).nnz,
            "S_general": s_operator(mesh, periodic=False).nnz,
            "R_general": assemble_R(mesh, 1.0, periodic=False).nnz,
        }
        want = {"S": 6 * (n - 1) ** 2, "R": 6 * (n - 1) ** 2,
                "S_general": 6 * n * n - 4 * n - 2, "R_general": 6 * n * n - 8 * n + 4}
        ok &= all(counts[k] == v for k, v in want.items())
        rows.append(counts)
    return Report("sparsity_counts", bool(ok), 0.0 if ok else 1.0, {"counts": rows})


def random_quadratic_gradient(rng):
    """Gradient of a random quadratic p (so the midpoint rule is exact)."""
    c = rng.standard_normal(6)

    def px(x, y):
        return c[1] + 2 * c[3] * np.asarray(x) + c[4] * np.asarray(y)

    def py(x, y):
        return c[2] + 2 * c[5] * np.asarray(y) + c[4] * np.asarray(x)

    return px, py


def oracle_equivalence(cases: int = 100, seed: int = 0, nmax: int = 9) -> Report:
    rng = np.random.default_rng(seed)
    worst = {"M": 0.0, "A": 0.0, "S": 0.0, "R": 0.0}
    for _ in range(cases):
        n = int(rng.integers(4, nmax + 1))
        L = float(rng.uniform(0.5, 4.0))
        x0, y0 = rng.uniform(-2, 2, 2)
        mesh = build_mesh(n, x0, y0, L)
        grid = OracleGrid(n, x0, y0, L)
        U = rng.standard_normal(mesh.num_dofs)
        px, py = random_quadratic_gradient(rng)
        pairs = {
            "M": (assemble(mesh, "mass"), oracle_assemble(grid, "mass")),
            "A": (assemble(mesh, "stiffness"), oracle_assemble(grid, "stiffness")),
            "S": (assemble_S(mesh, U), oracle_assemble(grid, "S", U=U)),
            "R": (assemble_R(mesh, AnalyticGradient(px, py)),
                  oracle_assemble(grid, "R", p=lambda x, y: (px(x, y), py(x, y)))),
        }
        for k, (prod, ref) in pairs.items():
            err = np.max(np.abs(prod.toarray() - ref)) / np.max(np.abs(ref))
            worst[k] = max(worst[k], float(err))
    top = max(worst.values())
    return Report("oracle_equivalence", top <= 1e-12, top, {"cases": cases, "worst_relative": worst})


def skew_and_bounds(trials: int = 200, seed: int = 1, n: int = 9) -> Report:
    rng = np.random.default_rng(seed)
    mesh = build_mesh(n)
    worst_skew = worst_bound = 0.0
    ok = True
    for _ in range(trials):
        U = rng.standard_normal(mesh.num_dofs) * 10 ** rng.uniform(-6, 3)
        S = assemble_S(mesh, U)
        uinf = np.max(np.abs(U))
        sk = check_skew(S, atol=1e-14 * uinf)
        bd = check_bounds(S, U)
        ok &= sk.passed and bd.passed
        worst_skew = max(worst_skew, sk.max_violation / uinf)
        worst_bound = max(worst_bound, bd.details["max_entry"] / uinf)
    k = float(rng.uniform(-20, 20))
    rrep = check_R(assemble_R(mesh, k), mesh.h, k)
    return Report("skew_and_bounds", bool(ok and rrep.passed), worst_skew,
                  {"trials": trials, "max_skew_over_uinf": worst_skew,
                   "max_entry_over_uinf": worst_bound, "R": rrep.details})


def dense_step_reference(seed: int = 2) -> Report:
    rng = np.random.default_rng(seed)
    mesh = build_mesh(5)
    grid = OracleGrid(5)
    k = 3.0
    disc = Discretization(mesh, ConstantGradient(k))
    M, K = oracle_assemble(grid, "mass"), oracle_assemble(grid, "mass") + oracle_assemble(grid, "stiffness")
    R = oracle_assemble(grid, "R", p=lambda x, y: (k, 0.0))
    U = 1e-2 * rng.standard_normal(mesh.num_dofs)
    W = np.linalg.solve(M, K @ U)
    state = init_state(mesh, U, disc.M, disc.K)
    tau = 0.05
    ref_U, ref_W = dense_semilinear_step(M, K, R, oracle_assemble(grid, "S", U=U), U, W, tau)
    new = step_semilinear(state, tau, disc)
    e1 = max(np.max(np.abs(new.U - ref_U)) / np.max(np.abs(ref_U)),
             np.max(np.abs(new.W - ref_W)) / np.max(np.abs(ref_W)))
    fU, fW = dense_fixedpoint_step(M, K, R, lambda V: oracle_assemble(grid, "S", U=V), U, W, tau)
    fp, _, _ = step_fixedpoint(state, tau, disc, fp_tol=1e-13)
    e2 = max(np.max(np.abs(fp.U - fU)) / np.max(np.abs(fU)),
             np.max(np.abs(fp.W - fW)) / np.max(np.abs(fW)))
    top = float(max(e1, e2))
    return Report("dense_step_reference", top <= 1e-10, top,
                  {"semilinear_rel_error": float(e1), "fixedpoint_rel_error": float(e2)})


def run_monitors(steps: int = 100) -> list[Report]:
    out = []
    mesh = build_mesh(17, L=2 * math.pi)
    disc = Discretization(mesh, ConstantGradient(0.0))
    u0 = lambda x, y: 0.5 * np.sin(x) * np.cos(2 * y) + 0.3 * np.cos(x + y)  # noqa: E731
    state = init_state(mesh, u0, disc.M, disc.K)
    _, stats = run(disc, state, SchemeConfig(tau=0.05), T=steps * 0.05, u_max=math.inf)
    for r in monitor(stats, 0.05, 0.0):
        r.name = f"k0_run.{r.name}"
        out.append(r)
    mesh = build_mesh(17, L=math.pi)
    disc = Discretization(mesh, ConstantGradient(12.0))
    state = init_state(mesh, lambda x, y: 1e-5 * np.sin(3 * y), disc.M, disc.K)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        _, stats = run(disc, state, SchemeConfig(tau=0.1), T=20.0)
    for r in monitor(stats, 0.1, 12.0):
        r.name = f"drift_run.{r.name}"
        out.append(r)
    return out


def negative_control() -> Report:
    M = assemble(build_mesh(5), "mass")
    rep = check_skew(M)
    return Report("negative_control_mass_not_skew", not rep.passed, 0.0,
                  {"mass_skew_violation": rep.max_violation})


def run_suite(quick: bool = True, seed: int = 0) -> list[Report]:
    """All structural, oracle and monitor checks.  ``quick`` trims the randomized counts."""
    t0 = time.perf_counter()
    reports = []
    reports += reference_n5()
    reports.append(sparsity_counts())
    reports.append(oracle_equivalence(cases=20 if quick else 100, seed=seed))
    reports.append(skew_and_bounds(trials=100 if quick else 1000, seed=seed + 1))
    reports.append(dense_step_reference(seed=seed + 2))
    reports += run_monitors(steps=100 if quick else 500)
    reports.append(negative_control())
    reports.append(Report("suite_runtime", True, 0.0, {"seconds": time.perf_counter() - t0}))
    return reports
