import math
import warnings

import numpy as np
import pytest

import hmfem.stepper as stepper
from hmfem.assembly import ConstantGradient, local_basis
from hmfem.mesh import build_mesh
from hmfem.sparse import CsrMatrix, add_scaled, norm_M
from hmfem.stepper import (Discretization, FixedPointError, RunAborted, SchemeConfig, State,
                           StepError, init_state, run, stability_report, step_fixedpoint,
                           step_semilinear)
from hmfem.verify.checks import monitor
from hmfem.verify.oracle import (OracleGrid, dense_fixedpoint_step, dense_semilinear_step,
                                 oracle_assemble)


def smooth_u0(x, y):
    return 0.5 * np.sin(x) * np.cos(2 * y) + 0.3 * np.cos(x + y)


@pytest.fixture
def small():
    mesh = build_mesh(9, L=2 * math.pi)
    disc = Discretization(mesh, ConstantGradient(1.0))
    return mesh, disc, init_state(mesh, smooth_u0, disc.M, disc.K)


def test_init_state_solves_mass_system(small):
    mesh, disc, s = small
    assert s.t == 0.0
    np.testing.assert_allclose(s.U, mesh.sample(smooth_u0))
    r = disc.M @ s.W - disc.K @ s.U
    assert np.linalg.norm(r) <= 1e-11 * np.linalg.norm(disc.K @ s.U)


def test_init_state_rejects_bad_vector():
    mesh = build_mesh(5)
    disc = Discretization(mesh)
    with pytest.raises(ValueError):
        init_state(mesh, np.zeros(3), disc.M, disc.K)
    with pytest.raises(StepError):
        init_state(mesh, np.full(16, np.nan), disc.M, disc.K)


@pytest.mark.parametrize("c", [0.0, 0.7, -3.0])
def test_constant_state_is_stationary(c):
    mesh = build_mesh(9, L=math.pi)
    disc = Discretization(mesh, ConstantGradient(12.0))
    s = init_state(mesh, np.full(mesh.num_dofs, c), disc.M, disc.K)
    scale = max(abs(c), 1.0)
    np.testing.assert_allclose(s.W, c, atol=1e-12 * scale)
    new = step_semilinear(s, 0.01, disc)
    np.testing.assert_allclose(new.U, c, atol=1e-12 * scale)
    np.testing.assert_allclose(new.W, c, atol=1e-12 * scale)
    fp, its, _ = step_fixedpoint(s, 0.01, disc)
    np.testing.assert_allclose(fp.U, c, atol=1e-12 * scale)
    assert its <= 2


def _dense_setup(k=3.0, n=5):
    grid = OracleGrid(n, 0.0, 0.0, 2.0)
    M = oracle_assemble(grid, "mass")
    K = M + oracle_assemble(grid, "stiffness")
    R = oracle_assemble(grid, "R", p=lambda x, y: (k, 0.0))
    return grid, M, K, R


def test_semilinear_step_matches_dense_reference(rng):
    grid, M, K, R = _dense_setup()
    mesh = build_mesh(5, L=2.0)
    disc = Discretization(mesh, ConstantGradient(3.0))
    U = 0.1 * rng.standard_normal(mesh.num_dofs)
    s = init_state(mesh, U, disc.M, disc.K)
    rU, rW = dense_semilinear_step(M, K, R, oracle_assemble(grid, "S", U=U), U, s.W, 0.05)
    new = step_semilinear(s, 0.05, disc)
    np.testing.assert_allclose(new.U, rU, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(new.W, rW, rtol=1e-9, atol=1e-12)
    assert new.t == pytest.approx(0.05)


def test_fixedpoint_step_matches_dense_reference(rng):
    grid, M, K, R = _dense_setup()
    mesh = build_mesh(5, L=2.0)
    disc = Discretization(mesh, ConstantGradient(3.0))
    U = 0.1 * rng.standard_normal(mesh.num_dofs)
    s = init_state(mesh, U, disc.M, disc.K)
    rU, rW = dense_fixedpoint_step(M, K, R, lambda V: oracle_assemble(grid, "S", U=V),
                                   U, s.W, 0.05)
    new, its, errors = step_fixedpoint(s, 0.05, disc, fp_tol=1e-13)
    np.testing.assert_allclose(new.U, rU, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(new.W, rW, rtol=1e-9, atol=1e-12)
    assert its == len(errors) and errors[-1] <= 1e-13


def test_fixedpoint_solves_implicit_system(small):
    """The converged step satisfies M W' + tau S(U') W' = M W + tau R U' with K U' = M W'."""
    _, disc, s = small
    tau = 0.02
    new, _, _ = step_fixedpoint(s, tau, disc, fp_tol=1e-13)
    S = disc.S_op(new.U)
    lhs = disc.M @ new.W + tau * (S @ new.W)
    rhs = disc.M @ s.W + tau * (disc.R @ new.U)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_fixedpoint_reports_nonconvergence(small):
    _, disc, s = small
    with pytest.raises(FixedPointError) as info:
        step_fixedpoint(s, 0.5, disc, fp_tol=1e-15, fp_maxit=2)
    assert len(info.value.errors) == 2


def test_naive_mode_matches_reuse(small):
    mesh, disc, s = small
    naive = Discretization(mesh, ConstantGradient(1.0), reuse=False)
    a = step_semilinear(step_semilinear(s, 0.05, disc), 0.05, disc)
    b = step_semilinear(step_semilinear(s, 0.05, naive), 0.05, naive)
    np.testing.assert_allclose(a.U, b.U, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(a.W, b.W, rtol=1e-10, atol=1e-14)


def test_hyperbolic_matrix_keeps_mass_pattern(small):
    mesh, disc, s = small
    B = disc.hyperbolic_matrix(s.U, 0.1)
    assert B.same_pattern(disc.M)
    np.testing.assert_allclose(B.toarray(), disc.M.toarray() + 0.1 * disc.S_op(s.U).toarray(),
                               atol=1e-15)


def test_state_copy_is_independent():
    s = State(0.0, np.zeros(3), np.ones(3))
    c = s.copy()
    c.U[0] = 5
    assert s.U[0] == 0


@pytest.mark.parametrize("kwargs, field", [
    ({"tau": 0}, "tau"), ({"tau": -1}, "tau"), ({"tau": math.inf}, "tau"),
    ({"scheme": "rk4"}, "scheme"), ({"fp_tol": 0}, "fp_tol"), ({"fp_maxit": 0}, "fp_maxit"),
    ({"stability_mode": "ignore"}, "stability_mode"),
])
def test_scheme_config_validation(kwargs, field):
    with pytest.raises(ValueError, match=field):
        SchemeConfig(**kwargs)


def test_stability_report_values():
    mesh = build_mesh(33, L=math.pi)
    disc = Discretization(mesh, ConstantGradient(12.0))
    W = np.ones(mesh.num_dofs)
    rep = stability_report(disc, 0.1, W)
    assert rep["coercivity_bound"] == pytest.approx(1 / 24)
    assert rep["tau_within_coercivity_bound"] is False
    CZ = 2 * norm_M(disc.M, W)
    assert rep["C_Z"] == pytest.approx(2 * math.pi)
    assert rep["contraction_bound"] == pytest.approx(min(4 / 12, mesh.h ** 2 / CZ) / 8)


def test_stability_modes():
    mesh = build_mesh(9, L=math.pi)
    disc = Discretization(mesh, ConstantGradient(12.0))
    s = init_state(mesh, lambda x, y: 1e-5 * np.sin(2 * y), disc.M, disc.K)
    with pytest.warns(RuntimeWarning, match="coercivity"):
        run(disc, s, SchemeConfig(tau=0.1), T=0.2)
    with pytest.raises(ValueError, match="coercivity"):
        run(disc, s, SchemeConfig(tau=0.1, stability_mode="enforce"), T=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run(disc, s, SchemeConfig(tau=0.01, stability_mode="enforce"), T=0.02)


def test_run_time_limit_and_step_times(small):
    _, disc, s = small
    final, stats = run(disc, s, SchemeConfig(tau=0.1), T=1.0, u_max=math.inf)
    assert stats.stop_reason == "time_limit"
    assert stats.steps == 10
    assert final.t == pytest.approx(1.0)
    np.testing.assert_allclose(stats.series("t"), 0.1 * np.arange(11), rtol=0, atol=1e-15)


def test_run_stops_at_u_max(small):
    _, disc, s = small
    target = 1.05 * np.abs(s.U).max()
    _, stats = run(disc, s, SchemeConfig(tau=0.1), T=100.0, u_max=target)
    u = stats.series("u_inf")
    assert stats.stop_reason == "u_max_reached"
    assert u[-1] >= target and np.all(u[:-1] < target)


def test_run_initial_already_above_u_max(small):
    _, disc, s = small
    final, stats = run(disc, s, SchemeConfig(tau=0.1), T=1.0, u_max=1e-3)
    assert stats.steps == 0 and stats.stop_reason == "u_max_reached"
    assert final is s


def test_run_rejects_negative_T(small):
    _, disc, s = small
    with pytest.raises(ValueError):
        run(disc, s, SchemeConfig(), T=-1.0)


def test_snapshots(small):
    _, disc, s = small
    seen = []
    run(disc, s, SchemeConfig(tau=0.1), T=0.75, u_max=math.inf, snapshot_every=3,
        on_snapshot=lambda m, st: seen.append((m, st.t)))
    assert [m for m, _ in seen] == [0, 3, 6, 8]
    assert seen[-1][1] == pytest.approx(0.8)


def test_fixedpoint_run_counts_iterations(small):
    _, disc, s = small
    _, stats = run(disc, s, SchemeConfig(scheme="fixedpoint", tau=0.01), T=0.05, u_max=math.inf)
    its = stats.series("fp_iterations")
    assert its[0] == 0 and np.all(its[1:] >= 1)
    assert stats.to_dict()["total_fp_iterations"] == int(its.sum())


def test_run_aborts_with_last_good_state(small, monkeypatch):
    _, disc, s = small
    calls = {"n": 0}
    real = stepper.step_semilinear

    def flaky(state, tau, d):
        calls["n"] += 1
        if calls["n"] == 4:
            raise StepError("synthetic failure")
        return real(state, tau, d)

    monkeypatch.setattr(stepper, "step_semilinear", flaky)
    seen = []
    with pytest.raises(RunAborted) as info:
        run(disc, s, SchemeConfig(tau=0.1), T=1.0, u_max=math.inf, snapshot_every=10,
            on_snapshot=lambda m, st: seen.append(m))
    exc = info.value
    assert exc.stats.stop_reason == "error"
    assert "synthetic" in exc.stats.error
    assert exc.stats.steps == 3 and exc.state.t == pytest.approx(0.3)
    assert seen == [0, 3]


def test_run_monitors_pass_and_k0_conserves(rng):
    mesh = build_mesh(17, L=2 * math.pi)
    disc = Discretization(mesh, ConstantGradient(0.0))
    s = init_state(mesh, smooth_u0, disc.M, disc.K)
    _, stats = run(disc, s, SchemeConfig(tau=0.05), T=2.5, u_max=math.inf)
    reports = monitor(stats, 0.05, 0.0)
    assert all(r.passed for r in reports), [r.to_dict() for r in reports]
    W = stats.series("W_M")
    assert np.all(np.diff(W) <= 1e-9 * W[:-1])


class WrongSignDiscretization(Discretization):
    """Uses the symmetric (sign-flipped) combination instead of the skew convection matrix."""

    def hyperbolic_matrix(self, U, tau):
        tris = self.mesh.reduced_triangles()
        _, _, _, bh, ch, area = local_basis(self.mesh.triangle_coordinates())
        C = (bh[:, :, None] * ch[:, None, :] + ch[:, :, None] * bh[:, None, :])
        C /= 12 * area[:, None, None]
        col = np.einsum("tik,tk->ti", C, U[tris])
        local = np.repeat(col[:, :, None], 3, axis=2)
        S = CsrMatrix.from_coo(np.repeat(tris, 3, axis=1).ravel(), np.tile(tris, (1, 3)).ravel(),
                               local.ravel(), (self.M.nrows, self.M.ncols))
        return add_scaled(self.M, S, 1.0, tau)


def test_monitor_flags_wrong_sign_convection():
    mesh = build_mesh(17, L=2 * math.pi)
    disc = WrongSignDiscretization(mesh, ConstantGradient(0.0))
    s = init_state(mesh, lambda x, y: 4 * smooth_u0(x, y), disc.M, disc.K)
    _, stats = run(disc, s, SchemeConfig(tau=0.05), T=2.5, u_max=math.inf)
    failed = {r.name for r in monitor(stats, 0.05, 0.0) if not r.passed}
    assert {"conservation", "a_priori_growth"} <= failed


def test_norm_ordering_every_step(small):
    _, disc, s = small
    _, stats = run(disc, s, SchemeConfig(tau=0.05), T=1.0, u_max=math.inf)
    UM, UK, WM = stats.series("U_M"), stats.series("U_K"), stats.series("W_M")
    assert np.all(UM <= UK * (1 + 1e-12)) and np.all(UK <= WM * (1 + 1e-12))
