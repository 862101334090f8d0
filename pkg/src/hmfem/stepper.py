"""Time integration of the coupled transport/elliptic system.

Unknowns are the reduced nodal vectors ``U`` (potential) and ``W`` (vorticity
``w = u - lap u``).  Two one-step methods are provided:

* semi-linear: ``(M + tau S(U)) W' = M W + tau R U`` then ``K U' = M W'``;
* fixed point for the fully implicit step, iterating
  ``(M - tau R K^{-1} M) Y = M W - tau S(U^k) Y^k`` through the sparse pair
  ``(K - tau R) Ut = r``, ``M Y = K Ut``.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .assembly import (ConstantGradient, assemble, assemble_R, assemble_S_direct,
                       gradient_sup, s_operator)
from .mesh import Mesh
from .sparse import (CsrMatrix, Factorization, SolverError, add_scaled, norm_M,
                     norm_inf, solve_spd, spmv)


class StepError(RuntimeError):
    """A time step could not be completed (solver failure or non-finite values)."""


class FixedPointError(StepError):
    def __init__(self, message, errors):
        super().__init__(message)
        self.errors = list(errors)


@dataclass
class State:
    t: float
    U: np.ndarray
    W: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.U.copy(), self.W.copy())


@dataclass
class SchemeConfig:
    scheme: str = "semilinear"
    tau: float = 0.1
    fp_tol: float = 1e-10
    fp_maxit: int = 50
    stability_mode: str = "warn"
    contraction_safety: float = 1.0

    def __post_init__(self):
        problems = []
        if self.scheme not in ("semilinear", "fixedpoint"):
            problems.append(f"scheme: expected semilinear or fixedpoint, got {self.scheme!r}")
        if not (isinstance(self.tau, (int, float)) and self.tau > 0 and math.isfinite(self.tau)):
            problems.append(f"tau: must be a positive finite number, got {self.tau!r}")
        if not self.fp_tol > 0:
            problems.append(f"fp_tol: must be positive, got {self.fp_tol!r}")
        if int(self.fp_maxit) != self.fp_maxit or self.fp_maxit < 1:
            problems.append(f"fp_maxit: must be a positive integer, got {self.fp_maxit!r}")
        if self.stability_mode not in ("warn", "enforce"):
            problems.append(f"stability_mode: expected warn or enforce, got {self.stability_mode!r}")
        if not self.contraction_safety > 0:
            problems.append(f"contraction_safety: must be positive, got {self.contraction_safety!r}")
        if problems:
            raise ValueError("; ".join(problems))


def _check_finite(name, v):
    if not np.all(np.isfinite(v)):
        raise StepError(f"non-finite values in {name}")


class Discretization:
    """Matrices and factorizations shared by every step of a run.

    With ``reuse=True`` (default) M, K and R are assembled once, K is factored
    once and S(U) is refreshed in place on a fixed pattern.  ``reuse=False``
    is the naive reference that rebuilds every matrix and factorization on each
    step; it exists for timing comparisons.
    """

    def __init__(self, mesh: Mesh, p=None, reuse: bool = True, solver_tol: float = 1e-10,
                 solver_maxit: int | None = None):
        self.mesh = mesh
        self.p = ConstantGradient(0.0) if p is None else p
        self.reuse = reuse
        self.solver_tol = solver_tol
        self.solver_maxit = solver_maxit
        self._build_static()
        self.S_op = s_operator(mesh)
        # slots of the S pattern inside the (topological) mass pattern
        keys_M = self.M.row_indices() * self.M.ncols + self.M.col_indices
        pat = self.S_op.pattern
        keys_S = pat.row_indices() * pat.ncols + pat.col_indices
        self._s_in_m = np.searchsorted(keys_M, keys_S)
        if not np.array_equal(keys_M[self._s_in_m], keys_S):
            raise RuntimeError("S(U) pattern is not contained in the mass pattern")
        self.S = pat.copy()
        self.K_lu = Factorization(self.K)
        self._M_lu = None
        self._KmR = {}

    def _build_static(self):
        self.M = assemble(self.mesh, "mass")
        self.A = assemble(self.mesh, "stiffness")
        self.K = add_scaled(self.M, self.A, 1.0, 1.0)
        self.R = assemble_R(self.mesh, self.p)

    @property
    def k_sup(self) -> float:
        return gradient_sup(self.p, self.mesh)

    @property
    def M_lu(self) -> Factorization:
        if self._M_lu is None:
            self._M_lu = Factorization(self.M)
        return self._M_lu

    def KmR_lu(self, tau: float) -> Factorization:
        if tau not in self._KmR:
            self._KmR[tau] = Factorization(add_scaled(self.K, self.R, 1.0, -tau))
        return self._KmR[tau]

    def refresh_S(self, U) -> CsrMatrix:
        return self.S_op(U, into=self.S)

    def hyperbolic_matrix(self, U, tau: float) -> CsrMatrix:
        """M + tau*S(U) on the mass pattern."""
        self.refresh_S(U)
        vals = self.M.values.copy()
        vals[self._s_in_m] += tau * self.S.values
        return self.M.with_values(vals)

    def solve_elliptic(self, W) -> np.ndarray:
        """U with K U = M W."""
        return self.K_lu.solve(spmv(self.M, W), self.solver_tol)

    # naive path -----------------------------------------------------------
    def naive_semilinear(self, state: State, tau: float) -> State:
        self._build_static()
        S = assemble_S_direct(self.mesh, state.U)
        B = add_scaled(self.M, S, 1.0, tau)
        rhs = spmv(self.M, state.W) + tau * spmv(self.R, state.U)
        W = Factorization(B).solve(rhs, self.solver_tol)
        U = Factorization(self.K).solve(spmv(self.M, W), self.solver_tol)
        return State(state.t + tau, U, W)


def init_state(mesh: Mesh, u0, M: CsrMatrix, K: CsrMatrix, tol: float = 1e-12) -> State:
    """Initial pair: U0 = nodal interpolant of ``u0``; W0 solves M W0 = K U0.

    ``u0`` may be a callable of (x, y) or an already sampled reduced vector.
    """
    U0 = np.array(u0, dtype=float) if not callable(u0) else mesh.sample(u0)
    if U0.shape != (mesh.num_dofs,):
        raise ValueError(f"initial vector must have length {mesh.num_dofs}")
    _check_finite("initial condition", U0)
    W0 = solve_spd(M, spmv(K, U0), tol=tol)
    return State(0.0, U0, W0)


def step_semilinear(state: State, tau: float, disc: Discretization) -> State:
    """One step of the semi-linearized implicit scheme."""
    if not disc.reuse:
        new = disc.naive_semilinear(state, tau)
    else:
        B = disc.hyperbolic_matrix(state.U, tau)
        rhs = spmv(disc.M, state.W) + tau * spmv(disc.R, state.U)
        try:
            W = Factorization(B).solve(rhs, disc.solver_tol)
            _check_finite("W", W)
            U = disc.solve_elliptic(W)
        except SolverError as exc:
            raise StepError(f"solve failed at t={state.t:g}: {exc}") from exc
        new = State(state.t + tau, U, W)
    _check_finite("U", new.U)
    _check_finite("W", new.W)
    return new


def _relchange(new, old) -> float:
    scale = np.linalg.norm(new)
    diff = np.linalg.norm(new - old)
    if scale == 0.0:
        return diff
    return diff / scale


def step_fixedpoint(state: State, tau: float, disc: Discretization, fp_tol: float = 1e-10,
                    fp_maxit: int = 50):
    """One fully implicit step by fixed-point iteration.

    Returns ``(new_state, iterations, errors)`` where ``errors[k]`` is the
    relative change (max over W and U, Euclidean norm) at iteration ``k+1``.
    """
    M = disc.M
    Z = spmv(M, state.W)
    Y, Uk = state.W.copy(), state.U.copy()
    errors = []
    try:
        KmR = disc.KmR_lu(tau)
        for _ in range(int(fp_maxit)):
            S = disc.refresh_S(Uk)
            r = Z - tau * spmv(S, Y)
            Ut = KmR.solve(r, disc.solver_tol)
            Ynew = disc.M_lu.solve(spmv(disc.K, Ut), disc.solver_tol)
            _check_finite("fixed-point iterate", Ynew)
            err = max(_relchange(Ynew, Y), _relchange(Ut, Uk))
            Y, Uk = Ynew, Ut
            errors.append(err)
            if err <= fp_tol:
                break
        else:
            raise FixedPointError(
                f"fixed point did not converge in {fp_maxit} iterations at t={state.t:g} "
                f"(last error {errors[-1]:.3e})", errors)
        U = disc.solve_elliptic(Y)
    except SolverError as exc:
        raise StepError(f"solve failed at t={state.t:g}: {exc}") from exc
    _check_finite("U", U)
    return State(state.t + tau, U, Y), len(errors), errors


def stability_report(disc: Discretization, tau: float, W=None, safety: float = 1.0) -> dict:
    """Step-size restrictions for the current data.

    ``coercivity_bound`` is 1/(2 max|p_x|); ``contraction_bound`` is
    (1/8) min{4/max|p_x|, h^2/(c C_Z)} with C_Z = 2 ||W||_M and ``c = safety``.
    """
    k = disc.k_sup
    coercive = math.inf if k == 0 else 1.0 / (2.0 * k)
    rep = {"tau": tau, "k_sup": k, "coercivity_bound": coercive,
           "tau_within_coercivity_bound": bool(tau <= coercive)}
    if W is not None:
        CZ = 2.0 * norm_M(disc.M, W)
        a = math.inf if k == 0 else 4.0 / k
        b = math.inf if CZ == 0 else disc.mesh.h ** 2 / (safety * CZ)
        rep["C_Z"] = CZ
        rep["contraction_bound"] = min(a, b) / 8.0
        rep["tau_within_contraction_bound"] = bool(tau <= rep["contraction_bound"])
    return rep


@dataclass
class StepRecord:
    step: int
    t: float
    u_inf: float
    W_M: float
    U_K: float
    U_M: float
    elliptic_residual: float
    fp_iterations: int
    wall_time: float
    contraction_bound: float


@dataclass
class RunStats:
    records: list = field(default_factory=list)
    stop_reason: str = ""
    error: str | None = None
    total_wall_time: float = 0.0
    setup_time: float = 0.0
    stability: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.records) - 1

    @property
    def final_time(self) -> float:
        return self.records[-1].t if self.records else 0.0

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_dict(self) -> dict:
        return {
            "stop_reason": self.stop_reason,
            "error": self.error,
            "steps": self.steps,
            "final_time": self.final_time,
            "total_wall_time": self.total_wall_time,
            "setup_time": self.setup_time,
            "total_fp_iterations": int(sum(r.fp_iterations for r in self.records)),
            "stability": self.stability,
            "records": [asdict(r) for r in self.records],
        }


class RunAborted(RuntimeError):
    """A run stopped on an error; the partial statistics and last good state are attached."""

    def __init__(self, message, stats: RunStats, state: State):
        super().__init__(message)
        self.stats = stats
        self.state = state


def _record(disc, state, step, fp_its, wall, tau, safety) -> StepRecord:
    MW = spmv(disc.M, state.W)
    res = np.linalg.norm(spmv(disc.K, state.U) - MW)
    den = np.linalg.norm(MW)
    bound = stability_report(disc, tau, state.W, safety)["contraction_bound"]
    return StepRecord(
        step=step, t=state.t, u_inf=norm_inf(state.U), W_M=norm_M(disc.M, state.W),
        U_K=norm_M(disc.K, state.U), U_M=norm_M(disc.M, state.U),
        elliptic_residual=res / den if den > 0 else res, fp_iterations=fp_its,
        wall_time=wall, contraction_bound=bound,
    )


def run(disc: Discretization, state: State, scheme: SchemeConfig, T: float,
        u_max: float = 0.3, snapshot_every: int = 0,
        on_snapshot: Callable[[int, State], None] | None = None):
    """Advance until ``t >= T`` or ``max|U| >= u_max``.

    Times are ``t = m*tau`` for step ``m``.  Snapshots go to ``on_snapshot``
    at step 0, every ``snapshot_every`` steps (0 disables) and at the final
    step.  Returns ``(final_state, stats)``; on a failed step raises
    :class:`RunAborted` after emitting the last good snapshot.
    """
    if T < 0:
        raise ValueError(f"T must be non-negative, got {T}")
    tau = scheme.tau
    safety = scheme.contraction_safety
    stats = RunStats()
    stats.stability = stability_report(disc, tau, state.W, safety)
    if not stats.stability["tau_within_coercivity_bound"]:
        msg = (f"tau={tau:g} exceeds the coercivity bound 1/(2 max|p_x|) = "
               f"{stats.stability['coercivity_bound']:.4g}")
        if scheme.stability_mode == "enforce":
            raise ValueError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    emit = on_snapshot or (lambda step, s: None)
    nsteps = max(0, math.ceil(T / tau - 1e-9))
    t0 = time.perf_counter()
    stats.records.append(_record(disc, state, 0, 0, 0.0, tau, safety))
    emit(0, state)
    last_emitted = 0
    stats.stop_reason = "time_limit"
    m = 0
    if norm_inf(state.U) >= u_max:
        stats.stop_reason = "u_max_reached"
        nsteps = 0
    while m < nsteps:
        ts = time.perf_counter()
        try:
            if scheme.scheme == "semilinear":
                new, its = step_semilinear(state, tau, disc), 0
            else:
                new, its, _ = step_fixedpoint(state, tau, disc, scheme.fp_tol, scheme.fp_maxit)
        except StepError as exc:
            stats.stop_reason = "error"
            stats.error = str(exc)
            stats.total_wall_time = time.perf_counter() - t0
            if last_emitted != m:
                emit(m, state)
            raise RunAborted(str(exc), stats, state) from exc
        m += 1
        new.t = m * tau
        wall = time.perf_counter() - ts
        state = new
        stats.records.append(_record(disc, state, m, its, wall, tau, safety))
        if stats.records[-1].u_inf >= u_max:
            stats.stop_reason = "u_max_reached"
            break
        if snapshot_every and m % snapshot_every == 0 and m < nsteps:
            emit(m, state)
            last_emitted = m
    if last_emitted != m:
        emit(m, state)
    stats.total_wall_time = time.perf_counter() - t0
    return state, stats
