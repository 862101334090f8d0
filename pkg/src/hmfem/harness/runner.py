"""Turn a :class:`RunConfig` into a simulation with files on disk."""
from __future__ import annotations

import time
import warnings
from pathlib import Path

from ..mesh import build_mesh
from ..stepper import Discretization, RunAborted, init_state, run
from ..verify.checks import monitor
from .config import RunConfig, format_config
from .io import write_json, write_snapshot


def setup(cfg: RunConfig):
    """Mesh, discretization and initial state for a configuration."""
    cfg.validate()
    mesh = build_mesh(cfg.n, cfg.x0, cfg.y0, cfg.L)
    disc = Discretization(mesh, cfg.profile.p_field(), solver_tol=cfg.solver_tol,
                          solver_maxit=cfg.solver_maxit or None)
    state = init_state(mesh, cfg.initial, disc.M, disc.K)
    return mesh, disc, state


def run_config(cfg: RunConfig, write: bool = True, quiet: bool = False):
    """Run a configuration; returns ``(final_state, stats, summary)``.

    With ``write`` the output directory receives ``config.txt``, one
    ``snapshot_<step>.csv`` per emitted snapshot and ``stats.json``.  A run
    that aborts still writes its last good snapshot and statistics before
    the :class:`RunAborted` propagates.
    """
    t0 = time.perf_counter()
    mesh, disc, state = setup(cfg)
    setup_time = time.perf_counter() - t0
    out = Path(cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(format_config(cfg))

    def emit(step, s):
        if write:
            write_snapshot(s, mesh, out / f"snapshot_{step:06d}.csv")

    caught = []
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always", RuntimeWarning)
        try:
            final, stats = run(disc, state, cfg.scheme_config(), cfg.T, cfg.u_max,
                               cfg.snapshot_every, emit)
            aborted = None
        except RunAborted as exc:
            final, stats, aborted = exc.state, exc.stats, exc
        caught = [str(x.message) for x in w]
    if not quiet:
        for msg in caught:
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    stats.setup_time = setup_time
    reports = monitor(stats, cfg.tau, disc.k_sup)
    summary = {
        "config": cfg.to_flat(),
        "warnings": caught,
        "monitor": [r.to_dict() for r in reports],
        **stats.to_dict(),
    }
    if write:
        write_json(summary, out / "stats.json")
    if aborted is not None:
        raise aborted
    return final, stats, summary
