"""Command-line entry point.

    hmfem run [--config FILE] [--set section.key=value ...] [flags]
    hmfem preset NAME [--set ...] [flags]
    hmfem export-matrices --n 5 --k 12 [--out DIR]
    hmfem verify [--full] [--report FILE]
    hmfem list-presets          (or: hmfem --list-presets)

Exit codes: 0 success, 1 runtime or verification failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from ..mesh import build_mesh
from ..problems import PRESETS, list_presets, preset
from ..stepper import RunAborted
from ..verify.checks import write_report
from ..verify.suite import run_suite
from .config import ConfigError, RunConfig, load_config, parse_overrides
from .io import export_matrices
from .runner import run_config

# convenience flags -> config keys
_FLAG_KEYS = {
    "n": "mesh.n", "L": "mesh.L", "tau": "scheme.tau", "scheme": "scheme.name",
    "T": "run.T", "u_max": "run.u_max", "snapshot_every": "run.snapshot_every",
    "output_dir": "run.output_dir", "stability_mode": "scheme.stability_mode",
}


def _add_run_flags(p):
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any setting, e.g. --set initial.amplitude=1e-4")
    p.add_argument("--n", help="nodes per side")
    p.add_argument("--L", help="domain side length")
    p.add_argument("--tau", help="time step")
    p.add_argument("--scheme", help="semilinear or fixedpoint")
    p.add_argument("--T", help="final time")
    p.add_argument("--u-max", dest="u_max", help="stop once max|u| reaches this")
    p.add_argument("--snapshot-every", dest="snapshot_every", help="steps between snapshots")
    p.add_argument("--stability-mode", dest="stability_mode", help="warn or enforce")
    p.add_argument("--output-dir", "-o", dest="output_dir", help="output directory")
    p.add_argument("--quiet", "-q", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmfem", description="P1 finite-element solver for the Hasegawa-Mima equation "
        "on a periodic square.")
    parser.add_argument("--list-presets", action="store_true", help="list presets and exit")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run a configuration file plus overrides")
    p_run.add_argument("--config", "-c", help="flat key-value config file")
    _add_run_flags(p_run)

    p_pre = sub.add_parser("preset", help="run a built-in experiment")
    p_pre.add_argument("name")
    _add_run_flags(p_pre)

    p_exp = sub.add_parser("export-matrices", help="write M, A, K, R, S0 in MatrixMarket format")
    p_exp.add_argument("--n", type=int, default=5)
    p_exp.add_argument("--L", type=float, default=1.0)
    p_exp.add_argument("--k", type=float, default=12.0, help="constant background gradient")
    p_exp.add_argument("--preset", help="take mesh, profile and S0 from a preset instead")
    p_exp.add_argument("--out", "-o", default="matrices")

    p_ver = sub.add_parser("verify", help="run the verification suite")
    p_ver.add_argument("--full", action="store_true", help="full randomized counts")
    p_ver.add_argument("--report", default="verification.json")
    p_ver.add_argument("--seed", type=int, default=0)

    sub.add_parser("list-presets", help="list presets")
    return parser


def _overrides(args) -> dict:
    flat = parse_overrides(args.set)
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            flat[key] = value
    return flat


def _print_presets(out):
    for name in list_presets():
        p = PRESETS[name]
        print(f"{name:12s} n={p.n:<3d} L={p.L:<8.5g} tau={p.tau:g} T={p.T:<4g} {p.description}",
              file=out)


def _run(cfg: RunConfig, quiet: bool) -> int:
    try:
        _, stats, summary = run_config(cfg, write=True, quiet=True)
    except RunAborted as exc:
        print(f"hmfem: run aborted: {exc}", file=sys.stderr)
        print(f"hmfem: partial results in {cfg.output_dir}", file=sys.stderr)
        return 1
    for msg in summary["warnings"]:
        print(f"hmfem: warning: {msg}", file=sys.stderr)
    if not quiet:
        last = stats.records[-1]
        print(f"stop_reason={stats.stop_reason} t={last.t:.6g} steps={stats.steps} "
              f"max|u|={last.u_inf:.6g} wall={stats.total_wall_time:.3g}s")
        bad = [m["name"] for m in summary["monitor"] if not m["passed"]]
        if bad:
            print(f"monitor violations: {', '.join(bad)}")
        print(f"output: {cfg.output_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = sys.stdout
    if args.list_presets or args.command == "list-presets":
        _print_presets(out)
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "run":
            base = load_config(args.config) if args.config else RunConfig()
            cfg = RunConfig.from_flat(_overrides(args), base)
            return _run(cfg, args.quiet)
        if args.command == "preset":
            try:
                base = RunConfig.from_preset(preset(args.name))
            except KeyError as exc:
                print(f"hmfem: {exc.args[0]}", file=sys.stderr)
                return 2
            cfg = RunConfig.from_flat(_overrides(args), base)
            return _run(cfg, args.quiet)
        if args.command == "export-matrices":
            if args.preset:
                cfg = RunConfig.from_preset(preset(args.preset))
                mesh = build_mesh(cfg.n, cfg.x0, cfg.y0, cfg.L)
                p, U = cfg.profile.p_field(), mesh.sample(cfg.initial)
            else:
                if args.n < 3 or not args.L > 0 or not math.isfinite(args.k):
                    raise ConfigError(["export-matrices: need n >= 3, L > 0 and finite k"])
                mesh = build_mesh(args.n, 0.0, 0.0, args.L)
                p = args.k
                U = np.random.default_rng(0).standard_normal(mesh.num_dofs)
            paths = export_matrices(mesh, p, U, args.out)
            for name, path in paths.items():
                print(f"{name}: {path}", file=out)
            return 0
        if args.command == "verify":
            reports = run_suite(quick=not args.full, seed=args.seed)
            doc = write_report(reports, args.report)
            for r in reports:
                print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}", file=out)
            print(f"report: {args.report}", file=out)
            return 0 if doc["passed"] else 1
    except ConfigError as exc:
        print(f"hmfem: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"hmfem: {exc}", file=sys.stderr)
        return 2
    parser.print_usage(sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
