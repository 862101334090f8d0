import json
import math

import numpy as np
import pytest

from hmfem.harness.cli import main
from hmfem.harness.config import (ConfigError, RunConfig, format_config, load_config,
                                  parse_overrides, parse_text)
from hmfem.harness.io import (export_matrices, import_matrix, read_snapshot, snapshot_state,
                              write_json, write_snapshot)
from hmfem.harness.runner import run_config
from hmfem.assembly import assemble, assemble_R, assemble_S
from hmfem.mesh import build_mesh
from hmfem.problems import Exponential, GaussDeriv, SinY, list_presets, preset
from hmfem.stepper import RunAborted, State, StepError
import hmfem.stepper as stepper


# ---------------------------------------------------------------------------
# config

def test_parse_text_dotted_and_sections():
    text = """
# comment
mesh.n = 17
scheme.tau = 0.05   # inline
[run]
T = 2.5
[initial]
kind = gauss_deriv
amplitude = 1e-4
"""
    flat = parse_text(text)
    assert flat == {"mesh.n": "17", "scheme.tau": "0.05", "run.T": "2.5",
                    "initial.kind": "gauss_deriv", "initial.amplitude": "1e-4"}
    cfg = RunConfig.from_flat(flat)
    assert cfg.n == 17 and cfg.tau == 0.05 and cfg.T == 2.5
    assert cfg.initial == GaussDeriv(amplitude=1e-4)


def test_parse_text_requires_section():
    with pytest.raises(ConfigError, match="section"):
        parse_text("n = 5\n")


def test_validation_lists_every_bad_field():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_flat({"mesh.n": "2", "scheme.tau": "0", "run.u_max": "-1",
                             "mesh.bogus": "1", "scheme.fp_maxit": "1.5"})
    msgs = "\n".join(info.value.errors)
    for key in ("mesh.n", "scheme.tau", "run.u_max", "mesh.bogus", "scheme.fp_maxit"):
        assert key in msgs


def test_kind_switch_resets_parameters():
    base = RunConfig(initial=SinY(3e-5, 2.0))
    cfg = RunConfig.from_flat({"initial.kind": "gauss_deriv", "initial.width": "2"}, base)
    assert cfg.initial == GaussDeriv(width=2.0)
    same = RunConfig.from_flat({"initial.amplitude": "1"}, base)
    assert same.initial == SinY(1.0, 2.0)


@pytest.mark.parametrize("name", list_presets())
def test_presets_round_trip_through_config_text(tmp_path, name):
    cfg = RunConfig.from_preset(preset(name))
    path = tmp_path / "c.txt"
    path.write_text(format_config(cfg))
    assert load_config(path) == cfg


def test_parse_overrides():
    assert parse_overrides(["mesh.n=5", "initial.expr=x*y=1"]) == {
        "mesh.n": "5", "initial.expr": "x*y=1"}
    with pytest.raises(ConfigError):
        parse_overrides(["novalue"])


def test_preset_config():
    cfg = RunConfig.from_preset(preset("case2"))
    assert cfg.n == 33 and cfg.L == math.pi and cfg.profile == Exponential(12.0)
    assert cfg.output_dir.endswith("case2")


# ---------------------------------------------------------------------------
# file formats

def test_snapshot_round_trip(tmp_path, rng):
    mesh = build_mesh(5, L=2.0)
    s = State(0.0, rng.standard_normal(16) * 1e-7, rng.standard_normal(16))
    path = tmp_path / "s.csv"
    write_snapshot(s, mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,u,w"
    assert len(lines) == 26
    U, W = snapshot_state(path, mesh)
    np.testing.assert_array_equal(U, s.U)
    np.testing.assert_array_equal(W, s.W)
    data = read_snapshot(path)
    np.testing.assert_array_equal(data[:, :2], mesh.nodes)


def test_snapshot_rejects_bad_files(tmp_path):
    bad = tmp_path / "b.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_snapshot(bad)
    ok = tmp_path / "o.csv"
    write_snapshot(State(0.0, np.zeros(4), np.zeros(4)), build_mesh(3), ok)
    with pytest.raises(ValueError):
        snapshot_state(ok, build_mesh(5))


def test_write_json_non_finite(tmp_path):
    write_json({"a": math.inf, "b": np.float64(1.5), "c": np.arange(2)}, tmp_path / "x.json")
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": "inf", "b": 1.5, "c": [0, 1]}


def test_export_matrices_round_trip(tmp_path, rng):
    mesh = build_mesh(5)
    U = rng.standard_normal(16)
    paths = export_matrices(mesh, 12.0, U, tmp_path)
    assert set(paths) == {"M", "A", "K", "R", "S0"}
    expected = {"M": assemble(mesh, "mass"), "A": assemble(mesh, "stiffness"),
                "K": assemble(mesh, "h1"), "R": assemble_R(mesh, 12.0), "S0": assemble_S(mesh, U)}
    for name, mat in expected.items():
        back = import_matrix(paths[name])
        assert back.same_pattern(mat)
        np.testing.assert_array_equal(back.values, mat.values)


# ---------------------------------------------------------------------------
# runner

def _small_cfg(tmp_path, **kw):
    flat = {"mesh.n": "9", "run.T": "0.5", "scheme.tau": "0.1", "run.snapshot_every": "2",
            "run.output_dir": str(tmp_path / "out")}
    flat.update(kw)
    return RunConfig.from_flat(flat)


def test_run_config_writes_outputs(tmp_path):
    cfg = _small_cfg(tmp_path)
    final, stats, summary = run_config(cfg, quiet=True)
    out = tmp_path / "out"
    names = sorted(p.name for p in out.glob("snapshot_*.csv"))
    assert names == ["snapshot_000000.csv", "snapshot_000002.csv", "snapshot_000004.csv",
                     "snapshot_000005.csv"]
    doc = json.loads((out / "stats.json").read_text())
    assert doc["stop_reason"] == "time_limit" and doc["steps"] == 5
    assert doc["config"]["mesh.n"] == 9
    assert any("coercivity" in w for w in doc["warnings"])
    assert {m["name"] for m in doc["monitor"]} >= {"a_priori_growth", "norm_ordering"}
    assert load_config(out / "config.txt") == cfg
    U, _ = snapshot_state(out / "snapshot_000005.csv", build_mesh(9, L=math.pi))
    np.testing.assert_array_equal(U, final.U)


def test_run_config_abort_keeps_partial_output(tmp_path, monkeypatch):
    real = stepper.step_semilinear
    calls = {"n": 0}

    def flaky(state, tau, d):
        calls["n"] += 1
        if calls["n"] == 3:
            raise StepError("boom")
        return real(state, tau, d)

    monkeypatch.setattr(stepper, "step_semilinear", flaky)
    cfg = _small_cfg(tmp_path, **{"run.snapshot_every": "10"})
    with pytest.raises(RunAborted):
        run_config(cfg, quiet=True)
    out = tmp_path / "out"
    assert (out / "snapshot_000002.csv").exists()
    doc = json.loads((out / "stats.json").read_text())
    assert doc["stop_reason"] == "error" and "boom" in doc["error"]


# ---------------------------------------------------------------------------
# CLI

def test_cli_list_presets(capsys):
    assert main(["--list-presets"]) == 0
    a = capsys.readouterr().out
    assert main(["list-presets"]) == 0
    assert capsys.readouterr().out == a and "case2" in a


def test_cli_run_with_config_and_flag_override(tmp_path, capsys):
    conf = tmp_path / "c.txt"
    conf.write_text("mesh.n = 9\nrun.T = 10\nscheme.tau = 0.1\n")
    out = tmp_path / "o"
    code = main(["run", "--config", str(conf), "--T", "0.3", "-o", str(out)])
    assert code == 0
    doc = json.loads((out / "stats.json").read_text())
    assert doc["steps"] == 3
    assert "stop_reason=time_limit" in capsys.readouterr().out


def test_cli_preset_with_set(tmp_path):
    out = tmp_path / "p"
    code = main(["preset", "case3", "--set", "mesh.n=9", "--T", "0.2", "-o", str(out), "-q"])
    assert code == 0
    assert json.loads((out / "stats.json").read_text())["config"]["initial.kind"] == "sin_x"


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--tau", "0", "-o", str(tmp_path)]) == 2
    assert "scheme.tau" in capsys.readouterr().err
    assert main(["preset", "nope"]) == 2
    assert main([]) == 2
    assert main(["run", "--set", "mesh.n=abc"]) == 2
    assert main(["run", "--stability-mode", "enforce", "--T", "0.1",
                 "-o", str(tmp_path / "e")]) == 2


def test_cli_export_and_verify(tmp_path, capsys):
    assert main(["export-matrices", "--n", "5", "--out", str(tmp_path / "m")]) == 0
    assert import_matrix(tmp_path / "m" / "R.mtx").nnz == 96
    assert main(["export-matrices", "--preset", "case2", "--out", str(tmp_path / "p")]) == 0
    assert import_matrix(tmp_path / "p" / "S0.mtx").nrows == 32 * 32
    assert main(["export-matrices", "--n", "2", "--out", str(tmp_path / "x")]) == 2
    report = tmp_path / "v.json"
    assert main(["verify", "--report", str(report)]) == 0
    assert json.loads(report.read_text())["passed"] is True


def test_runs_are_bit_identical(tmp_path):
    a = run_config(_small_cfg(tmp_path / "a", **{"run.T": "1"}), quiet=True)
    b = run_config(_small_cfg(tmp_path / "b", **{"run.T": "1"}), quiet=True)
    assert np.array_equal(a[0].U, b[0].U) and np.array_equal(a[0].W, b[0].W)
    for name in ("snapshot_000000.csv", "snapshot_000010.csv"):
        assert ((tmp_path / "a" / "out" / name).read_bytes()
                == (tmp_path / "b" / "out" / name).read_bytes())
