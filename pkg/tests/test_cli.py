import json

import numpy as np
import pytest

from gekf_esc import cli
from gekf_esc.config import parse_config
from gekf_esc.errors import ConfigError
from gekf_esc.sim import COLUMNS, TrajectoryRecord

HEADER = "t,x,y,f_true,f_meas,a_x,a_y,J_x,J_y,gx_est,gy_est,gx_true,gy_true,P11,P22,P33,P44,P55"

BASE = """
scenarios:
  a:
    field: {kind: quadratic, peak: 10.0, center: [1.0, 1.0], weights: [0.5, 1.5]}
    controller: {variant: gekf-adaptive, omega: 30.0, c: 0.3, lambda: [0.015, 0.0995]}
    duration: 2.0
  a_base:
    extends: a
    controller: {variant: baseline-constant}
  elsewhere:
    extends: a
    initial_position: [0.0, 0.0]
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text(BASE)
    return p


def run(*argv):
    return cli.main([str(a) for a in argv])


# -- CSV ----------------------------------------------------------------------

def test_header_matches_columns():
    assert ",".join(COLUMNS) == HEADER


def test_empty_record_is_header_only(tmp_path):
    p = tmp_path / "e.csv"
    cli.emit_csv(TrajectoryRecord(np.empty((0, len(COLUMNS)))), p)
    assert p.read_text() == HEADER + "\n"


def test_single_row_two_lines(tmp_path):
    p = tmp_path / "s.csv"
    cli.emit_csv(TrajectoryRecord(np.arange(len(COLUMNS), dtype=float)[None, :]), p)
    text = p.read_text()
    assert text.endswith("\n") and len(text.splitlines()) == 2


def test_round_trip_exact(tmp_path, rng):
    data = rng.standard_normal((50, len(COLUMNS))) * 10.0 ** rng.integers(-300, 300, (50, len(COLUMNS)))
    data[3, 4] = np.nan
    rec = TrajectoryRecord(data)
    p = tmp_path / "r.csv"
    cli.emit_csv(rec, p)
    assert cli.read_csv(p) == rec


def test_unwritable_path_names_path(tmp_path):
    bad = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        cli.emit_csv(TrajectoryRecord(np.zeros((1, len(COLUMNS)))), bad)


# -- run ----------------------------------------------------------------------

def test_run_writes_outputs(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert run("run", "a", "--config", cfg_file, "--out", out) == 0
    lines = (out / "a_trajectory.csv").read_text().splitlines()
    assert lines[0] == HEADER and len(lines) == 1 + 2.0 / 0.01 + 1
    s = json.loads((out / "a_summary.json").read_text())
    assert s["status"] == "ok" and s["seed"] == 0
    # resolved scenario embeds defaults
    assert s["scenario"]["gekf"]["R"] == 0.5 and s["scenario"]["dt"] == 0.001


def test_summary_reproduces_run(cfg_file, tmp_path):
    import yaml
    out = tmp_path / "o"
    run("run", "a", "--config", cfg_file, "--out", out, "--seed", 11)
    s = json.loads((out / "a_summary.json").read_text())
    again = tmp_path / "again.yaml"
    again.write_text(yaml.safe_dump({"scenarios": {"a": s["scenario"]}}))
    out2 = tmp_path / "o2"
    assert run("run", "a", "--config", again, "--out", out2) == 0
    assert (out / "a_trajectory.csv").read_bytes() == (out2 / "a_trajectory.csv").read_bytes()


def test_rerun_byte_identical(cfg_file, tmp_path):
    for d in ("p", "q"):
        assert run("run", "a", "--config", cfg_file, "--out", tmp_path / d, "--seed", 5,
                   "--set", "sensor.noise_std=0.1") == 0
    assert (tmp_path / "p/a_trajectory.csv").read_bytes() == (tmp_path / "q/a_trajectory.csv").read_bytes()


def test_divergent_run_exits_2_with_partial_csv(cfg_file, tmp_path):
    out = tmp_path / "d"
    code = run("run", "a", "--config", cfg_file, "--out", out, "--set", "controller.lambda=-20",
               "--set", "allow_unstable=true", "--set", "duration=10")
    assert code == cli.EXIT_ABORT
    lines = (out / "a_trajectory.csv").read_text().splitlines()
    assert lines[0] == HEADER and 1 < len(lines) < 1002
    assert json.loads((out / "a_summary.json").read_text())["status"] == "aborted"


def test_negative_lambda_without_flag_is_config_error(cfg_file, tmp_path, capsys):
    assert run("run", "a", "--config", cfg_file, "--out", tmp_path,
               "--set", "controller.lambda=-20") == cli.EXIT_CONFIG


def test_unknown_scenario(cfg_file, tmp_path):
    assert run("run", "nope", "--config", cfg_file, "--out", tmp_path) == cli.EXIT_CONFIG


def test_missing_config(tmp_path, capsys):
    assert run("run", "a", "--config", tmp_path / "none.yaml") == cli.EXIT_CONFIG
    assert "none.yaml" in capsys.readouterr().err


# -- config -------------------------------------------------------------------

def test_negative_omega_names_field(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(BASE.replace("omega: 30.0", "omega: -1"))
    with pytest.raises(ConfigError) as ei:
        parse_config(p)
    msg = str(ei.value)
    assert "omega" in msg and ":5" in msg


def test_unknown_key_located(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(BASE + "    colour: blue\n")
    with pytest.raises(ConfigError, match=r"colour") as ei:
        parse_config(p)
    assert ":13" in str(ei.value)


def test_duplicate_scenario_rejected(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(BASE + "  a:\n    duration: 1.0\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(p)


def test_unknown_comparison_rejected(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(BASE + "comparisons:\n  - [a, ghost]\n")
    with pytest.raises(ConfigError, match="ghost"):
        parse_config(p)


def test_baseline_without_lambda_accepted(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("scenarios:\n  b:\n    controller: {variant: baseline-constant}\n    gekf: null\n")
    sc = parse_config(p).get("b")
    assert sc.esc.variant == "baseline-constant"


def test_preset_parameter_list():
    sc = parse_config().get("sim_known_objective")
    e, g = sc.esc, sc.gekf
    assert (e.omega, e.c, e.lambda_x, e.lambda_y, e.a_x0, e.a_y0, e.h1, e.h2) == \
        (30.0, 0.3, 0.015, 0.0995, 1.0, 1.0, 1.0, 1.0)
    assert tuple(sc.p0) == (2.0, 2.0) and tuple(sc.gekf_P0) == (4.0,) * 5
    assert (g.t_out, g.substeps) == (0.1, 10)
    assert np.allclose(np.asarray(g.Q) * np.eye(5), 0.05 * np.eye(5)) and np.isclose(g.R, 0.5)
    f = sc.build_field()
    assert f.kind == "quadratic" and f.peak == 10.0 and f.center == (1.0, 1.0) and f.weights == (0.5, 1.5)
    assert sc.duration == 100.0


def test_experiment_and_light_presets():
    cfg = parse_config()
    e = cfg.get("exp_known_objective").esc
    assert (e.omega, e.c, e.a_x0, e.lambda_x, e.h1) == (30.0, 0.5, 0.137, 0.005, 0.005)
    lt = cfg.get("light_source")
    assert (lt.esc.omega, lt.esc.c, lt.esc.a_x0, lt.esc.lambda_x, lt.esc.h1, lt.gekf.R) == \
        (30.0, 1.0, 0.027, 0.005, 1.5, 100.0)
    assert "moving_source" in cfg.scenarios


def test_list_command(capsys):
    assert run("list") == 0
    assert "sim_known_objective" in capsys.readouterr().out


# -- compare ------------------------------------------------------------------

def test_self_compare_zero_deltas(cfg_file, tmp_path):
    assert run("compare", "a", "a", "--config", cfg_file, "--out", tmp_path) == 0
    d = json.loads((tmp_path / "compare_a_a.json").read_text())["deltas"]
    for k in ("convergence_time", "path_length", "path_length_to_entry", "final_distance", "attenuation_ratio"):
        assert d[k] in (0.0, None), k


def test_compare_mismatched_rejected_before_running(cfg_file, tmp_path, monkeypatch):
    calls = []
    monkeypatch.setattr(cli, "run_scenario", lambda *a, **k: calls.append(1))
    assert run("compare", "a", "elsewhere", "--config", cfg_file, "--out", tmp_path) == cli.EXIT_CONFIG
    assert not calls and not list(tmp_path.glob("compare_*"))


def test_compare_gekf_vs_baseline(cfg_file, tmp_path):
    assert run("compare", "a", "a_base", "--config", cfg_file, "--out", tmp_path) == 0
    res = json.loads((tmp_path / "compare_a_a_base.json").read_text())
    assert set(res) >= {"a", "b", "deltas"}
    assert res["a"]["metrics"] is not None and res["b"]["metrics"] is not None


# -- bound check --------------------------------------------------------------

def test_bound_check_rejects_baseline(cfg_file, tmp_path, capsys):
    assert run("bound-check", "a_base", "--config", cfg_file, "--out", tmp_path) == cli.EXIT_CONFIG
    assert "bound check requires GEKF variant" in capsys.readouterr().err


def test_bound_check_constant_J_unsatisfied(cfg_file, tmp_path):
    cfg = parse_config(cfg_file)
    code = cli.cmd_bound_check(cfg, "a", tmp_path, j_hook=lambda t, J: (0.5, 0.5))
    assert code == 0
    rep = json.loads((tmp_path / "bound_a.json").read_text())
    assert rep["J_x"]["satisfied"] is False and rep["J_y"]["satisfied"] is False
    assert rep["satisfied"] is False
    assert len(rep["bound_curve"]["t"]) == len(rep["bound_curve"]["J_x_abs"]) <= cli.BOUND_CURVE_POINTS


def test_bound_check_decaying_J_satisfied(cfg_file, tmp_path):
    cfg = parse_config(cfg_file)
    cli.cmd_bound_check(cfg, "a", tmp_path, j_hook=lambda t, J: (min(0.1, t ** -3), -min(0.1, t ** -3)))
    rep = json.loads((tmp_path / "bound_a.json").read_text())
    assert rep["satisfied"] and rep["J_x"]["p"] > 1
    curve = rep["bound_curve"]
    assert np.allclose(curve["J_x_bound"], np.asarray(curve["t"]) ** -rep["J_x"]["p"])


# -- sweep --------------------------------------------------------------------

def test_sweep_omega(cfg_file, tmp_path):
    assert run("sweep", "a", "--param", "omega", "--values", 30, 60, "--config", cfg_file,
               "--out", tmp_path) == 0
    res = json.loads((tmp_path / "sweep_a_omega.json").read_text())
    assert [r["value"] for r in res["runs"]] == [30.0, 60.0]
    assert all(r["status"] == "ok" for r in res["runs"])


def test_sweep_rejects_invalid_value(cfg_file, tmp_path):
    assert run("sweep", "a", "--param", "omega", "--values", -1, "--config", cfg_file,
               "--out", tmp_path) == cli.EXIT_CONFIG
