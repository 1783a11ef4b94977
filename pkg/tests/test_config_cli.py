import json
import os

import numpy as np
import pytest

from occlp import cli, system
from occlp.cli import ReportBundle, emit_report, export_measure_csv, \
    export_trajectory_csv, main, run_study
from occlp.config import (ConfigError, StudyConfig, build_policy, build_system,
                          default_config_text, parse_config)
from occlp.grid import DiscreteMeasure, build_grid
from occlp.oracle import frozen_value
from occlp.simulate import ConstantPolicy, integrate

MINIMAL_ROTATION = """
[system]
name = rotation
"""

FROZEN_STUDY = """
seed = 0

[system]
name = frozen
cost = y1 + u1^2
lower = [0.0, 0.0]
upper = [1.0, 1.0]

[grid]
state_resolution = [2, 2]
control_resolution = 9

[basis]
degree = 4

[program]
variants = [ergodic, nonergodic, discounted, perturbed]
y0 = [0.25, 0.25]
discount_rates = [1.0]
epsilons = [0.0]

[simulate]
policy = constant:0.0
horizons = [2.0]
dt = 0.001
abel_rates = [1.0]
abel_horizon = 25.0
abel_dt = 0.001

[output]
formats = [json, csv-dir]
"""


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL_ROTATION)
    assert cfg.system.name == "rotation"
    assert cfg.basis.degree == 4
    assert cfg.grid.state_resolution == (5, 64)
    assert cfg.program.y0 == (1.0, 0.0)
    assert cfg.output.formats == ("json",)


def test_default_config_text_parses():
    cfg = parse_config(default_config_text())
    assert isinstance(cfg, StudyConfig)


@pytest.mark.parametrize("snippet,needle", [
    ("[system]\nname = rotation\n[program]\ny0 = [9.0, 0.0]\n", "y0"),
    ("[basis]\ndegree = 0\n", "max_degree must be >= 1"),
    ("[grid]\nwhatever = 1\n", "unknown key"),
    ("[nosuch]\nx = 1\n", "unknown section"),
    ("[basis]\ndegree = fast\n", "degree must be an integer"),
    ("[system]\nname = rotation\nname = frozen\n", "duplicate key"),
    ("[grid]\nstate_resolution = [5, 64\n", "unterminated array"),
    ("just some words\n", "expected 'key = value'"),
    ("[program]\nvariants = [ergodic, bogus]\n", "unknown program variant"),
    ("[output]\nformats = [yaml]\n", "unknown output format"),
])
def test_config_errors_name_the_problem(snippet, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(snippet)
    assert needle in str(err.value)


def test_config_errors_carry_line_numbers():
    text = "[system]\nname = rotation\n\n[basis]\ndegree = 0\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert "line 5" in str(err.value)


def test_build_policy_kinds():
    spec = system.make_rotation()
    p = build_policy("constant:0.5", spec, (1.0, 0.0))
    assert p.control(0.0, (1.0, 0.0)) == (0.5,)
    p = build_policy("steer_hold:1.0:3.0:0.0", spec, (1.0, 0.0))
    assert p.control(0.0, (1.0, 0.0)) == (1.0,)
    assert p.control(3.5, (1.0, 0.0)) == (0.0,)
    p = build_policy("schedule:0.0:0.1,2.0:0.4@4.0", spec, (1.0, 0.0))
    assert p.control(2.5, None) == (0.4,)
    assert p.control(4.5, None) == (0.1,)
    p = build_policy("rotation_delta:0.5", spec, (1.0, 0.0))
    assert p.control(0.0, (1.0, 0.0))[0] == pytest.approx(1.0)  # full speed at angle 0
    with pytest.raises(ConfigError):
        build_policy("warp:9", spec, (1.0, 0.0))
    with pytest.raises(ConfigError):
        build_policy("steer_hold:1.0", spec, (1.0, 0.0))
    with pytest.raises(ConfigError):
        build_policy("", spec, (1.0, 0.0))


def test_custom_system_from_config():
    cfg = parse_config("""
[system]
name = custom
region = box
lower = [-1.0]
upper = [1.0]
dynamics = [-y1 + u1]
cost = y1^2
[grid]
state_resolution = [5]
control_resolution = 5
[program]
y0 = [0.5]
""")
    spec = build_system(cfg.system)
    assert spec.dim_state == 1
    assert system.eval_dynamics(spec, (0.5,), (0.25,))[0] == pytest.approx(-0.25)
    assert spec.bound_f >= 2.0  # sampled bound with headroom


def test_frozen_study_all_variants_match_oracle(tmp_path):
    cfg = parse_config(FROZEN_STUDY)
    bundle = run_study(cfg, sections=("solve", "simulate"), jobs=1)
    assert bundle.all_passed()
    spec = build_system(cfg.system)
    reference = frozen_value(spec, (0.25, 0.25)).value
    for name in ("ergodic.value", "nonergodic.value",
                 "discounted[rate=1].value", "perturbed[eps=0].value"):
        assert bundle.values[name] == pytest.approx(reference, abs=1e-6)
    assert bundle.values["cesaro[T=2]"] == pytest.approx(reference, abs=1e-6)
    assert bundle.values["abel[rate=1]"] == pytest.approx(reference, abs=1e-6)
    checked = {entry["name"] for entry in bundle.invariants}
    assert "discounted_lp_below_abel[rate=1]" in checked
    assert "cesaro_above_dual_bound" in checked
    assert "w_residual_nonincreasing" in checked


def test_constant_cost_study_everything_equals_constant():
    cfg = parse_config("""
[system]
name = frozen
cost = 3
lower = [0.0, 0.0]
upper = [1.0, 1.0]
[grid]
state_resolution = [2, 2]
control_resolution = 3
[program]
variants = [ergodic, nonergodic, discounted, perturbed]
y0 = [0.25, 0.25]
discount_rates = [0.5]
epsilons = [0.0]
""")
    bundle = run_study(cfg, sections=("solve",))
    assert bundle.all_passed()
    for name in ("ergodic.value", "nonergodic.value",
                 "discounted[rate=0.5].value", "perturbed[eps=0].value"):
        assert bundle.values[name] == pytest.approx(3.0, abs=1e-7)


def test_report_round_trip_and_csv_layout(tmp_path):
    cfg = parse_config(FROZEN_STUDY)
    bundle = run_study(cfg, sections=("solve",))
    out = tmp_path / "report"
    written = emit_report(bundle, str(out), formats=("json", "csv-dir"))
    with open(out / "report.json") as fh:
        parsed = json.load(fh)
    assert parsed == json.loads(json.dumps(bundle.to_dict()))
    assert (out / "values.csv").exists()
    assert (out / "duals.csv").exists()
    assert (out / "measures").is_dir()
    # single-epsilon study produces no sweep tables, hence no sweeps directory
    assert not (out / "sweeps").exists()
    assert all(os.path.exists(p) for p in written)


def test_epsilon_sweep_csv(tmp_path):
    cfg = parse_config("""
[system]
name = rotation
[grid]
state_resolution = [3, 16]
control_resolution = 3
[program]
variants = [perturbed]
y0 = [1.0, 0.0]
epsilons = [0.1, 0.01, 0.001]
[output]
formats = [csv-dir]
""")
    bundle = run_study(cfg, sections=("solve",))
    out = tmp_path / "sweepy"
    emit_report(bundle, str(out), formats=("csv-dir",))
    path = out / "sweeps" / "epsilon_sweep.csv"
    assert path.exists()
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epsilon,value,monotone_nondecreasing_in_epsilon"
    assert len(lines) == 4  # header + one row per epsilon
    assert all(line.endswith("True") for line in lines[1:])


def test_reports_are_byte_identical(tmp_path):
    cfg = parse_config(FROZEN_STUDY)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    emit_report(run_study(cfg, sections=("solve",)), str(out1), ("json",))
    emit_report(run_study(cfg, sections=("solve",)), str(out2), ("json",))
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_worker_pool_does_not_change_results():
    cfg = parse_config(FROZEN_STUDY)
    serial = run_study(cfg, sections=("solve",), jobs=1)
    pooled = run_study(cfg, sections=("solve",), jobs=4)
    assert serial.values == pooled.values
    assert serial.invariants == pooled.invariants


def test_rotation_acceptance_config_study_passes():
    from pathlib import Path
    config_path = Path(__file__).parent.parent / "configs" / "rotation_acceptance.conf"
    cfg = parse_config(config_path.read_text())
    bundle = run_study(cfg, sections=("solve", "sweep"), jobs=2)
    assert bundle.all_passed()
    assert bundle.values["nonergodic.value"] == pytest.approx(-1.0, abs=0.05)
    assert bundle.values["ergodic.value"] == pytest.approx(-1.5, abs=0.05)
    assert bundle.values["nonergodic.mu"] == pytest.approx(
        bundle.values["nonergodic.value"], abs=1e-6)
    eps_rows = bundle.tables["epsilon_sweep"]["rows"]
    assert [row[0] for row in eps_rows] == sorted(cfg.program.epsilons)
    assert all(row[2] for row in eps_rows)


def test_interchange_exports(tmp_path):
    spec = system.make_frozen(lower=(0.0, 0.0), upper=(1.0, 1.0), cost_id="y1")
    traj = integrate(spec, (0.25, 0.75), ConstantPolicy(0.5), 0.05, 1e-2)
    tpath = tmp_path / "traj.csv"
    export_trajectory_csv(traj, str(tpath))
    lines = tpath.read_text().strip().splitlines()
    assert lines[0] == "t,y1,y2,u1,inY"
    assert len(lines) == len(traj.times) + 1

    g = build_grid(spec, 2, 3)
    w = np.zeros(g.atom_count)
    w[3] = 1.0
    mpath = tmp_path / "measure.csv"
    export_measure_csv(DiscreteMeasure(g, w), str(mpath))
    lines = mpath.read_text().strip().splitlines()
    assert lines[0] == "atom_index,y1,y2,u1,weight"
    assert len(lines) == 2


def test_cli_main_paths(tmp_path, capsys, monkeypatch):
    config_path = tmp_path / "study.conf"
    config_path.write_text(FROZEN_STUDY)
    out_dir = tmp_path / "out"
    assert main(["solve", "--config", str(config_path),
                 "--out", str(out_dir), "--jobs", "1"]) == 0
    assert (out_dir / "report.json").exists()

    assert main(["solve", "--config", str(tmp_path / "missing.conf")]) == 2

    bad = tmp_path / "bad.conf"
    bad.write_text("[basis]\ndegree = 0\n")
    assert main(["solve", "--config", str(bad)]) == 2
    assert "max_degree" in capsys.readouterr().err

    assert main(["--print-defaults", "solve"]) == 0
    assert "[system]" in capsys.readouterr().out


def test_cli_failure_exit_enumerates(tmp_path, capsys, monkeypatch):
    config_path = tmp_path / "study.conf"
    config_path.write_text(MINIMAL_ROTATION)

    def fake_run_study(config, sections, jobs):
        bundle = ReportBundle(config={}, environment={})
        bundle.record("demo_invariant", False, "synthetic failure")
        return bundle

    monkeypatch.setattr(cli, "run_study", fake_run_study)
    code = main(["solve", "--config", str(config_path), "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert "FAILED: demo_invariant" in err
