import json
import math
import os

import numpy.testing as npt

from se3opt.cli import main, run
from se3opt.reporting import trajectory_diagnostics, trajectory_from_csv
from se3opt.scenarios import load_config, preset_names, preset_path

MU = 4.0 * math.pi**2


def write_simulate_config(path, n_steps=50, h=1e-3, extra=""):
    path.write_text(f"""
kind = "simulate"
label = "test run"
seed = 0

[body]
mass = 1.0
dumbbell_length = 0.02
sphere_radius = 0.005

[gravity]
mu = {MU!r}

[integration]
h = {h!r}
n_steps = {n_steps}

[initial]
x = [1.0, 0.0, 0.0]
gamma = [0.0, {math.sqrt(MU)!r}, 0.0]
Pi = [0.0, 0.0, 5.5e-5]
{extra}
""")
    return path


def test_presets_ship_complete():
    assert set(preset_names()) >= {
        "simulate_orbit", "tpbvp_radius_double", "impulsive_radius_double",
        "smooth_inclination_60deg", "smooth_capture", "convergence_kepler",
    }
    for name in preset_names():
        load_config(preset_path(name))


def test_simulate_zero_steps_single_row(tmp_path):
    cfg = write_simulate_config(tmp_path / "sim.toml", n_steps=0)
    report = run(cfg, out_dir=tmp_path / "out", render_figures=False)
    assert report.converged
    lines = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 2  # header plus the initial state


def test_malformed_config_names_field(tmp_path, capsys):
    cfg = write_simulate_config(tmp_path / "bad.toml", h=-0.5)
    rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "integration.h" in err


def test_kind_mismatch_rejected(tmp_path, capsys):
    cfg = write_simulate_config(tmp_path / "sim.toml")
    rc = main(["smooth", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "kind" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "nope.toml")])
    assert rc == 1


def test_report_round_trip_from_csv(tmp_path):
    cfg = write_simulate_config(tmp_path / "sim.toml", n_steps=200)
    report = run(cfg, out_dir=tmp_path / "out", render_figures=False)
    scenario = load_config(cfg)
    traj = trajectory_from_csv(tmp_path / "out" / "trajectory.csv",
                               h=scenario.h)
    recomputed = trajectory_diagnostics(scenario.body, scenario.gravity, traj)
    for key, value in report.invariants.items():
        npt.assert_allclose(recomputed[key], value, rtol=1e-12, atol=1e-15)


def test_determinism_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        rc = main(["smooth", "--config", preset_path("smooth_capture"),
                   "--out", str(out), "--no-figures"])
        assert rc == 0
    for name in ("trajectory.csv", "report.json", "iterations.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_figures_rendered_and_suppressed(tmp_path):
    cfg = write_simulate_config(tmp_path / "sim.toml", n_steps=20)
    run(cfg, out_dir=tmp_path / "with")
    assert (tmp_path / "with" / "fig_trajectory.png").exists()
    assert (tmp_path / "with" / "fig_invariants.png").exists()
    run(cfg, out_dir=tmp_path / "without", render_figures=False)
    assert not (tmp_path / "without" / "fig_trajectory.png").exists()


def test_out_dir_env_override(tmp_path, monkeypatch):
    cfg = write_simulate_config(tmp_path / "sim.toml", n_steps=5)
    target = tmp_path / "env_out"
    monkeypatch.setenv("SE3OPT_OUT", str(target))
    rc = main(["simulate", "--config", str(cfg), "--no-figures"])
    assert rc == 0
    assert (target / "trajectory.csv").exists()


def test_report_schema_versioned(tmp_path):
    cfg = write_simulate_config(tmp_path / "sim.toml", n_steps=5)
    run(cfg, out_dir=tmp_path / "out", render_figures=False)
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["schema"] == 1
    assert rep["scenario"] == "simulate"
    assert "wall_time_s" not in rep  # reruns must be byte-identical


def test_tpbvp_preset_converges(tmp_path):
    report = run(preset_path("tpbvp_radius_double"),
                 out_dir=tmp_path / "out", render_figures=False)
    assert report.converged
    assert report.constraint_violation <= 1e-10
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["converged"] is True


def test_impulsive_preset_converges(tmp_path):
    report = run(preset_path("impulsive_radius_double"),
                 out_dir=tmp_path / "out", render_figures=False)
    assert report.converged
    assert report.constraint_violation <= 1e-10
    assert report.cost > 0


def test_convergence_preset_orders(tmp_path, capsys):
    report = run(preset_path("convergence_kepler"),
                 out_dir=tmp_path / "out", render_figures=False)
    fits = report.extra["fitted_order"]
    assert 1.8 <= fits["2"] <= 2.2
    assert 0.8 <= fits["1"] <= 1.2
    table = (tmp_path / "out" / "convergence_table.csv").read_text()
    assert table.startswith("h,error_order2,error_order1")
    assert len(table.splitlines()) == 4


def test_free_flow_flagged_exact(tmp_path):
    cfg_path = tmp_path / "conv.toml"
    cfg_path.write_text("""
kind = "convergence"
label = "free particle"

[body]
mass = 1.0
inertia = [1e-4, 1e-4, 1e-4]
rho = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]

[gravity]
mu = 0.0

[integration]
h = 0.01
n_steps = 10

[initial]
x = [0.0, 0.0, 0.0]
gamma = [1.0, 0.0, 0.0]

[convergence]
t_final = 0.4
h_values = [0.01, 0.005, 0.0025]
""")
    report = run(cfg_path, out_dir=tmp_path / "out", render_figures=False)
    assert report.extra["exact"] == {"2": True, "1": True}
