"""Config parsing, artifact emission, exit codes, reproducibility."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

import railopt.cli as cli
from railopt import parse_config
from railopt.model import ConfigError
from railopt.oracles import GradCheckReport

FAST_MODEL = {
    "alpha": 1.0,
    "mu": 0.3,
    "cd": 0.01,
    "gamma": 0.1,
    "tau": 0.2,
    "n_modes": 3,
    "dt": 2e-3,
}


def write_config(tmp_path, name="run.json", **overrides):
    doc = {
        "model": dict(FAST_MODEL),
        "shape": {
            "family": "gaussian-bump",
            "values": [0.35, 0.1],
            "bounds": [[0.1, 0.9], [0.05, 0.3]],
        },
        "optimizer": {"max_iters": 200, "grad_tol": 1e-5},
        "initial_condition": {"modal": [1.0], "modal_velocity": [0.0]},
        "output_dir": str(tmp_path / "out"),
    }
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_minimal_config_defaults(tmp_path):
    path = tmp_path / "minimal.json"
    path.write_text(json.dumps({"model": {}}))
    cfg = parse_config(path)
    assert cfg.model.n_modes == 16
    assert cfg.model.n_quad == 64
    assert cfg.model.dt == 1e-3
    assert cfg.model.gamma == 0.1
    assert cfg.shape.family == "gaussian-bump"
    assert cfg.norm_bound == 10.0
    assert cfg.control_initial == {"type": "zeros"}
    assert cfg.optimizer.mode == "joint"


def test_unknown_key_rejected_by_name(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": {"gama": 1.0}}))
    with pytest.raises(ConfigError, match="'gama'"):
        parse_config(path)
    path.write_text(json.dumps({"model": {}, "shapes": {}}))
    with pytest.raises(ConfigError, match="'shapes'"):
        parse_config(path)


def test_invalid_values_name_the_invariant(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": {"gamma": 0.0}}))
    with pytest.raises(ConfigError, match="gamma must be positive"):
        parse_config(path)


def test_malformed_json_reports_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"model": {,}}')
    with pytest.raises(ConfigError, match="line 1"):
        parse_config(path)


def test_control_initial_variants(tmp_path):
    path = write_config(tmp_path, control={"norm_bound": 5.0, "initial": {"type": "constant", "value": 0.25}})
    cfg = parse_config(path)
    import railopt as ro

    grid = ro.TimeGrid.build(cfg.model.tau, cfg.model.dt)
    u = cfg.initial_control(grid)
    assert np.all(u.samples == 0.25)
    assert u.norm_bound == 5.0
    path = write_config(tmp_path, control={"initial": {"type": "teleport"}})
    with pytest.raises(ConfigError, match="zeros"):
        parse_config(path)


def test_simulate_zero_state_emits_exact_zeros(tmp_path):
    path = write_config(tmp_path, initial_condition={"modal": [0.0], "modal_velocity": [0.0]})
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,q_1,q_2,q_3,v_1,v_2,v_3"
    for line in lines[1:]:
        assert line.split(",")[1:] == ["0.0"] * 6
    summary = json.loads((out / "summary.json").read_text())
    assert summary["J_final"] == 0.0


def test_csv_floats_round_trip(tmp_path):
    path = write_config(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    import railopt as ro

    cfg = parse_config(path)
    model = cfg.build()
    grid = ro.TimeGrid.build(cfg.model.tau, cfg.model.dt)
    traj = ro.forward_solve(
        model, cfg.initial_control(grid), cfg.shape, cfg.initial_state(model)
    )
    rows = (out / "trajectory.csv").read_text().splitlines()[1:]
    parsed = np.array([[float(v) for v in row.split(",")] for row in rows])
    assert np.array_equal(parsed[:, 1:], traj.states)  # bitwise, not approx
    assert np.array_equal(parsed[:, 0], grid.times)


def test_lf_line_endings_and_atomicity(tmp_path):
    path = write_config(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    raw = (out / "trajectory.csv").read_bytes()
    assert b"\r" not in raw
    assert not [p for p in out.iterdir() if p.suffix == ".tmp"]


def test_optimize_emits_monotone_history(tmp_path):
    path = write_config(tmp_path)
    out = tmp_path / "opt"
    assert cli.main(["optimize", "--config", str(path), "--out", str(out)]) == 0
    lines = (out / "history.csv").read_text().splitlines()
    assert lines[0] == "iter,J,control_stationarity,shape_stationarity,step"
    costs = [float(line.split(",")[1]) for line in lines[1:]]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    summary = json.loads((out / "summary.json").read_text())
    assert summary["J_final"] <= summary["J_initial"]
    assert summary["status"] == "converged"
    for name in summary["artifacts"]:
        assert (out / name).exists()


def test_config_echo_round_trip(tmp_path):
    path = write_config(tmp_path)
    out1 = tmp_path / "a"
    assert cli.main(["simulate", "--config", str(path), "--out", str(out1)]) == 0
    echo = json.loads((out1 / "summary.json").read_text())["config"]
    echo_path = tmp_path / "echo.json"
    echo_path.write_text(json.dumps(echo))
    out2 = tmp_path / "b"
    assert cli.main(["simulate", "--config", str(echo_path), "--out", str(out2)]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()


def test_physical_flag_emits_grid_trajectory(tmp_path):
    path = write_config(tmp_path)
    out = tmp_path / "phys"
    assert cli.main(["simulate", "--config", str(path), "--out", str(out), "--physical"]) == 0
    lines = (out / "trajectory_physical.csv").read_text().splitlines()
    cfg = parse_config(path)
    assert len(lines[0].split(",")) == 1 + 4 * cfg.model.n_modes - 1


def test_gradcheck_success_and_artifacts(tmp_path):
    path = write_config(tmp_path, gradcheck={"epsilon": 1e-5, "n_directions": 4, "seed": 0})
    out = tmp_path / "gc"
    assert cli.main(["gradcheck", "--config", str(path), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["worst_relative_error"] < 1e-5
    assert len((out / "gradcheck.csv").read_text().splitlines()) == 5


def test_gradcheck_failure_exit_code(tmp_path, monkeypatch):
    failing = GradCheckReport(
        relative_errors=np.array([1.0]), epsilon=1e-5, worst_error=1.0, passed=False
    )
    monkeypatch.setattr(cli, "grad_check", lambda *a, **k: failing)
    path = write_config(tmp_path)
    assert cli.main(["gradcheck", "--config", str(path), "--out", str(tmp_path / "gc")]) == 4


def test_config_error_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": {"gamma": -1.0}}))
    assert cli.main(["simulate", "--config", str(path)]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2


def test_solver_divergence_exit_code(tmp_path):
    path = write_config(
        tmp_path,
        model={"alpha": 1e8, "mu": 0.0, "cd": 0.0, "gamma": 0.1, "tau": 1.0, "n_modes": 2, "dt": 0.1},
        initial_condition={"modal": [10.0], "modal_velocity": [0.0]},
    )
    assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "x")]) == 3


def test_sweep_artifacts(tmp_path):
    path = write_config(
        tmp_path,
        sweep={"params": [0], "grid_sizes": [5], "inner_grad_tol": 1e-3, "inner_max_iters": 60},
    )
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(path), "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "param_0,J"
    assert len(lines) == 6
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failures"] == []
    assert 0 <= summary["argmin_index"][0] < 5


def test_repeated_runs_bitwise_identical(tmp_path, monkeypatch):
    path = write_config(tmp_path)
    outs = []
    for threads, name in (("1", "r1"), ("4", "r2")):
        monkeypatch.setenv("RAILOPT_THREADS", threads)
        out = tmp_path / name
        assert cli.main(["optimize", "--config", str(path), "--out", str(out)]) == 0
        outs.append(out)
    for name in ("trajectory.csv", "control.csv", "history.csv", "shape.csv", "summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
