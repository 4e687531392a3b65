"""Command-line entry points and bit-exact artifact emission.

All numeric output uses Python's shortest round-trip float formatting, so
re-parsing an emitted file reproduces the binary values exactly and two
runs of the same config produce bitwise-identical artifacts.  Files are
written atomically (temp file + rename) with LF line endings.

Exit codes: 0 success, 2 config error, 3 solver divergence,
4 gradient-check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adjoint import adjoint_solve, kkt_residuals
from .config import RunConfig, parse_config
from .forward import NewtonDivergenceError, TimeGrid, Trajectory, evaluate_cost, forward_solve
from .model import ConfigError, DiscreteModel, ShapeBoundsError, eval_shape
from .optimize import OptimResult, optimize, project_control
from .oracles import grad_check, sweep_shape

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_GRADCHECK = 4


@dataclass
class RunSummary:
    """Deterministic run record; wall time is reported on stderr only."""

    command: str
    J_initial: float
    J_final: float
    kkt: dict
    iterations: int
    status: str
    config_echo: dict
    artifacts: list[str]
    extra: dict
    wall_time: float

    def payload(self) -> dict:
        # wall time is excluded so identical configs serialize identically
        out = {
            "command": self.command,
            "J_initial": self.J_initial,
            "J_final": self.J_final,
            "kkt": self.kkt,
            "iterations": self.iterations,
            "status": self.status,
            "artifacts": self.artifacts,
            "config": self.config_echo,
        }
        out.update(self.extra)
        return out


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    _write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def emit_trajectory(path: Path, model: DiscreteModel, traj: Trajectory) -> None:
    n = model.n_modes
    header = (
        ["t"]
        + [f"q_{i}" for i in range(1, n + 1)]
        + [f"v_{i}" for i in range(1, n + 1)]
    )
    rows = np.column_stack([traj.grid.times, traj.states])
    write_csv(path, header, rows)


def emit_trajectory_physical(path: Path, model: DiscreteModel, traj: Trajectory) -> None:
    header = ["t"] + [f"w_{j}" for j in range(1, model.n_quad)]
    displ = traj.states[:, : model.n_modes] @ model.sine_table
    write_csv(path, header, np.column_stack([traj.grid.times, displ]))


def emit_shape(path: Path, model: DiscreteModel, shape) -> None:
    samples = eval_shape(shape, model.quad_grid)
    write_csv(path, ["x", "b"], np.column_stack([model.quad_grid, samples]))


def emit_control(path: Path, traj: Trajectory) -> None:
    write_csv(path, ["t", "u"], np.column_stack([traj.grid.times, traj.control.samples]))


def emit_history(path: Path, result: OptimResult) -> None:
    rows = [
        (rec.iteration, rec.cost, rec.control_stationarity, rec.shape_stationarity, rec.step_size)
        for rec in result.iterate_log
    ]
    write_csv(path, ["iter", "J", "control_stationarity", "shape_stationarity", "step"], rows)


def _kkt_dict(kkt) -> dict:
    return {
        "control_stationarity": kkt.control_stationarity,
        "shape_stationarity": kkt.shape_stationarity,
        "collinearity": kkt.collinearity,
    }


def _finish(cfg: RunConfig, out_dir: Path, summary: RunSummary) -> RunSummary:
    summary.artifacts.append("summary.json")
    write_json(out_dir / "summary.json", summary.payload())
    print(
        f"{summary.command}: {summary.status}, J = {_fmt(summary.J_final)}, "
        f"wall time {summary.wall_time:.2f}s",
        file=sys.stderr,
    )
    return summary


def run_simulate(cfg: RunConfig, out_dir: Path, physical: bool = False) -> RunSummary:
    t0 = time.perf_counter()
    model = cfg.build()
    grid = TimeGrid.build(cfg.model.tau, cfg.model.dt)
    u = cfg.initial_control(grid)
    x0 = cfg.initial_state(model)
    traj = forward_solve(model, u, cfg.shape, x0)
    cost = evaluate_cost(model, traj)
    kkt = kkt_residuals(model, u, cfg.shape, traj, adjoint_solve(model, traj), cfg.admissible_sets())

    artifacts = ["trajectory.csv", "shape.csv", "control.csv"]
    emit_trajectory(out_dir / "trajectory.csv", model, traj)
    emit_shape(out_dir / "shape.csv", model, cfg.shape)
    emit_control(out_dir / "control.csv", traj)
    if physical:
        emit_trajectory_physical(out_dir / "trajectory_physical.csv", model, traj)
        artifacts.append("trajectory_physical.csv")

    summary = RunSummary(
        command="simulate",
        J_initial=cost,
        J_final=cost,
        kkt=_kkt_dict(kkt),
        iterations=grid.n_steps,
        status="ok",
        config_echo=cfg.echo,
        artifacts=artifacts,
        extra={"shape_values": [float(v) for v in cfg.shape.values]},
        wall_time=time.perf_counter() - t0,
    )
    return _finish(cfg, out_dir, summary)


def run_optimize(cfg: RunConfig, out_dir: Path, physical: bool = False) -> RunSummary:
    t0 = time.perf_counter()
    model = cfg.build()
    grid = TimeGrid.build(cfg.model.tau, cfg.model.dt)
    u_init = cfg.initial_control(grid)
    x0 = cfg.initial_state(model)
    sets = cfg.admissible_sets()

    traj0 = forward_solve(model, project_control(u_init, grid, sets.control_ball_radius), cfg.shape, x0)
    j_initial = evaluate_cost(model, traj0)
    result = optimize(model, sets, cfg.optimizer, x0, u_init, cfg.shape)
    if result.status == "solver-failure":
        raise NewtonDivergenceError(-1, float("nan"))

    artifacts = ["trajectory.csv", "shape.csv", "control.csv", "history.csv"]
    emit_trajectory(out_dir / "trajectory.csv", model, result.trajectory)
    emit_shape(out_dir / "shape.csv", model, result.r_opt)
    emit_control(out_dir / "control.csv", result.trajectory)
    emit_history(out_dir / "history.csv", result)
    if physical:
        emit_trajectory_physical(out_dir / "trajectory_physical.csv", model, result.trajectory)
        artifacts.append("trajectory_physical.csv")

    summary = RunSummary(
        command="optimize",
        J_initial=j_initial,
        J_final=result.J_opt,
        kkt=_kkt_dict(result.kkt),
        iterations=len(result.iterate_log) - 1,
        status=result.status,
        config_echo=cfg.echo,
        artifacts=artifacts,
        extra={"shape_values": [float(v) for v in result.r_opt.values]},
        wall_time=time.perf_counter() - t0,
    )
    return _finish(cfg, out_dir, summary)


def run_gradcheck(cfg: RunConfig, out_dir: Path, physical: bool = False) -> RunSummary:
    t0 = time.perf_counter()
    model = cfg.build()
    grid = TimeGrid.build(cfg.model.tau, cfg.model.dt)
    u = cfg.initial_control(grid)
    x0 = cfg.initial_state(model)
    traj = forward_solve(model, u, cfg.shape, x0)
    cost = evaluate_cost(model, traj)
    report = grad_check(
        model,
        u,
        cfg.shape,
        x0,
        n_directions=cfg.gradcheck.n_directions,
        eps=cfg.gradcheck.epsilon,
        seed=cfg.gradcheck.seed,
    )

    rows = [(i, err) for i, err in enumerate(report.relative_errors)]
    write_csv(out_dir / "gradcheck.csv", ["direction", "relative_error"], rows)

    summary = RunSummary(
        command="gradcheck",
        J_initial=cost,
        J_final=cost,
        kkt=_kkt_dict(
            kkt_residuals(model, u, cfg.shape, traj, adjoint_solve(model, traj), cfg.admissible_sets())
        ),
        iterations=cfg.gradcheck.n_directions,
        status="pass" if report.passed else "fail",
        config_echo=cfg.echo,
        artifacts=["gradcheck.csv"],
        extra={
            "worst_relative_error": report.worst_error,
            "epsilon": report.epsilon,
            "passed": report.passed,
        },
        wall_time=time.perf_counter() - t0,
    )
    return _finish(cfg, out_dir, summary)


def run_sweep(cfg: RunConfig, out_dir: Path, physical: bool = False) -> RunSummary:
    t0 = time.perf_counter()
    model = cfg.build()
    grid = TimeGrid.build(cfg.model.tau, cfg.model.dt)
    u_init = cfg.initial_control(grid)
    x0 = cfg.initial_state(model)
    sets = cfg.admissible_sets()
    sw = cfg.sweep
    result = sweep_shape(
        model,
        sets,
        x0,
        list(sw.params),
        list(sw.grid_sizes),
        cfg.shape,
        u_init=u_init,
        opt_config=cfg.optimizer,
        inner_grad_tol=sw.inner_grad_tol,
        inner_max_iters=sw.inner_max_iters,
    )

    header = [f"param_{i}" for i in sw.params] + ["J"]
    rows = []
    for index in np.ndindex(*sw.grid_sizes):
        point = [result.grid_values[axis][i] for axis, i in enumerate(index)]
        rows.append(point + [result.costs[index]])
    write_csv(out_dir / "sweep.csv", header, rows)

    argmin_point = [
        float(result.grid_values[axis][i]) for axis, i in enumerate(result.argmin_index)
    ]
    finite = result.costs[np.isfinite(result.costs)]
    j_min = float(finite.min()) if finite.size else float("nan")
    j_max = float(finite.max()) if finite.size else float("nan")
    summary = RunSummary(
        command="sweep",
        J_initial=j_max,
        J_final=j_min,
        kkt={},
        iterations=int(np.prod(sw.grid_sizes)),
        status="ok" if not result.failures else "partial",
        config_echo=cfg.echo,
        artifacts=["sweep.csv"],
        extra={
            "argmin_index": [int(i) for i in result.argmin_index],
            "argmin_point": argmin_point,
            "failures": [list(map(int, idx)) for idx in result.failures],
        },
        wall_time=time.perf_counter() - t0,
    )
    return _finish(cfg, out_dir, summary)


_COMMANDS = {
    "simulate": run_simulate,
    "optimize": run_optimize,
    "gradcheck": run_gradcheck,
    "sweep": run_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railopt",
        description="Actuator shape and control co-optimization for a beam model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the JSON run config")
        cmd.add_argument("--out", default=None, help="output directory (overrides config)")
        cmd.add_argument(
            "--physical",
            action="store_true",
            help="also emit the trajectory sampled on the spatial grid",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        out_dir = Path(args.out) if args.out else cfg.output_dir
        summary = _COMMANDS[args.command](cfg, out_dir, physical=args.physical)
    except (ConfigError, ShapeBoundsError) as exc:
        print(f"railopt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NewtonDivergenceError as exc:
        print(f"railopt: solver divergence: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.command == "gradcheck" and summary.status != "pass":
        print("railopt: gradient check failed", file=sys.stderr)
        return EXIT_GRADCHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
