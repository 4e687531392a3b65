"""Strict JSON run configuration: parsing, defaults, validation.

A run config is one JSON document with a mandatory "model" block and
optional "shape", "control", "optimizer", "initial_condition", "gradcheck",
"sweep" and "output_dir" entries.  Parsing is strict: unknown keys are
rejected at every level with the offending key named, and all values are
validated through the same dataclass invariants the library enforces.

Defaults (applied per missing field):
  model:              alpha=1, mu=0.1, cd=0.001, gamma=0.1, tau=1,
                      n_modes=16, n_quad=4*n_modes (64), dt=1e-3
  shape:              family=gaussian-bump, values=[0.5, 0.1],
                      bounds=[[0.1, 0.9], [0.05, 0.3]]
  control:            norm_bound=10, initial={"type": "zeros"}
  optimizer:          OptimConfig defaults (joint mode, grad_tol=1e-6)
  initial_condition:  modal=[1, 0, ...], modal_velocity=[0, ...]
  output_dir:         "out"
  gradcheck:          epsilon=1e-5, n_directions=10, seed=0
  sweep:              params=[0], grid_sizes=[33],
                      inner_grad_tol=1e-4, inner_max_iters=200
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forward import ControlSignal, TimeGrid
from .model import (
    ConfigError,
    DiscreteModel,
    ModelConfig,
    ShapeParams,
    StateVector,
    build_model,
    state_from_physical,
)
from .optimize import AdmissibleSets, OptimConfig

DEFAULT_SHAPE_VALUES = (0.5, 0.1)
DEFAULT_SHAPE_BOUNDS = ((0.1, 0.9), (0.05, 0.3))
DEFAULT_NORM_BOUND = 10.0


@dataclass(frozen=True)
class GradCheckOptions:
    epsilon: float = 1e-5
    n_directions: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 1e-7 <= self.epsilon <= 1e-3:
            raise ConfigError("gradcheck epsilon must lie in [1e-7, 1e-3]")
        if self.n_directions < 1:
            raise ConfigError("gradcheck n_directions must be at least 1")


@dataclass(frozen=True)
class SweepOptions:
    params: tuple[int, ...] = (0,)
    grid_sizes: tuple[int, ...] = (33,)
    inner_grad_tol: float = 1e-4
    inner_max_iters: int = 200

    def __post_init__(self):
        if len(self.params) not in (1, 2) or len(self.params) != len(self.grid_sizes):
            raise ConfigError("sweep takes 1 or 2 parameter indices with grid sizes")
        if any(g < 2 for g in self.grid_sizes):
            raise ConfigError("sweep grid sizes must be at least 2")
        if self.inner_grad_tol <= 0:
            raise ConfigError("sweep inner_grad_tol must be positive")
        if self.inner_max_iters < 1:
            raise ConfigError("sweep inner_max_iters must be at least 1")


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description with all defaults materialized."""

    model: ModelConfig
    shape: ShapeParams
    norm_bound: float
    control_initial: dict
    optimizer: OptimConfig
    initial_condition: dict
    output_dir: Path
    gradcheck: GradCheckOptions
    sweep: SweepOptions
    echo: dict = field(repr=False)

    def build(self) -> DiscreteModel:
        return build_model(self.model)

    def admissible_sets(self) -> AdmissibleSets:
        return AdmissibleSets(self.norm_bound, self.shape.bounds)

    def initial_state(self, model: DiscreteModel) -> StateVector:
        spec = self.initial_condition
        if "file" in spec:
            data = _read_csv_columns(Path(spec["file"]), 3, "initial-condition")
            if data.shape[0] != model.n_quad - 1:
                raise ConfigError(
                    "initial-condition file must sample the quadrature grid "
                    f"({model.n_quad - 1} rows)"
                )
            return state_from_physical(model, data[:, 1], data[:, 2])
        n = model.n_modes
        q = _padded(spec["modal"], n, "initial_condition.modal")
        v = _padded(spec["modal_velocity"], n, "initial_condition.modal_velocity")
        return StateVector(q, v)

    def initial_control(self, grid: TimeGrid) -> ControlSignal:
        spec = self.control_initial
        kind = spec["type"]
        if kind == "zeros":
            return ControlSignal.zeros(grid, self.norm_bound)
        if kind == "constant":
            samples = np.full(grid.n_steps + 1, float(spec["value"]))
            return ControlSignal(samples, self.norm_bound)
        data = _read_csv_columns(Path(spec["path"]), 2, "control")
        if data.shape[0] != grid.n_steps + 1:
            raise ConfigError(
                f"control file must provide {grid.n_steps + 1} samples, "
                f"got {data.shape[0]}"
            )
        return ControlSignal(data[:, 1], self.norm_bound)


def _padded(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] > n:
        raise ConfigError(f"{name} must be a list of at most n_modes values")
    out = np.zeros(n)
    out[: arr.shape[0]] = arr
    return out


def _read_csv_columns(path: Path, n_cols: int, what: str) -> np.ndarray:
    if not path.exists():
        raise ConfigError(f"{what} file not found: {path}")
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ConfigError(f"{what} file is empty: {path}")
    rows = [line.split(",") for line in lines[1:] if line]
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ConfigError(f"{what} file {path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != n_cols:
        raise ConfigError(f"{what} file {path} must have {n_cols} columns")
    return data


def _require_mapping(block, name: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"config block {name!r} must be a JSON object")
    return block


def _take(block: dict, name: str, allowed: dict) -> dict:
    """Apply defaults and reject unknown keys, naming the first offender."""
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in config block {name!r}")
    merged = dict(allowed)
    merged.update(block)
    return merged


_MODEL_DEFAULTS = {
    "alpha": 1.0,
    "mu": 0.1,
    "cd": 0.001,
    "gamma": 0.1,
    "tau": 1.0,
    "n_modes": 16,
    "n_quad": None,
    "dt": 1e-3,
}

_OPTIMIZER_DEFAULTS = {
    "max_iters": 500,
    "grad_tol": 1e-6,
    "armijo_c": 1e-4,
    "backtrack_factor": 0.5,
    "initial_step": 1.0,
    "mode": "joint",
}

_TOP_LEVEL = (
    "model",
    "shape",
    "control",
    "optimizer",
    "initial_condition",
    "output_dir",
    "gradcheck",
    "sweep",
)


def _parse_control(block: dict) -> tuple[float, dict]:
    merged = _take(block, "control", {"norm_bound": DEFAULT_NORM_BOUND, "initial": {"type": "zeros"}})
    norm_bound = float(merged["norm_bound"])
    if norm_bound <= 0:
        raise ConfigError("control norm_bound must be positive")
    initial = _require_mapping(merged["initial"], "control.initial")
    kind = initial.get("type")
    if kind == "zeros":
        initial = _take(initial, "control.initial", {"type": "zeros"})
    elif kind == "constant":
        if "value" not in initial:
            raise ConfigError("control.initial of type 'constant' needs a 'value'")
        initial = _take(initial, "control.initial", {"type": "constant", "value": 0.0})
    elif kind == "file":
        if "path" not in initial:
            raise ConfigError("control.initial of type 'file' needs a 'path'")
        initial = _take(initial, "control.initial", {"type": "file", "path": ""})
    else:
        raise ConfigError(
            "control.initial type must be one of 'zeros', 'constant', 'file'"
        )
    return norm_bound, initial


def _parse_initial_condition(block: dict, n_modes: int) -> dict:
    if "file" in block:
        return _take(block, "initial_condition", {"file": ""})
    defaults = {"modal": [1.0], "modal_velocity": [0.0]}
    merged = _take(block, "initial_condition", defaults)
    # validate lengths and values now so errors surface at parse time
    _padded(merged["modal"], n_modes, "initial_condition.modal")
    _padded(merged["modal_velocity"], n_modes, "initial_condition.modal_velocity")
    return merged


def parse_config(path: str | Path) -> RunConfig:
    """Load, default-fill and validate a JSON run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): "
            f"{exc.msg}"
        ) from None
    document = _require_mapping(document, "<top level>")
    for key in document:
        if key not in _TOP_LEVEL:
            raise ConfigError(f"unknown key {key!r} in config")
    if "model" not in document:
        raise ConfigError("config must contain a 'model' block")

    model_block = _take(
        _require_mapping(document["model"], "model"), "model", _MODEL_DEFAULTS
    )
    model = ModelConfig(
        alpha=float(model_block["alpha"]),
        mu=float(model_block["mu"]),
        cd=float(model_block["cd"]),
        gamma=float(model_block["gamma"]),
        tau=float(model_block["tau"]),
        n_modes=int(model_block["n_modes"]),
        n_quad=None if model_block["n_quad"] is None else int(model_block["n_quad"]),
        dt=float(model_block["dt"]),
    )

    shape_defaults = {
        "family": "gaussian-bump",
        "values": list(DEFAULT_SHAPE_VALUES),
        "bounds": [list(b) for b in DEFAULT_SHAPE_BOUNDS],
    }
    shape_block = _take(
        _require_mapping(document.get("shape", {}), "shape"), "shape", shape_defaults
    )
    shape = ShapeParams(
        shape_block["family"],
        np.asarray(shape_block["values"], dtype=float),
        np.asarray(shape_block["bounds"], dtype=float),
    )

    norm_bound, control_initial = _parse_control(
        _require_mapping(document.get("control", {}), "control")
    )

    opt_block = _take(
        _require_mapping(document.get("optimizer", {}), "optimizer"),
        "optimizer",
        _OPTIMIZER_DEFAULTS,
    )
    optimizer = OptimConfig(
        max_iters=int(opt_block["max_iters"]),
        grad_tol=float(opt_block["grad_tol"]),
        armijo_c=float(opt_block["armijo_c"]),
        backtrack_factor=float(opt_block["backtrack_factor"]),
        initial_step=float(opt_block["initial_step"]),
        mode=str(opt_block["mode"]),
    )

    initial_condition = _parse_initial_condition(
        _require_mapping(document.get("initial_condition", {}), "initial_condition"),
        model.n_modes,
    )

    gc_block = _take(
        _require_mapping(document.get("gradcheck", {}), "gradcheck"),
        "gradcheck",
        {"epsilon": 1e-5, "n_directions": 10, "seed": 0},
    )
    gradcheck = GradCheckOptions(
        epsilon=float(gc_block["epsilon"]),
        n_directions=int(gc_block["n_directions"]),
        seed=int(gc_block["seed"]),
    )

    sw_block = _take(
        _require_mapping(document.get("sweep", {}), "sweep"),
        "sweep",
        {"params": [0], "grid_sizes": [33], "inner_grad_tol": 1e-4, "inner_max_iters": 200},
    )
    sweep = SweepOptions(
        params=tuple(int(i) for i in sw_block["params"]),
        grid_sizes=tuple(int(g) for g in sw_block["grid_sizes"]),
        inner_grad_tol=float(sw_block["inner_grad_tol"]),
        inner_max_iters=int(sw_block["inner_max_iters"]),
    )
    for idx in sweep.params:
        if not 0 <= idx < shape.n_params:
            raise ConfigError(f"sweep parameter index {idx} out of range")

    output_dir = document.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir must be a non-empty string")

    echo = {
        "model": model_block,
        "shape": shape_block,
        "control": {"norm_bound": norm_bound, "initial": control_initial},
        "optimizer": opt_block,
        "initial_condition": initial_condition,
        "output_dir": output_dir,
        "gradcheck": gc_block,
        "sweep": sw_block,
    }
    return RunConfig(
        model=model,
        shape=shape,
        norm_bound=norm_bound,
        control_initial=control_initial,
        optimizer=optimizer,
        initial_condition=initial_condition,
        output_dir=Path(output_dir),
        gradcheck=gradcheck,
        sweep=sweep,
        echo=echo,
    )
