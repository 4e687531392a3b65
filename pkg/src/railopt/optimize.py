"""Projected-gradient minimization of the cost over control and shape.

Armijo backtracking on the merit J with projections applied before every
evaluation, so all iterates are feasible and accepted steps strictly
decrease the cost.  The control direction uses the Riesz representation of
the gradient in the discrete L2 metric, which is the metric defining the
control ball.  After each accepted step the next trial length is set from
the one-dimensional quadratic model fitted to the observed decrease, which
keeps the backtracking loop short without using any gradient history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import (
    KKTResidual,
    adjoint_solve,
    gradient_control,
    gradient_shape,
    kkt_residuals,
    riesz_control_gradient,
)
from .forward import (
    ControlSignal,
    NewtonDivergenceError,
    TimeGrid,
    Trajectory,
    evaluate_cost,
    forward_solve,
)
from .model import ConfigError, DiscreteModel, ShapeParams, StateVector

MIN_STEP = 1e-14
MAX_STEP = 1e8
# bounds on the per-iteration growth of the trial step
GROW_MIN, GROW_MAX = 0.5, 4.0


@dataclass(frozen=True)
class AdmissibleSets:
    control_ball_radius: float
    shape_box: np.ndarray  # (m, 2)

    def __post_init__(self):
        object.__setattr__(self, "shape_box", np.asarray(self.shape_box, dtype=float))
        if self.control_ball_radius <= 0:
            raise ConfigError("control ball radius must be positive")
        if np.any(self.shape_box[:, 0] >= self.shape_box[:, 1]):
            raise ConfigError("shape box intervals must satisfy lo < hi")


@dataclass(frozen=True)
class OptimConfig:
    max_iters: int = 500
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    mode: str = "joint"

    def __post_init__(self):
        if not 0.0 < self.armijo_c < 1.0:
            raise ConfigError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ConfigError("backtrack_factor must lie in (0, 1)")
        if self.initial_step <= 0:
            raise ConfigError("initial_step must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.mode not in ("joint", "alternating"):
            raise ConfigError("mode must be 'joint' or 'alternating'")


@dataclass
class IterateRecord:
    iteration: int
    cost: float
    control_stationarity: float
    shape_stationarity: float
    step_size: float


@dataclass
class OptimResult:
    u_opt: ControlSignal
    r_opt: ShapeParams
    J_opt: float
    kkt: KKTResidual
    iterate_log: list[IterateRecord]
    status: str  # converged | max-iters | solver-failure
    trajectory: Trajectory


def project_control(
    u: ControlSignal, grid: TimeGrid, r1: float | None = None
) -> ControlSignal:
    """Radial projection onto the discrete L2 ball of radius R1."""
    radius = u.norm_bound if r1 is None else r1
    norm = u.norm(grid)
    if norm <= radius:
        return u
    return ControlSignal(u.samples * (radius / norm), radius)


def project_shape_values(values: np.ndarray, box: np.ndarray) -> np.ndarray:
    """Componentwise clamp of raw parameter values onto the box."""
    box = np.asarray(box, dtype=float)
    return np.clip(values, box[:, 0], box[:, 1])


def project_shape(r: ShapeParams, box: np.ndarray) -> ShapeParams:
    """Componentwise clamp onto the parameter box."""
    return r.with_values(project_shape_values(r.values, box))


def _evaluate(model, u, r, x0):
    traj = forward_solve(model, u, r, x0)
    return traj, evaluate_cost(model, traj)


class _Loop:
    """State shared by the projected-gradient phases of one optimize() call."""

    def __init__(self, model, sets, cfg, x0, u, r, traj, cost):
        self.model = model
        self.sets = sets
        self.cfg = cfg
        self.x0 = x0
        self.grid = traj.grid
        self.u = u
        self.r = r
        self.traj = traj
        self.cost = cost
        self.kkt: KKTResidual | None = None
        self.log: list[IterateRecord] = []
        self.iteration = 0
        self.status = "max-iters"

    def _search(self, grad_u, grad_r, step, move_control, move_shape):
        """Backtracking along the projected arc.

        Returns the next trial step on acceptance, "stalled" when no step
        length can decrease the cost (numerical stationarity), or
        "diverged" when rejected trial solves drove the step below MIN_STEP.
        """
        cfg, sets, grid = self.cfg, self.sets, self.grid
        direction_u = riesz_control_gradient(grad_u, grid.weights)
        saw_divergence = False
        while step >= MIN_STEP:
            u_t = (
                project_control(
                    ControlSignal(self.u.samples - step * direction_u, self.u.norm_bound),
                    grid,
                )
                if move_control
                else self.u
            )
            r_t = (
                self.r.with_values(
                    project_shape_values(self.r.values - step * grad_r, sets.shape_box)
                )
                if move_shape
                else self.r
            )
            predicted = 0.0
            if move_control:
                predicted += float(np.dot(grad_u, u_t.samples - self.u.samples))
            if move_shape:
                predicted += float(np.dot(grad_r, r_t.values - self.r.values))
            if predicted >= 0.0:
                # the projected arc cannot decrease at this length
                if predicted == 0.0:
                    return "stalled"
                step *= cfg.backtrack_factor
                continue
            try:
                traj_t, cost_t = _evaluate(self.model, u_t, r_t, self.x0)
            except NewtonDivergenceError:
                saw_divergence = True
                step *= cfg.backtrack_factor
                continue
            if cost_t <= self.cost + cfg.armijo_c * predicted:
                actual = cost_t - self.cost
                curvature = 2.0 * (actual - predicted)
                if curvature > 0.0:
                    growth = min(max(-predicted / curvature, GROW_MIN), GROW_MAX)
                else:
                    growth = 1.0 / cfg.backtrack_factor
                next_step = min(max(step * growth, MIN_STEP), MAX_STEP)
                self.u, self.r, self.traj, self.cost = u_t, r_t, traj_t, cost_t
                return next_step
            step *= cfg.backtrack_factor
        return "diverged" if saw_divergence else "stalled"

    def run(self, max_iters, grad_tol, step, move_control=True, move_shape=True,
            control_tol_only=False):
        """Projected-gradient iterations; returns (final trial step, status)."""
        done = 0
        while True:
            adj = adjoint_solve(self.model, self.traj)
            self.kkt = kkt_residuals(self.model, self.u, self.r, self.traj, adj, self.sets)
            self.log.append(
                IterateRecord(
                    self.iteration,
                    self.cost,
                    self.kkt.control_stationarity,
                    self.kkt.shape_stationarity,
                    step,
                )
            )
            converged = self.kkt.control_stationarity < grad_tol and (
                control_tol_only or self.kkt.shape_stationarity < grad_tol
            )
            if converged:
                return step, "converged"
            if done >= max_iters:
                return step, "max-iters"
            grad_u = gradient_control(self.model, self.traj, adj)
            grad_r = gradient_shape(self.model, self.traj, adj, self.r, self.u)
            next_step = self._search(grad_u, grad_r, step, move_control, move_shape)
            if next_step == "diverged":
                return step, "solver-failure"
            if next_step == "stalled":
                # no step length decreases the cost: at the numerical floor
                return step, "max-iters"
            step = next_step
            self.iteration += 1
            done += 1


def relax_control(model, sets, cfg, x0, u, r, grad_tol=None, max_iters=None):
    """Minimize over the control only, holding the shape fixed.

    This is the inner loop of the alternating mode; the sweep oracle reuses
    it to fully relax u at each grid point.
    """
    grid = TimeGrid.build(model.config.tau, model.config.dt)
    u = project_control(u, grid, sets.control_ball_radius)
    traj, cost = _evaluate(model, u, r, x0)
    loop = _Loop(model, sets, cfg, x0, u, r, traj, cost)
    tol = cfg.grad_tol if grad_tol is None else grad_tol
    iters = cfg.max_iters if max_iters is None else max_iters
    _, status = loop.run(
        iters, tol, cfg.initial_step, move_shape=False, control_tol_only=True
    )
    return loop.u, loop.traj, loop.cost, loop.kkt, status


def optimize(
    model: DiscreteModel,
    sets: AdmissibleSets,
    opt_config: OptimConfig,
    x0: StateVector,
    u_init: ControlSignal,
    r_init: ShapeParams,
) -> OptimResult:
    """Projected-gradient minimization of J over (u, r) in U_ad x K_ad."""
    grid = TimeGrid.build(model.config.tau, model.config.dt)
    u = project_control(
        ControlSignal(u_init.samples, sets.control_ball_radius), grid
    )
    r = project_shape(r_init, sets.shape_box)
    traj, cost = _evaluate(model, u, r, x0)
    loop = _Loop(model, sets, opt_config, x0, u, r, traj, cost)
    tol = opt_config.grad_tol

    if opt_config.mode == "joint":
        _, status = loop.run(opt_config.max_iters, tol, opt_config.initial_step)
    else:
        # alternate: fully relax the control, then take one shape step
        u_step = r_step = opt_config.initial_step
        status = "max-iters"
        while loop.iteration < opt_config.max_iters:
            budget = opt_config.max_iters - loop.iteration
            u_step, inner = loop.run(
                budget, tol, u_step, move_shape=False, control_tol_only=True
            )
            if inner != "converged":
                status = inner
                break
            if loop.kkt.shape_stationarity < tol:
                status = "converged"
                break
            r_step, outer = loop.run(1, tol, r_step, move_control=False)
            if outer == "converged":
                status = "converged"
                break
            if outer == "solver-failure":
                status = "solver-failure"
                break

    # collapse repeated log entries produced at phase boundaries
    dedup: list[IterateRecord] = []
    for rec in loop.log:
        if dedup and rec.iteration == dedup[-1].iteration:
            dedup[-1] = rec
        else:
            dedup.append(rec)
    for i, rec in enumerate(dedup):
        rec.iteration = i

    return OptimResult(
        u_opt=loop.u,
        r_opt=loop.r,
        J_opt=loop.cost,
        kkt=loop.kkt,
        iterate_log=dedup,
        status=status,
        trajectory=loop.traj,
    )
