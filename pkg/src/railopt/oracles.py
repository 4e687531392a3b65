"""Independent verification oracles for the solver/adjoint/optimizer stack.

Everything here checks the main build from the outside: finite differences
use only forward solves and cost evaluations, the closed-form oscillator is
derived analytically, and the transpose probe pairs tangent and adjoint
sweeps on random data.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adjoint import adjoint_solve, adjoint_sweep, gradient_control, gradient_shape
from .forward import (
    ControlSignal,
    NewtonDivergenceError,
    TimeGrid,
    Trajectory,
    evaluate_cost,
    forward_solve,
    tangent_linear_solve,
)
from .model import ConfigError, DiscreteModel, ModelConfig, ShapeParams, StateVector
from .optimize import AdmissibleSets, OptimConfig, relax_control

THREADS_ENV = "RAILOPT_THREADS"


def max_workers() -> int:
    """Concurrency cap for independent oracle evaluations."""
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return os.cpu_count() or 1


def _map_ordered(fn, items):
    """Apply fn over items, optionally in parallel; results keep input order."""
    workers = max_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class GradCheckReport:
    relative_errors: np.ndarray  # one entry per probed direction
    epsilon: float
    worst_error: float
    passed: bool

    PASS_THRESHOLD = 1e-5


@dataclass(frozen=True)
class SweepResult:
    grid_values: list[np.ndarray]  # one array per swept parameter
    costs: np.ndarray  # J at each grid point (nan where the solve failed)
    argmin_index: tuple[int, ...]
    failures: list[tuple[int, ...]]


def _cost_of(model, u_samples, r, x0, norm_bound):
    u = ControlSignal(u_samples, norm_bound)
    traj = forward_solve(model, u, r, x0)
    return evaluate_cost(model, traj)


def fd_gradient(
    model: DiscreteModel,
    u: ControlSignal,
    r: ShapeParams,
    x0: StateVector,
    eps: float = 1e-5,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate central differences of the discrete cost.

    Each probe re-solves the full forward problem, so this is O(K + m)
    solves; use fd_directional for large grids.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ConfigError("fd epsilon must lie in [1e-7, 1e-3]")
    base = u.samples

    def probe_u(k):
        plus = base.copy()
        plus[k] += eps
        minus = base.copy()
        minus[k] -= eps
        jp = _cost_of(model, plus, r, x0, u.norm_bound)
        jm = _cost_of(model, minus, r, x0, u.norm_bound)
        return (jp - jm) / (2.0 * eps)

    def probe_r(k):
        vp = r.values.copy()
        vp[k] += eps
        vm = r.values.copy()
        vm[k] -= eps
        jp = _cost_of(model, base, r.with_values(vp), x0, u.norm_bound)
        jm = _cost_of(model, base, r.with_values(vm), x0, u.norm_bound)
        return (jp - jm) / (2.0 * eps)

    grad_u = np.array(_map_ordered(probe_u, list(range(base.shape[0]))))
    grad_r = np.array(_map_ordered(probe_r, list(range(r.n_params))))
    return grad_u, grad_r


def fd_directional(
    model: DiscreteModel,
    u: ControlSignal,
    r: ShapeParams,
    x0: StateVector,
    du: np.ndarray,
    dr: np.ndarray,
    eps: float = 1e-5,
) -> float:
    """Central difference of J along a joint (du, dr) direction."""
    jp = _cost_of(model, u.samples + eps * du, r.with_values(r.values + eps * dr), x0, u.norm_bound)
    jm = _cost_of(model, u.samples - eps * du, r.with_values(r.values - eps * dr), x0, u.norm_bound)
    return (jp - jm) / (2.0 * eps)


def grad_check(
    model: DiscreteModel,
    u: ControlSignal,
    r: ShapeParams,
    x0: StateVector,
    n_directions: int = 10,
    eps: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """Compare adjoint directional derivatives against central differences.

    Probe directions are unit vectors, so each error is reported relative to
    the norm of the assembled gradient; a direction that happens to be nearly
    orthogonal to the gradient then cannot inflate the report with the
    quotient noise of two tiny numbers.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ConfigError("fd epsilon must lie in [1e-7, 1e-3]")
    traj = forward_solve(model, u, r, x0)
    adj = adjoint_solve(model, traj)
    grad_u = gradient_control(model, traj, adj)
    grad_r = gradient_shape(model, traj, adj, r, u)
    grad_norm = float(np.sqrt(np.dot(grad_u, grad_u) + np.dot(grad_r, grad_r)))

    rng = np.random.default_rng(seed)
    directions = []
    for _ in range(n_directions):
        du = rng.standard_normal(u.samples.shape[0])
        dr = rng.standard_normal(r.n_params)
        scale = np.sqrt(np.dot(du, du) + np.dot(dr, dr))
        directions.append((du / scale, dr / scale))

    def probe(direction):
        du, dr = direction
        fd = fd_directional(model, u, r, x0, du, dr, eps)
        adj_dir = float(np.dot(grad_u, du) + np.dot(grad_r, dr))
        denom = max(grad_norm, abs(fd), 1e-300)
        return abs(adj_dir - fd) / denom

    errors = np.array(_map_ordered(probe, directions))
    worst = float(errors.max()) if errors.size else 0.0
    return GradCheckReport(
        relative_errors=errors,
        epsilon=eps,
        worst_error=worst,
        passed=worst <= GradCheckReport.PASS_THRESHOLD,
    )


def analytic_linear_solution(config: ModelConfig, q0: float, v0: float):
    """Closed-form single-mode solution of the linear (alpha = 0) beam.

    Returns a callable t -> (q(t), v(t)) for the damped oscillator with
    omega^2 = pi^4 + 1 and 2 zeta omega = cd pi^4 + mu; all three damping
    branches are handled.
    """
    if config.alpha != 0.0:
        raise ConfigError("closed form requires alpha = 0")
    if config.n_modes != 1:
        raise ConfigError("closed form requires a single mode")
    lam = np.pi**4
    omega_sq = lam + 1.0
    a = (config.cd * lam + config.mu) / 2.0
    disc = a * a - omega_sq

    if abs(disc) < 1e-12 * omega_sq:
        c = v0 + a * q0

        def solution(t):
            t = np.asarray(t, dtype=float)
            decay = np.exp(-a * t)
            return decay * (q0 + c * t), decay * (v0 - a * c * t)

    elif disc < 0:
        wd = np.sqrt(-disc)
        b = (v0 + a * q0) / wd
        vs = -(a * v0 + omega_sq * q0) / wd

        def solution(t):
            t = np.asarray(t, dtype=float)
            decay = np.exp(-a * t)
            cos, sin = np.cos(wd * t), np.sin(wd * t)
            return decay * (q0 * cos + b * sin), decay * (v0 * cos + vs * sin)

    else:
        wh = np.sqrt(disc)
        b = (v0 + a * q0) / wh
        vs = -(a * v0 + omega_sq * q0) / wh

        def solution(t):
            t = np.asarray(t, dtype=float)
            decay = np.exp(-a * t)
            cosh, sinh = np.cosh(wh * t), np.sinh(wh * t)
            return decay * (q0 * cosh + b * sinh), decay * (v0 * cosh + vs * sinh)

    return solution


def sweep_shape(
    model: DiscreteModel,
    sets: AdmissibleSets,
    x0: StateVector,
    param_indices: list[int],
    grid_sizes: list[int],
    r_base: ShapeParams,
    u_init: ControlSignal | None = None,
    opt_config: OptimConfig | None = None,
    inner_grad_tol: float = 1e-4,
    inner_max_iters: int = 200,
) -> SweepResult:
    """Brute-force cost landscape over 1 or 2 shape parameters.

    At every grid point the control is fully relaxed with the optimizer's
    inner loop; every relaxation starts from the same initial control so the
    result is independent of evaluation order.
    """
    if len(param_indices) not in (1, 2) or len(param_indices) != len(grid_sizes):
        raise ConfigError("sweep takes 1 or 2 parameter indices with grid sizes")
    cfg = opt_config or OptimConfig()
    grid_values = [
        np.linspace(sets.shape_box[i, 0], sets.shape_box[i, 1], g)
        for i, g in zip(param_indices, grid_sizes)
    ]
    grid = TimeGrid.build(model.config.tau, model.config.dt)
    if u_init is None:
        u_init = ControlSignal.zeros(grid, sets.control_ball_radius)

    shape = tuple(grid_sizes)
    indices = list(np.ndindex(shape))

    def evaluate(index):
        values = r_base.values.copy()
        for axis, pi in enumerate(param_indices):
            values[pi] = grid_values[axis][index[axis]]
        r = r_base.with_values(values)
        try:
            _, _, cost, _, status = relax_control(
                model, sets, cfg, x0, u_init, r,
                grad_tol=inner_grad_tol, max_iters=inner_max_iters,
            )
        except NewtonDivergenceError:
            return np.nan
        if status == "solver-failure":
            return np.nan
        return cost

    costs = np.array(_map_ordered(evaluate, indices)).reshape(shape)
    failures = [idx for idx in indices if not np.isfinite(costs[idx])]
    masked = np.where(np.isfinite(costs), costs, np.inf)
    argmin = tuple(int(i) for i in np.unravel_index(np.argmin(masked), shape))
    return SweepResult(
        grid_values=grid_values,
        costs=costs,
        argmin_index=argmin,
        failures=failures,
    )


def duality_probe(
    model: DiscreteModel, traj: Trajectory, trials: int = 20, seed: int = 0
) -> float:
    """Max relative violation of the tangent/adjoint transpose identity.

    For random forcing g and cost forcing s, <s, h(g)> must equal the
    pairing of the adjoint sweep p(s) with the step-averaged forcing.
    """
    rng = np.random.default_rng(seed)
    k_steps = traj.grid.n_steps
    n2 = traj.states.shape[1]
    half = traj.grid.dt / 2.0
    worst = 0.0
    for _ in range(trials):
        g = rng.standard_normal((k_steps + 1, n2))
        s = rng.standard_normal((k_steps + 1, n2))
        h = tangent_linear_solve(model, traj, g)
        p = adjoint_sweep(model, traj, s).costates
        lhs = float(np.sum(s * h))
        rhs = float(np.sum(p[:k_steps] * (half * (g[:k_steps] + g[1:]))))
        scale = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst
