"""Implicit-trapezoid time integration of the modal beam system.

The 2N first-order system dx/dt = G(x, u) is advanced with the trapezoidal
rule, solving each step by Newton iteration with the analytic Jacobian.
The same linearized step matrices drive the tangent-linear solve, so the
tangent is the exact derivative of the discrete forward map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ConfigError,
    DiscreteModel,
    ShapeParams,
    StateVector,
    nonlinear_jacobian_matrix,
    nonlinear_term,
    shape_modal_load,
)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITERS = 20


class NewtonDivergenceError(RuntimeError):
    """Newton failed to drive a step residual below tolerance."""

    def __init__(self, step_index: int, residual: float):
        super().__init__(
            f"Newton did not converge at step {step_index}: "
            f"residual {residual:.3e} after {NEWTON_MAX_ITERS} iterations"
        )
        self.step_index = step_index
        self.residual = residual


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid; dt is adjusted so it divides tau exactly."""

    tau: float
    dt: float
    n_steps: int
    times: np.ndarray

    @classmethod
    def build(cls, tau: float, dt: float) -> "TimeGrid":
        if dt <= 0 or tau <= 0:
            raise ConfigError("tau and dt must be positive")
        k = max(1, round(tau / dt))
        dt_adj = tau / k
        return cls(tau=tau, dt=dt_adj, n_steps=k, times=np.arange(k + 1) * dt_adj)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights over the nodes."""
        w = np.full(self.n_steps + 1, self.dt)
        w[0] = w[-1] = self.dt / 2.0
        return w


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-linear control given by nodal samples on the time grid."""

    samples: np.ndarray
    norm_bound: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.norm_bound <= 0:
            raise ConfigError("control norm bound must be positive")

    def norm(self, grid: TimeGrid) -> float:
        """Discrete L2 norm with trapezoid weights."""
        return float(np.sqrt(np.dot(grid.weights, self.samples**2)))

    @classmethod
    def zeros(cls, grid: TimeGrid, norm_bound: float = 10.0) -> "ControlSignal":
        return cls(np.zeros(grid.n_steps + 1), norm_bound)


@dataclass(frozen=True)
class Trajectory:
    """State history of a forward solve; states[k] is (q, v) at t_k, flat."""

    states: np.ndarray  # (K+1, 2N)
    control: ControlSignal
    shape: ShapeParams | None
    grid: TimeGrid
    newton_iters: np.ndarray  # (K,)

    def state_at(self, k: int) -> StateVector:
        return StateVector.from_flat(self.states[k])


def drift_matrix(model: DiscreteModel) -> np.ndarray:
    """Constant part of the state Jacobian: d(q,v)/dt = L (q,v) + ..."""
    n = model.n_modes
    lam = model.stiffness
    cfg = model.config
    out = np.zeros((2 * n, 2 * n))
    out[:n, n:] = np.eye(n)
    out[n:, :n] = -np.diag(lam + 1.0)
    out[n:, n:] = -np.diag(lam * cfg.cd + cfg.mu)
    return out


def rhs(model: DiscreteModel, x: np.ndarray, u: float, b_modal: np.ndarray) -> np.ndarray:
    """G(x, u): modal velocities and accelerations."""
    n = model.n_modes
    q, v = x[:n], x[n:]
    lam = model.stiffness
    cfg = model.config
    acc = -lam * (q + cfg.cd * v) - q - cfg.mu * v + nonlinear_term(model, q) + b_modal * u
    return np.concatenate([v, acc])


def state_jacobian(model: DiscreteModel, x: np.ndarray) -> np.ndarray:
    """G_x at x: constant drift plus the cubic linearization block."""
    n = model.n_modes
    out = drift_matrix(model)
    if model.config.alpha != 0.0:
        out[n:, :n] += nonlinear_jacobian_matrix(model, x[:n])
    return out


class Stepper:
    """One trapezoidal step with Newton; reused across a whole solve."""

    def __init__(self, model: DiscreteModel, dt: float, b_modal: np.ndarray):
        self.model = model
        self.dt = dt
        self.b_modal = np.asarray(b_modal, dtype=float)
        n = model.n_modes
        self.n = n
        self.ident = np.eye(2 * n)
        self.lin = drift_matrix(model)
        self.m_lin = self.ident - (dt / 2.0) * self.lin

    def step(
        self, x_k: np.ndarray, u_k: float, u_k1: float, step_index: int = 0
    ) -> tuple[np.ndarray, int]:
        """Solve x_{k+1} = x_k + dt/2 (G(x_k,u_k) + G(x_{k+1},u_{k+1}))."""
        model, dt, n = self.model, self.dt, self.n
        half = dt / 2.0
        const = x_k + half * rhs(model, x_k, u_k, self.b_modal)
        x = x_k.copy()
        for it in range(NEWTON_MAX_ITERS + 1):
            res = x - const - half * rhs(model, x, u_k1, self.b_modal)
            res_norm = float(np.linalg.norm(res))
            if not np.isfinite(res_norm):
                raise NewtonDivergenceError(step_index, res_norm)
            if res_norm <= NEWTON_TOL:
                return x, it
            if it == NEWTON_MAX_ITERS:
                break
            if model.config.alpha != 0.0:
                jac = self.m_lin.copy()
                jac[n:, :n] -= half * nonlinear_jacobian_matrix(model, x[:n])
            else:
                jac = self.m_lin
            x = x - np.linalg.solve(jac, res)
        raise NewtonDivergenceError(step_index, res_norm)


def step(
    model: DiscreteModel,
    x_k: StateVector,
    u_k: float,
    u_k1: float,
    b_modal: np.ndarray,
) -> StateVector:
    """Single trapezoidal step from x_k with control values (u_k, u_{k+1})."""
    stepper = Stepper(model, model.config.dt, b_modal)
    x_next, _ = stepper.step(x_k.flat(), u_k, u_k1)
    return StateVector.from_flat(x_next)


def solve_with_modal_load(
    model: DiscreteModel,
    u: ControlSignal,
    b_modal: np.ndarray,
    x0: StateVector,
    shape: ShapeParams | None = None,
) -> Trajectory:
    """Forward solve with an explicitly supplied modal load vector."""
    cfg = model.config
    grid = TimeGrid.build(cfg.tau, cfg.dt)
    k_steps = grid.n_steps
    if u.samples.shape[0] != k_steps + 1:
        raise ConfigError(
            f"control needs {k_steps + 1} samples, got {u.samples.shape[0]}"
        )
    if x0.q.shape[0] != model.n_modes:
        raise ConfigError("initial condition does not match n_modes")
    stepper = Stepper(model, grid.dt, b_modal)
    states = np.empty((k_steps + 1, 2 * model.n_modes))
    states[0] = x0.flat()
    iters = np.empty(k_steps, dtype=int)
    us = u.samples
    for k in range(k_steps):
        states[k + 1], iters[k] = stepper.step(states[k], us[k], us[k + 1], k)
    return Trajectory(states=states, control=u, shape=shape, grid=grid, newton_iters=iters)


def forward_solve(
    model: DiscreteModel, u: ControlSignal, r: ShapeParams, x0: StateVector
) -> Trajectory:
    """Integrate the semilinear system over [0, tau]."""
    return solve_with_modal_load(model, u, shape_modal_load(model, r), x0, shape=r)


def evaluate_cost(model: DiscreteModel, traj: Trajectory) -> float:
    """Trapezoid discretization of J = 1/2 integral of ||x||^2 + gamma u^2."""
    w = traj.grid.weights
    ew = model.energy_weights
    state_sq = (traj.states**2) @ ew
    u = traj.control.samples
    return float(0.5 * np.dot(w, state_sq + model.config.gamma * u * u))


def tangent_linear_solve(
    model: DiscreteModel, traj: Trajectory, forcing: np.ndarray
) -> np.ndarray:
    """Sensitivity h(t) of the discrete solve to additive forcing g(t).

    forcing has shape (K+1, 2N), sampled at the nodes; each step applies the
    trapezoidal average of its endpoint values, mirroring how the control
    enters the forward scheme.  Returns h with shape (K+1, 2N), h[0] = 0.
    """
    k_steps = traj.grid.n_steps
    n2 = traj.states.shape[1]
    if forcing.shape != (k_steps + 1, n2):
        raise ConfigError("forcing must have shape (K+1, 2N)")
    dt = traj.grid.dt
    half = dt / 2.0
    ident = np.eye(n2)
    h = np.zeros((k_steps + 1, n2))
    gx_prev = state_jacobian(model, traj.states[0])
    for k in range(k_steps):
        gx_next = state_jacobian(model, traj.states[k + 1])
        a_mat = ident + half * gx_prev
        m_mat = ident - half * gx_next
        rhs_vec = a_mat @ h[k] + half * (forcing[k] + forcing[k + 1])
        h[k + 1] = np.linalg.solve(m_mat, rhs_vec)
        gx_prev = gx_next
    return h


def control_forcing(
    model: DiscreteModel, b_modal: np.ndarray, du: np.ndarray
) -> np.ndarray:
    """Forcing g_k = B du_k for a control perturbation du (nodal samples)."""
    n = model.n_modes
    out = np.zeros((du.shape[0], 2 * n))
    out[:, n:] = np.outer(du, b_modal)
    return out
