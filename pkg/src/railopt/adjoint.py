"""Discrete adjoint of the trapezoidal forward scheme and exact gradients.

The backward sweep is the algebraic transpose of the linearized discrete
forward map (discretize-then-optimize), so the assembled gradients match
finite differences of the discrete cost to truncation error of the probe.

Costate indexing: costates[k] multiplies the step constraint from t_k to
t_{k+1} for k = 0..K-1, and costates[K] = 0 is the terminal condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ControlSignal, Trajectory, state_jacobian
from .model import (
    DiscreteModel,
    ShapeParams,
    shape_modal_jacobian_matrix,
    shape_modal_load,
)


@dataclass(frozen=True)
class AdjointTrajectory:
    """Costate history p_k, components dual to (q, v); p_K = 0."""

    costates: np.ndarray  # (K+1, 2N)

    def velocity_component(self, n_modes: int) -> np.ndarray:
        """The part of each costate dual to the velocity block."""
        return self.costates[:, n_modes:]


@dataclass(frozen=True)
class Gradient:
    grad_u: np.ndarray  # (K+1,)
    grad_r: np.ndarray  # (m,)


@dataclass(frozen=True)
class KKTResidual:
    control_stationarity: float
    shape_stationarity: float
    collinearity: float


def adjoint_sweep(
    model: DiscreteModel, traj: Trajectory, cost_forcing: np.ndarray
) -> AdjointTrajectory:
    """Backward transpose sweep for an arbitrary nodal cost forcing.

    Solves M_{k-1}^T p_{k-1} = A_k^T p_k + s_k downward from p_K = 0, where
    A_k = I + dt/2 G_x(x_k) and M_{k-1} = I - dt/2 G_x(x_k) are the two step
    matrices that reference node k.
    """
    k_steps = traj.grid.n_steps
    n2 = traj.states.shape[1]
    if cost_forcing.shape != (k_steps + 1, n2):
        raise ValueError("cost forcing must have shape (K+1, 2N)")
    half = traj.grid.dt / 2.0
    ident = np.eye(n2)
    p = np.zeros((k_steps + 1, n2))
    for k in range(k_steps, 0, -1):
        gx = state_jacobian(model, traj.states[k])
        rhs = (ident + half * gx).T @ p[k] + cost_forcing[k]
        p[k - 1] = np.linalg.solve((ident - half * gx).T, rhs)
    return AdjointTrajectory(costates=p)


def cost_state_forcing(model: DiscreteModel, traj: Trajectory) -> np.ndarray:
    """Derivative of the discrete state cost at each node: w_k * E x_k."""
    w = traj.grid.weights
    return traj.states * model.energy_weights * w[:, None]


def adjoint_solve(model: DiscreteModel, traj: Trajectory) -> AdjointTrajectory:
    """Adjoint sweep forced by the state part of the quadratic cost."""
    return adjoint_sweep(model, traj, cost_state_forcing(model, traj))


def control_costate_series(
    model: DiscreteModel, adj: AdjointTrajectory, b_modal: np.ndarray
) -> np.ndarray:
    """Pairing of the input direction with each costate: z_k = b . p_k,v."""
    return adj.velocity_component(model.n_modes) @ b_modal


def gradient_control(
    model: DiscreteModel, traj: Trajectory, adj: AdjointTrajectory
) -> np.ndarray:
    """Exact gradient of the discrete cost with respect to control samples."""
    w = traj.grid.weights
    half = traj.grid.dt / 2.0
    u = traj.control.samples
    b_modal = shape_modal_load(model, traj.shape)
    z = control_costate_series(model, adj, b_modal)
    z_shift = np.concatenate([[0.0], z[:-1]])  # z_{k-1}, with z_{-1} = 0
    return w * model.config.gamma * u + half * (z + z_shift)


def gradient_shape(
    model: DiscreteModel,
    traj: Trajectory,
    adj: AdjointTrajectory,
    r: ShapeParams,
    u: ControlSignal,
) -> np.ndarray:
    """Exact gradient with respect to the shape parameters.

    Discrete realization of the pairing of the costate with B'(r; e_k) u
    over time: each step contributes dt/2 (u_k + u_{k+1}) times the costate
    at its left node.
    """
    half = traj.grid.dt / 2.0
    us = u.samples
    k_steps = traj.grid.n_steps
    pv = adj.velocity_component(model.n_modes)[:k_steps]
    coeff = us[:k_steps] + us[1 : k_steps + 1]
    modal_pairing = coeff @ pv  # (N,)
    jac = shape_modal_jacobian_matrix(model, r)
    return half * (jac @ modal_pairing)


def riesz_control_gradient(grad_u: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Representation of the control gradient in the discrete L2 inner product."""
    return grad_u / weights


def discrete_adjoint_load(
    model: DiscreteModel, traj: Trajectory, adj: AdjointTrajectory, b_modal: np.ndarray
) -> np.ndarray:
    """Nodal time series of B*(r) p consistent with the discrete gradient.

    Averages the two costates adjacent to each node with the quadrature
    weights, so that an interior stationary control satisfies
    u = -(1/gamma) * series exactly.
    """
    w = traj.grid.weights
    half = traj.grid.dt / 2.0
    z = control_costate_series(model, adj, b_modal)
    z_shift = np.concatenate([[0.0], z[:-1]])
    return half * (z + z_shift) / w


def kkt_residuals(
    model: DiscreteModel,
    u: ControlSignal,
    r: ShapeParams,
    traj: Trajectory,
    adj: AdjointTrajectory,
    sets,
) -> KKTResidual:
    """Projected-gradient stationarity measures and the collinearity check.

    Stationarity in u is measured in the discrete L2 metric that defines the
    control ball, using the Riesz representation of the gradient; stationarity
    in r is the Euclidean norm of the projected parameter step.
    """
    from .optimize import project_control, project_shape_values

    w = traj.grid.weights
    grad_u = gradient_control(model, traj, adj)
    grad_r = gradient_shape(model, traj, adj, r, u)

    riesz = riesz_control_gradient(grad_u, w)
    u_step = project_control(
        ControlSignal(u.samples - riesz, sets.control_ball_radius), traj.grid
    ).samples
    control_stat = float(np.sqrt(np.dot(w, (u_step - u.samples) ** 2)))

    r_step = project_shape_values(r.values - grad_r, sets.shape_box)
    shape_stat = float(np.linalg.norm(r_step - r.values))

    b_modal = shape_modal_load(model, r)
    series = discrete_adjoint_load(model, traj, adj, b_modal)
    u_norm = np.sqrt(np.dot(w, u.samples**2))
    s_norm = np.sqrt(np.dot(w, series**2))
    if u_norm == 0.0 or s_norm == 0.0:
        coll = 0.0
    else:
        coll = float(np.dot(w, u.samples * series) / (u_norm * s_norm))
        coll = float(np.clip(coll, -1.0, 1.0))
    return KKTResidual(
        control_stationarity=control_stat,
        shape_stationarity=shape_stat,
        collinearity=coll,
    )
