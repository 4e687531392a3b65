"""Modal Galerkin discretization of the damped semilinear beam on (0, 1).

The beam is expanded in sin(n*pi*x) modes, which are eigenfunctions of the
biharmonic operator under hinged boundary conditions, so the stiffness and
damping operators are diagonal per mode.  The cubic foundation force is
projected through a uniform collocation grid with enough points (M >= 3N+1)
that the projection of w^3 is alias-free for band-limited states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

SHAPE_FAMILIES = ("gaussian-bump", "cosine-patch", "spline")

# fixed half-width of the cosine blend at the edges of a cosine-patch
PATCH_BLEND = 0.05

# minimum number of spline coefficients (cubic, clamped knot vector)
SPLINE_MIN_PARAMS = 4


class ConfigError(ValueError):
    """A configuration value violates a model invariant."""


class ShapeBoundsError(ValueError):
    """Shape parameter values fall outside their admissible box."""


@dataclass(frozen=True)
class ModelConfig:
    """Physical constants and discretization sizes.

    n_quad defaults to 4 * n_modes, which makes the interior collocation
    grid exactly orthogonal for all sine frequencies up to 3 * n_modes.
    """

    alpha: float = 1.0
    mu: float = 0.1
    cd: float = 0.001
    gamma: float = 0.1
    tau: float = 1.0
    n_modes: int = 16
    n_quad: int | None = None
    dt: float = 1e-3

    def __post_init__(self):
        if self.n_quad is None:
            object.__setattr__(self, "n_quad", 4 * self.n_modes)
        if self.n_modes < 1:
            raise ConfigError("n_modes must be at least 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.mu < 0:
            raise ConfigError("mu must be non-negative")
        if self.cd < 0:
            raise ConfigError("cd must be non-negative")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.dt >= self.tau:
            raise ConfigError("dt must be smaller than tau")
        if self.n_quad < 3 * self.n_modes + 1:
            raise ConfigError(
                "n_quad must be at least 3*n_modes + 1 to dealias the cubic term"
            )


@dataclass(frozen=True)
class ShapeParams:
    """Actuator design: family name, parameter values and their box bounds."""

    family: str
    values: np.ndarray
    bounds: np.ndarray  # (m, 2) closed intervals [lo, hi]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float))
        if self.family not in SHAPE_FAMILIES:
            raise ConfigError(f"unknown shape family {self.family!r}")
        m = self.values.shape[0]
        if self.bounds.shape != (m, 2):
            raise ConfigError("bounds must be an (m, 2) array of intervals")
        if self.family in ("gaussian-bump", "cosine-patch") and m != 2:
            raise ConfigError(f"{self.family} takes exactly 2 parameters")
        if self.family == "spline" and m < SPLINE_MIN_PARAMS:
            raise ConfigError(
                f"spline family needs at least {SPLINE_MIN_PARAMS} coefficients"
            )
        if np.any(self.bounds[:, 0] > self.bounds[:, 1]):
            raise ConfigError("each bound must satisfy lo <= hi")
        if self.family in ("gaussian-bump", "cosine-patch") and self.bounds[1, 0] <= 0:
            raise ConfigError("width parameter must have a positive lower bound")
        if np.any(self.values < self.bounds[:, 0]) or np.any(
            self.values > self.bounds[:, 1]
        ):
            raise ShapeBoundsError("shape parameters outside their bounds")

    @property
    def n_params(self) -> int:
        return self.values.shape[0]

    def with_values(self, values) -> "ShapeParams":
        return ShapeParams(self.family, np.asarray(values, dtype=float), self.bounds)


@dataclass(frozen=True)
class StateVector:
    """Modal displacement and velocity coefficients."""

    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.q.shape != self.v.shape or self.q.ndim != 1:
            raise ConfigError("q and v must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.v))):
            raise ConfigError("state contains non-finite entries")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.q, self.v])

    @classmethod
    def from_flat(cls, x: np.ndarray) -> "StateVector":
        n = x.shape[0] // 2
        return cls(x[:n], x[n:])

    @classmethod
    def zero(cls, n_modes: int) -> "StateVector":
        return cls(np.zeros(n_modes), np.zeros(n_modes))


@dataclass(frozen=True)
class DiscreteModel:
    """Assembled modal operators on the collocation grid."""

    stiffness: np.ndarray  # (n*pi)^4, n = 1..N
    quad_grid: np.ndarray  # x_j = j/M, j = 1..M-1
    sine_table: np.ndarray  # (N, M-1), sin(n*pi*x_j)
    energy_weights: np.ndarray  # (2N,), ((n*pi)^4+1)/2 then 1/2
    config: ModelConfig

    @property
    def n_modes(self) -> int:
        return self.config.n_modes

    @property
    def n_quad(self) -> int:
        return self.config.n_quad


def build_model(config: ModelConfig) -> DiscreteModel:
    """Assemble stiffness eigenvalues, collocation grid and energy weights."""
    n = np.arange(1, config.n_modes + 1)
    stiffness = (n * np.pi) ** 4
    m = config.n_quad
    grid = np.arange(1, m) / m
    sine_table = np.sin(np.outer(n * np.pi, grid))
    energy_weights = np.concatenate([(stiffness + 1.0) / 2.0, np.full(len(n), 0.5)])
    return DiscreteModel(
        stiffness=stiffness,
        quad_grid=grid,
        sine_table=sine_table,
        energy_weights=energy_weights,
        config=config,
    )


def _spline_design(n_params: int, x: np.ndarray) -> np.ndarray:
    """Values of the n_params clamped cubic B-spline basis functions at x."""
    degree = 3
    n_internal = n_params - degree - 1
    knots = np.concatenate(
        [np.zeros(degree), np.linspace(0.0, 1.0, n_internal + 2), np.ones(degree)]
    )
    basis = np.empty((n_params, x.shape[0]))
    for k in range(n_params):
        coeffs = np.zeros(n_params)
        coeffs[k] = 1.0
        basis[k] = BSpline(knots, coeffs, degree, extrapolate=False)(x)
    return np.nan_to_num(basis)


def eval_shape(r: ShapeParams, grid: np.ndarray) -> np.ndarray:
    """Sample the load profile b(x, r) at the given points."""
    x = np.asarray(grid, dtype=float)
    if r.family == "gaussian-bump":
        c, s = r.values
        return np.exp(-((x - c) ** 2) / (2.0 * s * s))
    if r.family == "cosine-patch":
        c, half = r.values
        d = np.abs(x - c)
        eps = PATCH_BLEND
        out = np.zeros_like(x)
        out[d <= half - eps] = 1.0
        blend = (d > half - eps) & (d < half + eps)
        out[blend] = 0.5 * (1.0 + np.cos(np.pi * (d[blend] - (half - eps)) / (2.0 * eps)))
        return out
    # spline
    return _spline_design(r.n_params, x).T @ r.values


def eval_shape_derivative(r: ShapeParams, grid: np.ndarray, direction) -> np.ndarray:
    """Directional derivative of b(x, r) with respect to r, sampled at grid."""
    x = np.asarray(grid, dtype=float)
    d = np.asarray(direction, dtype=float)
    if d.shape != r.values.shape:
        raise ConfigError("direction length must match the number of parameters")
    if r.family == "gaussian-bump":
        c, s = r.values
        b = np.exp(-((x - c) ** 2) / (2.0 * s * s))
        db_dc = b * (x - c) / (s * s)
        db_ds = b * (x - c) ** 2 / (s**3)
        return d[0] * db_dc + d[1] * db_ds
    if r.family == "cosine-patch":
        c, half = r.values
        eps = PATCH_BLEND
        dist = np.abs(x - c)
        u = dist - (half - eps)
        blend = (dist > half - eps) & (dist < half + eps)
        dg_du = np.zeros_like(x)
        dg_du[blend] = -np.pi / (4.0 * eps) * np.sin(np.pi * u[blend] / (2.0 * eps))
        ddist_dc = -np.sign(x - c)
        return d[0] * dg_du * ddist_dc + d[1] * (-dg_du)
    return _spline_design(r.n_params, x).T @ d


def modal_load_from_samples(model: DiscreteModel, samples: np.ndarray) -> np.ndarray:
    """Project grid samples of a load profile onto the sine modes.

    Trapezoid rule on the uniform grid; the endpoint contributions vanish
    because sin(n*pi*x) does at x = 0, 1.
    """
    return (2.0 / model.n_quad) * model.sine_table @ samples


def shape_modal_load(model: DiscreteModel, r: ShapeParams) -> np.ndarray:
    """Modal load coefficients b_n = 2 * integral of b(x, r) sin(n*pi*x)."""
    return modal_load_from_samples(model, eval_shape(r, model.quad_grid))


def shape_modal_jacobian(
    model: DiscreteModel, r: ShapeParams, direction
) -> np.ndarray:
    """Directional derivative of shape_modal_load with respect to r."""
    return modal_load_from_samples(
        model, eval_shape_derivative(r, model.quad_grid, direction)
    )


def shape_modal_jacobian_matrix(model: DiscreteModel, r: ShapeParams) -> np.ndarray:
    """All partial derivatives of the modal load, one row per parameter."""
    m = r.n_params
    rows = np.empty((m, model.n_modes))
    eye = np.eye(m)
    for k in range(m):
        rows[k] = shape_modal_jacobian(model, r, eye[k])
    return rows


def synthesize(model: DiscreteModel, q: np.ndarray) -> np.ndarray:
    """Evaluate w(x) = sum q_n sin(n*pi*x) on the collocation grid."""
    return model.sine_table.T @ q


def nonlinear_term(model: DiscreteModel, q: np.ndarray) -> np.ndarray:
    """Modal force of the cubic foundation, -alpha * w^3."""
    alpha = model.config.alpha
    if alpha == 0.0:
        return np.zeros(model.n_modes)
    w = synthesize(model, q)
    return -alpha * modal_load_from_samples(model, w**3)


def nonlinear_jacobian_apply(
    model: DiscreteModel, q: np.ndarray, dq: np.ndarray
) -> np.ndarray:
    """Action of the linearized cubic force: projection of -3 alpha w^2 dw."""
    alpha = model.config.alpha
    if alpha == 0.0:
        return np.zeros(model.n_modes)
    w = synthesize(model, q)
    dw = synthesize(model, dq)
    return -3.0 * alpha * modal_load_from_samples(model, w * w * dw)


def nonlinear_jacobian_matrix(model: DiscreteModel, q: np.ndarray) -> np.ndarray:
    """Dense N x N linearization of nonlinear_term at q."""
    alpha = model.config.alpha
    n = model.n_modes
    if alpha == 0.0:
        return np.zeros((n, n))
    w = synthesize(model, q)
    scaled = model.sine_table * (w * w)
    return (-6.0 * alpha / model.n_quad) * (scaled @ model.sine_table.T)


def energy_norm_sq(model: DiscreteModel, x: StateVector) -> float:
    """Squared state-space norm: integral of (w_xx)^2 + w^2 + v^2."""
    flat = x.flat()
    return float(np.dot(model.energy_weights, flat * flat))


def state_from_physical(
    model: DiscreteModel, w0_samples: np.ndarray, v0_samples: np.ndarray
) -> StateVector:
    """Project grid samples of (w0, v0) onto the first N modes."""
    w0 = np.asarray(w0_samples, dtype=float)
    v0 = np.asarray(v0_samples, dtype=float)
    if w0.shape != model.quad_grid.shape or v0.shape != model.quad_grid.shape:
        raise ConfigError(
            f"initial-condition samples must have length {model.n_quad - 1}"
        )
    return StateVector(
        modal_load_from_samples(model, w0), modal_load_from_samples(model, v0)
    )


def state_to_physical(model: DiscreteModel, x: StateVector) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (w, v) on the collocation grid from modal coefficients."""
    return synthesize(model, x.q), synthesize(model, x.v)
