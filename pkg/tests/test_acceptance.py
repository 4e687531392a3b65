"""Acceptance gate: one test per top-level criterion.

Each test prints a single PASS line with the measured quantities once its
assertions hold; a failed assertion is the corresponding FAIL.  Tolerances
and budgets are pinned here as constants.
"""

import json
import time

import numpy as np
import pytest

import railopt as ro
import railopt.cli as cli
from railopt.oracles import duality_probe

# criterion 1
GRAD_REL_TOL = 1e-5
DUALITY_TOL = 1e-12
GRAD_BUDGET_S = 120.0
# criterion 2
ORDER_RANGE = (1.9, 2.1)
ENDPOINT_TOL = 1e-5
# criterion 3
ALGEBRA_TOL = 1e-13
# criterion 4
STATIONARITY_TOL = 1e-6
COLLINEARITY_TOL = 1e-6
CENTER_TOL = 1e-3
SWEEP_POINTS = 33
BENCH_BUDGET_S = 300.0
# criterion 5
ENERGY_STEP_TOL = 1e-10
MIN_REDUCTION = 0.01
# criterion 6
SYMMETRY_TOL = 1e-10

BOUNDS = [[0.1, 0.9], [0.05, 0.3]]


def benchmark_model():
    return ro.build_model(
        ro.ModelConfig(
            alpha=1.0, mu=0.3, cd=0.01, gamma=0.1, tau=1.0, n_modes=6, dt=2e-3
        )
    )


@pytest.fixture(scope="module")
def benchmark_run():
    """Symmetric benchmark started at c = 0.3, shared by criteria 4 and 5."""
    model = benchmark_model()
    grid = ro.TimeGrid.build(1.0, 2e-3)
    sets = ro.AdmissibleSets(10.0, np.array(BOUNDS))
    x0 = ro.StateVector(np.eye(6)[0], np.zeros(6))  # w0 = sin(pi x), v0 = 0
    u0 = ro.ControlSignal.zeros(grid, 10.0)
    r0 = ro.ShapeParams("gaussian-bump", [0.3, 0.1], BOUNDS)
    t0 = time.perf_counter()
    result = ro.optimize(
        model,
        sets,
        ro.OptimConfig(max_iters=500, grad_tol=1e-7, mode="alternating"),
        x0,
        u0,
        r0,
    )
    return model, sets, x0, result, time.perf_counter() - t0


def test_criterion_1_gradient_exactness():
    t0 = time.perf_counter()
    worst_grad = 0.0
    worst_duality = 0.0
    for i in range(10):
        rng = np.random.default_rng(100 + i)
        n = 4 if i % 2 == 0 else 8
        alpha = 0.0 if i < 5 else 1.0
        cfg = ro.ModelConfig(
            alpha=alpha, mu=0.3, cd=0.01, gamma=0.1, tau=1.0, n_modes=n, dt=1e-3
        )
        model = ro.build_model(cfg)
        grid = ro.TimeGrid.build(1.0, 1e-3)
        r = ro.ShapeParams(
            "gaussian-bump", [rng.uniform(0.3, 0.7), rng.uniform(0.08, 0.2)], BOUNDS
        )
        u = ro.ControlSignal(0.3 * rng.standard_normal(grid.n_steps + 1), 10.0)
        x0 = ro.StateVector(
            0.3 * rng.standard_normal(n) / np.arange(1, n + 1) ** 2,
            0.1 * rng.standard_normal(n),
        )
        report = ro.grad_check(model, u, r, x0, n_directions=3, eps=1e-5, seed=i)
        worst_grad = max(worst_grad, report.worst_error)
        traj = ro.forward_solve(model, u, r, x0)
        worst_duality = max(worst_duality, duality_probe(model, traj, trials=2, seed=i))
    elapsed = time.perf_counter() - t0
    assert worst_grad <= GRAD_REL_TOL
    assert worst_duality <= DUALITY_TOL
    assert elapsed <= GRAD_BUDGET_S
    print(
        f"\nACCEPTANCE 1 PASS: gradient rel err {worst_grad:.2e} <= {GRAD_REL_TOL}, "
        f"duality {worst_duality:.2e} <= {DUALITY_TOL}, {elapsed:.1f}s"
    )


def test_criterion_2_linear_solution_convergence():
    shape = ro.ShapeParams("gaussian-bump", [0.5, 0.1], BOUNDS)
    errors = []
    for dt in (4e-3, 2e-3, 1e-3):
        cfg = ro.ModelConfig(alpha=0.0, mu=2.0, cd=0.05, tau=1.0, n_modes=1, dt=dt)
        model = ro.build_model(cfg)
        grid = ro.TimeGrid.build(1.0, dt)
        traj = ro.forward_solve(
            model, ro.ControlSignal.zeros(grid), shape, ro.StateVector([1.0], [0.5])
        )
        sol = ro.analytic_linear_solution(cfg, 1.0, 0.5)
        q_exact, _ = sol(grid.times[-1])
        errors.append(abs(traj.states[-1, 0] - float(q_exact)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= ORDER_RANGE[0]) and np.all(orders <= ORDER_RANGE[1])
    assert errors[-1] <= ENDPOINT_TOL
    print(
        f"\nACCEPTANCE 2 PASS: orders {orders.round(4).tolist()} in {ORDER_RANGE}, "
        f"endpoint error {errors[-1]:.2e} <= {ENDPOINT_TOL}"
    )


def test_criterion_3_modal_algebra_exactness():
    model = ro.build_model(ro.ModelConfig(n_modes=5))
    n = np.arange(1, 6)
    assert np.array_equal(model.stiffness, (n * np.pi) ** 4)

    freqs = np.arange(1, 16)
    table = np.sin(np.outer(freqs * np.pi, model.quad_grid))
    gram = (2.0 / model.n_quad) * table @ table.T
    ortho_err = np.max(np.abs(gram - np.eye(15)))
    assert ortho_err <= ALGEBRA_TOL

    q = np.zeros(5)
    q[0] = 1.0
    cubic = ro.nonlinear_term(model, q)
    expected = np.array([-0.75, 0.0, 0.25, 0.0, 0.0]) * model.config.alpha
    cubic_err = np.max(np.abs(cubic - expected))
    assert cubic_err <= ALGEBRA_TOL
    print(
        f"\nACCEPTANCE 3 PASS: eigenvalues exact, orthogonality {ortho_err:.2e}, "
        f"cubic projection {cubic_err:.2e} <= {ALGEBRA_TOL}"
    )


def test_criterion_4_optimality_conditions(benchmark_run):
    model, sets, x0, result, opt_seconds = benchmark_run
    t0 = time.perf_counter()
    assert result.status == "converged"
    kkt = result.kkt
    assert kkt.control_stationarity < STATIONARITY_TOL
    assert kkt.shape_stationarity < STATIONARITY_TOL
    assert abs(kkt.collinearity) > 1.0 - COLLINEARITY_TOL
    c_star = result.r_opt.values[0]
    assert sets.shape_box[0, 0] < c_star < sets.shape_box[0, 1]  # interior in c
    assert abs(c_star - 0.5) <= CENTER_TOL

    sweep = ro.sweep_shape(
        model, sets, x0, [0], [SWEEP_POINTS], result.r_opt,
        inner_grad_tol=1e-4, inner_max_iters=200,
    )
    assert not sweep.failures
    c_grid = sweep.grid_values[0]
    cell = c_grid[1] - c_grid[0]
    c_argmin = c_grid[sweep.argmin_index[0]]
    assert abs(c_argmin - c_star) <= cell + 1e-12
    elapsed = opt_seconds + time.perf_counter() - t0
    assert elapsed <= BENCH_BUDGET_S
    print(
        f"\nACCEPTANCE 4 PASS: stationarity ({kkt.control_stationarity:.1e}, "
        f"{kkt.shape_stationarity:.1e}) < {STATIONARITY_TOL}, "
        f"|collinearity| = {abs(kkt.collinearity):.12f}, c* = {c_star:.6f}, "
        f"sweep argmin {c_argmin:.4f} within one cell, {elapsed:.1f}s"
    )


def test_criterion_5_monotone_dissipation_and_descent(benchmark_run):
    shape = ro.ShapeParams("gaussian-bump", [0.5, 0.1], BOUNDS)
    worst_increase = -np.inf
    for seed in range(3):
        rng = np.random.default_rng(seed)
        model = ro.build_model(
            ro.ModelConfig(alpha=0.0, mu=0.2, cd=0.01, tau=1.0, n_modes=8, dt=1e-3)
        )
        grid = ro.TimeGrid.build(1.0, 1e-3)
        x0 = ro.StateVector(
            rng.standard_normal(8) / np.arange(1, 9) ** 2, rng.standard_normal(8)
        )
        traj = ro.forward_solve(model, ro.ControlSignal.zeros(grid), shape, x0)
        energy = (traj.states**2) @ model.energy_weights
        worst_increase = max(worst_increase, float(np.max(np.diff(energy))))
    assert worst_increase <= ENERGY_STEP_TOL

    _, _, _, result, _ = benchmark_run
    costs = [rec.cost for rec in result.iterate_log]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    reduction = (costs[0] - result.J_opt) / costs[0]
    assert reduction >= MIN_REDUCTION
    print(
        f"\nACCEPTANCE 5 PASS: max per-step energy increase {worst_increase:.2e} "
        f"<= {ENERGY_STEP_TOL}, J monotone over {len(costs)} iterates, "
        f"reduction {100 * reduction:.1f}% >= {100 * MIN_REDUCTION}%"
    )


def test_criterion_6_mirror_symmetry():
    cfg = ro.ModelConfig(
        alpha=1.0, mu=0.3, cd=0.01, gamma=0.1, tau=0.5, n_modes=5, dt=1e-3
    )
    model = ro.build_model(cfg)
    grid = ro.TimeGrid.build(0.5, 1e-3)
    rng = np.random.default_rng(9)
    u = ro.ControlSignal(np.sin(2 * np.pi * grid.times) + 0.3, 10.0)
    q0 = rng.standard_normal(5) / np.arange(1, 6) ** 2
    v0 = 0.3 * rng.standard_normal(5)
    signs = (-1.0) ** np.arange(5)  # sin(n pi (1-x)) = (-1)^(n+1) sin(n pi x)
    x0 = ro.StateVector(q0, v0)
    x0_m = ro.StateVector(signs * q0, signs * v0)
    r = ro.ShapeParams("gaussian-bump", [0.37, 0.11], BOUNDS)
    r_m = r.with_values([1.0 - 0.37, 0.11])

    traj = ro.forward_solve(model, u, r, x0)
    traj_m = ro.forward_solve(model, u, r_m, x0_m)
    j, j_m = ro.evaluate_cost(model, traj), ro.evaluate_cost(model, traj_m)
    j_dev = abs(j - j_m) / max(1.0, abs(j))
    assert j_dev <= SYMMETRY_TOL

    g = ro.gradient_shape(model, traj, ro.adjoint_solve(model, traj), r, u)
    g_m = ro.gradient_shape(model, traj_m, ro.adjoint_solve(model, traj_m), r_m, u)
    grad_dev = abs(g[0] + g_m[0])
    assert grad_dev <= SYMMETRY_TOL
    print(
        f"\nACCEPTANCE 6 PASS: |J - J_mirror| = {j_dev:.2e}, "
        f"|dJ/dc + dJ/dc_mirror| = {grad_dev:.2e} <= {SYMMETRY_TOL}"
    )


def test_criterion_7_bitwise_reproducibility(tmp_path, monkeypatch):
    config = {
        "model": {
            "alpha": 1.0, "mu": 0.3, "cd": 0.01, "gamma": 0.1,
            "tau": 0.25, "n_modes": 3, "dt": 2e-3,
        },
        "shape": {
            "family": "gaussian-bump",
            "values": [0.35, 0.1],
            "bounds": BOUNDS,
        },
        "optimizer": {"max_iters": 150, "grad_tol": 1e-5, "mode": "alternating"},
        "initial_condition": {"modal": [1.0], "modal_velocity": [0.0]},
        "sweep": {"params": [0], "grid_sizes": [7], "inner_grad_tol": 1e-3, "inner_max_iters": 60},
        "gradcheck": {"epsilon": 1e-5, "n_directions": 4, "seed": 0},
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))

    files = {}
    n_compared = 0
    for threads in ("1", "4"):
        monkeypatch.setenv("RAILOPT_THREADS", threads)
        for command in ("simulate", "optimize", "gradcheck", "sweep"):
            out = tmp_path / f"{command}-{threads}"
            assert cli.main([command, "--config", str(path), "--out", str(out)]) == 0
            for artifact in sorted(out.iterdir()):
                key = (command, artifact.name)
                data = artifact.read_bytes()
                if key in files:
                    assert data == files[key], f"{key} differs across runs"
                    n_compared += 1
                else:
                    files[key] = data
    assert n_compared >= 10
    print(
        f"\nACCEPTANCE 7 PASS: {n_compared} artifacts bitwise-identical across "
        f"RAILOPT_THREADS in {{1, 4}}"
    )
