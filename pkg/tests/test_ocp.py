import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mspc.errors import DeltaTooSmall, DomainError, InfeasibleInitialState
from mspc.ident import STRUCTURE_FULL, ParameterEstimate, true_theta
from mspc.linalg import Rng, diag_repeat, sym_sqrt
from mspc.ocp import (
    InputBox,
    OcpSpec,
    build_nominal_qp_multistep,
    build_nominal_qp_statespace,
    build_robust_socp_multistep,
    build_tightening_table,
    formulate_minmax_statespace,
    gaussian_backoff,
    load_program,
    program_from_json,
    program_to_json,
    save_program,
    save_tightening_csv,
    tightening_constant_exact,
    tightening_constant_upper,
)
from mspc.solver import solve
from mspc.system import GaussianBelief, LinearSystem, build_multistep, random_system


def make_spec(sys, horizon=4, p=0.9, h_scale=0.4, u_lim=2.0, x0=None, sx0=0.01):
    n = sys.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    h_x = h_scale * np.eye(n)[:1]  # one row along the first coordinate
    return OcpSpec(
        horizon=horizon,
        Q=np.eye(n),
        R=0.5 * np.eye(sys.m),
        h_x=h_x,
        u_set=InputBox(lo=-u_lim * np.ones(sys.m), hi=u_lim * np.ones(sys.m)),
        p=p,
        init=GaussianBelief(mean=x0, cov=sx0 * np.eye(n)),
    )


def perfect_estimates(sys, horizon):
    """Estimates pinned at the true multi-step parameters with zero covariance."""
    model = build_multistep(sys, horizon)
    ests, gw = [], []
    for k in range(1, horizon + 1):
        g0, gu, gwk = model.step(k)
        theta = true_theta(g0, gu)
        ests.append(
            ParameterEstimate(
                k=k, structure=STRUCTURE_FULL, theta=theta,
                cov=np.zeros((theta.size, theta.size)), n=sys.n, m=sys.m,
            )
        )
        gw.append(gwk)
    return ests, gw


def test_gaussian_backoff_half_is_zero():
    assert gaussian_backoff(0.5) == 0.0


def test_gaussian_backoff_rejects_low_p():
    with pytest.raises(DomainError):
        gaussian_backoff(0.4)


def test_nominal_p_half_mean_only_rows():
    sys = random_system(2, 1, 1, 0.8, Rng(50), sigma_w=0.3, sigma_eps=0.0)
    spec = make_spec(sys, p=0.5)
    prog = build_nominal_qp_statespace(sys, spec)
    # The back-off multiplier vanishes at one half: rows bound the mean only,
    # and with x0 = 0 every state offset is exactly one.
    n_state_rows = spec.horizon * spec.n_rows
    assert np.all(prog.lin_b[:n_state_rows] == 1.0)


def test_nominal_unconstrained_matches_normal_equations():
    sys = LinearSystem(
        A=np.array([[0.8]]), B=np.array([[1.0]]), E=np.array([[1.0]]),
        sigma_w=np.array([[0.1]]), sigma_eps=np.zeros((1, 1)),
    )
    spec = OcpSpec(
        horizon=5,
        Q=np.array([[2.0]]),
        R=np.array([[0.3]]),
        h_x=np.zeros((0, 1)),
        u_set=None,
        p=0.9,
        init=GaussianBelief(mean=np.array([1.5]), cov=np.zeros((1, 1))),
    )
    prog = build_nominal_qp_statespace(sys, spec)
    sol = solve(prog)
    assert sol.status == "Optimal"
    # Oracle: stack the mean dynamics and solve the least-squares problem
    # min ||sqrt(Qbar)(Gu u + G0 x0)||^2 + ||sqrt(Rbar) u||^2 directly.
    model = build_multistep(sys, 5)
    gu = np.vstack([np.pad(model.step(k)[1], ((0, 0), (0, 5 - k))) for k in range(1, 6)])
    g0 = np.vstack([model.step(k)[0] for k in range(1, 6)])
    qbar = diag_repeat(spec.Q, 5)
    rbar = diag_repeat(spec.R, 5)
    lhs = gu.T @ qbar @ gu + rbar
    rhs = -gu.T @ qbar @ (g0 @ spec.init.mean)
    u_star = np.linalg.solve(lhs, rhs)
    assert_allclose(sol.primal, u_star, atol=1e-7)


def test_two_parametrizations_identical_program_data():
    sys = random_system(3, 2, 2, 0.9, Rng(51), sigma_w=0.2, sigma_eps=0.0)
    spec = OcpSpec(
        horizon=6,
        Q=np.eye(3),
        R=np.eye(2),
        h_x=0.25 * np.eye(3)[:2],
        u_set=InputBox(lo=-3 * np.ones(2), hi=3 * np.ones(2)),
        p=0.85,
        init=GaussianBelief(mean=0.1 * np.ones(3), cov=0.05 * np.eye(3)),
    )
    prog_ss = build_nominal_qp_statespace(sys, spec)
    prog_ms = build_nominal_qp_multistep(build_multistep(sys, 6), spec)
    for a, b in (
        (prog_ss.p_mat, prog_ms.p_mat),
        (prog_ss.q_vec, prog_ms.q_vec),
        (prog_ss.lin_a, prog_ms.lin_a),
        (prog_ss.lin_b, prog_ms.lin_b),
    ):
        scale = max(np.abs(a).max(initial=0.0), 1.0)
        assert np.abs(a - b).max(initial=0.0) <= 1e-12 * scale
    assert abs(prog_ss.constant - prog_ms.constant) <= 1e-12 * max(1.0, abs(prog_ss.constant))


def test_nominal_optimal_values_agree_across_routes():
    sys = random_system(3, 1, 2, 0.9, Rng(52), sigma_w=0.15, sigma_eps=0.0)
    spec = OcpSpec(
        horizon=8,
        Q=np.eye(3),
        R=np.array([[0.8]]),
        h_x=0.3 * np.eye(3)[:1],
        u_set=InputBox(lo=np.array([-2.0]), hi=np.array([2.0])),
        p=0.9,
        init=GaussianBelief(mean=np.array([0.8, -0.3, 0.2]), cov=0.02 * np.eye(3)),
    )
    s_ss = solve(build_nominal_qp_statespace(sys, spec))
    s_ms = solve(build_nominal_qp_multistep(build_multistep(sys, 8), spec))
    assert s_ss.status == s_ms.status == "Optimal"
    assert abs(s_ss.objective - s_ms.objective) <= 1e-6 * max(1.0, abs(s_ss.objective))
    assert np.abs(s_ss.primal - s_ms.primal).max() <= 1e-6


def test_perturbed_model_changes_optimizer():
    sys = random_system(2, 1, 1, 0.9, Rng(53), sigma_w=0.1, sigma_eps=0.0)
    spec = make_spec(sys, x0=np.array([1.0, 0.5]))
    model = build_multistep(sys, spec.horizon)
    sol_true = solve(build_nominal_qp_multistep(model, spec))
    from mspc.system import MultiStepModel

    perturbed = MultiStepModel(
        horizon=model.horizon,
        g0=[g * 1.15 for g in model.g0],
        gu=[g * 0.85 for g in model.gu],
        gw=model.gw,
        sigma_w=model.sigma_w,
    )
    sol_pert = solve(build_nominal_qp_multistep(perturbed, spec))
    assert sol_true.status == sol_pert.status == "Optimal"
    assert np.abs(sol_true.primal - sol_pert.primal).max() > 1e-4


def test_infeasible_initial_state_raises():
    sys = random_system(2, 1, 1, 0.8, Rng(54), sigma_w=0.1)
    spec = make_spec(sys, x0=np.array([10.0, 0.0]))  # H x0 = 4 > 1
    with pytest.raises(InfeasibleInitialState):
        build_nominal_qp_statespace(sys, spec)


# ---------------------------------------------------------------------------
# Tightening constants
# ---------------------------------------------------------------------------


def tightening_inputs(gen, n=2, m=1, q=1, k=3):
    sys = random_system(n, m, q, 0.9, gen, sigma_w=0.3, sigma_eps=0.01)
    model = build_multistep(sys, k)
    g0, gu, gw = model.step(k)
    dof = n * n + n * k * m
    f = gen.standard_normal((dof, dof))
    sigma_theta = 0.01 * (f @ f.T + 0.5 * np.eye(dof))
    h_row = gen.standard_normal(n)
    sigma_x0 = 0.05 * np.eye(n)
    return h_row, gw, g0, sys.sigma_w, sigma_x0, sym_sqrt(sigma_theta)


def test_tightening_zero_radius_is_nominal_std(gen):
    h_row, gw, g0, sw, sx0, s_half = tightening_inputs(gen)
    k = gw.shape[1] // sw.shape[0]
    val = tightening_constant_exact(h_row, gw, g0, sw, sx0, s_half, 0.0)
    cov = gw @ diag_repeat(sw, k) @ gw.T + g0 @ sx0 @ g0.T
    assert_allclose(val, math.sqrt(h_row @ cov @ h_row), rtol=1e-10)


def test_tightening_zero_initial_cov_exact_and_upper_coincide(gen):
    h_row, gw, g0, sw, _, s_half = tightening_inputs(gen)
    k = gw.shape[1] // sw.shape[0]
    sx0 = np.zeros_like(g0)
    radius = 2.5
    exact = tightening_constant_exact(h_row, gw, g0, sw, sx0, s_half, radius)
    upper = tightening_constant_upper(h_row, gw, g0, sw, sx0, s_half, radius)
    expected = np.linalg.norm(diag_repeat(sym_sqrt(sw), k) @ gw.T @ h_row)
    assert_allclose(exact, expected, rtol=1e-10)
    assert_allclose(upper, expected, rtol=1e-10)


def test_tightening_sampling_sandwich(gen):
    for _ in range(25):
        h_row, gw, g0, sw, sx0, s_half = tightening_inputs(gen)
        radius = float(1.0 + 2.0 * gen.uniform())
        exact = tightening_constant_exact(h_row, gw, g0, sw, sx0, s_half, radius)
        upper = tightening_constant_upper(h_row, gw, g0, sw, sx0, s_half, radius)
        assert exact <= upper + 1e-9
        # Sampled lower bound on the true maximum.
        dof = s_half.shape[0]
        dirs = gen.standard_normal((2000, dof))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        k = gw.shape[1] // sw.shape[0]
        n = g0.shape[0]
        sw_half = sym_sqrt(sw)
        sx_half = sym_sqrt(sx0)
        base = np.concatenate([
            diag_repeat(sw_half, k) @ (gw.T @ h_row), sx_half @ (g0.T @ h_row)
        ])
        sel = np.kron(sx_half, h_row[None, :]) @ s_half[: n * n, :]
        stack = np.vstack([np.zeros((k * sw.shape[0], dof)), sel])
        vals = np.linalg.norm(base[None, :] + radius * dirs @ stack.T, axis=1)
        assert exact >= vals.max() - 1e-6


# ---------------------------------------------------------------------------
# Robust program
# ---------------------------------------------------------------------------


def test_robust_reduces_to_nominal_row_for_row():
    sys = random_system(2, 1, 1, 0.85, Rng(55), sigma_w=0.1, sigma_eps=0.0)
    spec = make_spec(sys, horizon=5, x0=np.array([0.8, -0.2]))
    ests, gw = perfect_estimates(sys, 5)
    prog_rob = build_robust_socp_multistep(ests, spec, 1.0, gw, sys.sigma_w)
    prog_nom = build_nominal_qp_multistep(build_multistep(sys, 5), spec)
    assert not prog_rob.soc_rows
    assert prog_rob.lin_a.shape == prog_nom.lin_a.shape
    for a, b in (
        (prog_rob.lin_a, prog_nom.lin_a),
        (prog_rob.lin_b, prog_nom.lin_b),
        (prog_rob.p_mat, prog_nom.p_mat),
        (prog_rob.q_vec, prog_nom.q_vec),
    ):
        assert np.abs(a - b).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(b).max(initial=0.0))


def test_robust_rejects_delta_below_p():
    sys = random_system(2, 1, 1, 0.85, Rng(56), sigma_w=0.1)
    spec = make_spec(sys)
    ests, gw = perfect_estimates(sys, spec.horizon)
    with pytest.raises(DeltaTooSmall):
        build_robust_socp_multistep(ests, spec, spec.p, gw, sys.sigma_w)


def test_robust_cost_monotone_in_parameter_covariance():
    sys = random_system(2, 1, 1, 0.85, Rng(57), sigma_w=0.05, sigma_eps=0.0)
    spec = make_spec(sys, horizon=4, x0=np.array([1.2, 0.0]), h_scale=0.45)
    ests, gw = perfect_estimates(sys, 4)
    gen = Rng(58).generator()
    costs = []
    for scale in (1e-4, 4e-4):
        scaled = []
        for est in ests:
            f = gen  # deterministic basis below
            dof = est.dof
            base = np.eye(dof)
            scaled.append(
                ParameterEstimate(
                    k=est.k, structure=est.structure, theta=est.theta,
                    cov=scale * base, n=est.n, m=est.m,
                )
            )
        prog = build_robust_socp_multistep(scaled, spec, 0.95, gw, sys.sigma_w)
        sol = solve(prog)
        assert sol.status == "Optimal"
        costs.append(sol.objective)
    assert costs[1] >= costs[0] - 1e-9


def test_tightening_table_and_csv(tmp_path):
    sys = random_system(2, 1, 1, 0.85, Rng(59), sigma_w=0.1, sigma_eps=0.0)
    spec = make_spec(sys, horizon=3)
    ests, gw = perfect_estimates(sys, 3)
    for i, est in enumerate(ests):
        ests[i] = ParameterEstimate(
            k=est.k, structure=est.structure, theta=est.theta,
            cov=1e-4 * np.eye(est.dof), n=est.n, m=est.m,
        )
    table = build_tightening_table(spec, ests, gw, sys.sigma_w, 0.95)
    assert table.p_tilde == pytest.approx(spec.p / 0.95)
    for key, h in table.h_exact.items():
        assert h <= table.h_upper[key] + 1e-9
    path = tmp_path / "tightening.csv"
    save_tightening_csv(table, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "j,k,h_exact,h_upper,radius"
    assert len(lines) == 1 + 3 * spec.n_rows


def test_robust_certifiable_program_is_solvable():
    sys = random_system(2, 1, 2, 0.85, Rng(60), sigma_w=0.02, sigma_eps=0.0)
    spec = make_spec(sys, horizon=4, x0=np.array([1.0, 0.3]), h_scale=0.4)
    ests, gw = perfect_estimates(sys, 4)
    bumped = [
        ParameterEstimate(
            k=e.k, structure=e.structure, theta=e.theta,
            cov=1e-5 * np.eye(e.dof), n=e.n, m=e.m,
        )
        for e in ests
    ]
    prog = build_robust_socp_multistep(bumped, spec, 0.95, gw, sys.sigma_w)
    assert prog.soc_rows  # nonzero covariance produces cone rows
    sol = solve(prog)
    assert sol.status == "Optimal"
    assert sol.kkt.max() <= 1e-7


# ---------------------------------------------------------------------------
# Scenario baseline
# ---------------------------------------------------------------------------


def minmax_setup(seed=61, sigma_theta=0.0):
    sys = random_system(2, 1, 2, 0.8, Rng(seed), sigma_w=0.05, sigma_eps=0.0)
    spec = make_spec(sys, horizon=4, x0=np.array([0.9, -0.4]), h_scale=0.35)
    theta = true_theta(sys.A, sys.B)
    est = ParameterEstimate(
        k=1, structure=STRUCTURE_FULL, theta=theta,
        cov=sigma_theta * np.eye(theta.size), n=2, m=1,
    )
    return sys, spec, est


def test_minmax_single_nominal_scenario_matches_inflated_qp():
    sys, spec, est = minmax_setup()
    prog = formulate_minmax_statespace(est, spec, 0.95, 1, Rng(62), sys.E, sys.sigma_w)
    sol = solve(prog)
    assert sol.status == "Optimal"
    spec_pt = OcpSpec(
        horizon=spec.horizon, Q=spec.Q, R=spec.R, h_x=spec.h_x,
        u_set=spec.u_set, p=spec.p / 0.95, init=spec.init,
    )
    sol_nom = solve(build_nominal_qp_statespace(sys, spec_pt))
    assert sol_nom.status == "Optimal"
    u_len = spec.horizon * spec.m
    assert np.abs(sol.primal[:u_len] - sol_nom.primal).max() <= 1e-5
    # Epigraph value = nominal cost plus the trace terms.
    noise_cov = sys.E @ sys.sigma_w @ sys.E.T
    cov = spec.init.cov
    trace_term = 0.0
    for _ in range(spec.horizon):
        cov = sys.A @ cov @ sys.A.T + noise_cov
        trace_term += float(np.trace(spec.Q @ cov))
    assert abs(sol.objective - (sol_nom.objective + trace_term)) <= 1e-5 * max(
        1.0, abs(sol.objective)
    )


def test_minmax_tiny_uncertainty_continuity():
    sys, spec, est = minmax_setup(seed=63, sigma_theta=1e-12)
    prog = formulate_minmax_statespace(est, spec, 0.95, 8, Rng(64), sys.E, sys.sigma_w)
    sol = solve(prog)
    spec_pt = OcpSpec(
        horizon=spec.horizon, Q=spec.Q, R=spec.R, h_x=spec.h_x,
        u_set=spec.u_set, p=spec.p / 0.95, init=spec.init,
    )
    sol_nom = solve(build_nominal_qp_statespace(sys, spec_pt))
    u_len = spec.horizon * spec.m
    assert sol.status == "Optimal"
    assert np.abs(sol.primal[:u_len] - sol_nom.primal).max() <= 1e-6 * 10


def test_minmax_cost_monotone_in_scenarios():
    sys, spec, est = minmax_setup(seed=65, sigma_theta=1e-4)
    costs = []
    for n_sc in (1, 4, 16):
        prog = formulate_minmax_statespace(est, spec, 0.95, n_sc, Rng(66), sys.E, sys.sigma_w)
        sol = solve(prog)
        assert sol.status == "Optimal"
        costs.append(sol.objective)
    assert costs[0] <= costs[1] + 1e-7
    assert costs[1] <= costs[2] + 1e-7


def test_minmax_rejects_delta_below_p():
    sys, spec, est = minmax_setup(seed=67)
    with pytest.raises(DeltaTooSmall):
        formulate_minmax_statespace(est, spec, 0.5, 4, Rng(68), sys.E, sys.sigma_w)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_program_json_round_trip(tmp_path):
    sys = random_system(2, 1, 1, 0.85, Rng(69), sigma_w=0.05, sigma_eps=0.0)
    spec = make_spec(sys, horizon=3, x0=np.array([0.9, 0.1]))
    ests, gw = perfect_estimates(sys, 3)
    bumped = [
        ParameterEstimate(
            k=e.k, structure=e.structure, theta=e.theta,
            cov=1e-5 * np.eye(e.dof), n=e.n, m=e.m,
        )
        for e in ests
    ]
    prog = build_robust_socp_multistep(bumped, spec, 0.95, gw, sys.sigma_w)
    path = tmp_path / "program.json"
    save_program(prog, path)
    loaded = load_program(path)
    assert np.array_equal(loaded.p_mat, prog.p_mat)
    assert np.array_equal(loaded.lin_a, prog.lin_a)
    assert len(loaded.soc_rows) == len(prog.soc_rows)
    for a, b in zip(loaded.soc_rows, prog.soc_rows):
        assert np.array_equal(a.f_mat, b.f_mat)
        assert np.array_equal(a.g_vec, b.g_vec)
    s1 = solve(prog)
    s2 = solve(loaded)
    assert_allclose(s1.primal, s2.primal, atol=1e-12)
    doc = program_to_json(prog)
    assert np.array_equal(program_from_json(doc).q_vec, prog.q_vec)


def test_robust_cost_nests_in_probability_level():
    sys = random_system(2, 1, 1, 0.85, Rng(70), sigma_w=0.05, sigma_eps=0.0)
    spec_lo = make_spec(sys, horizon=4, p=0.85, x0=np.array([1.3, 0.1]), h_scale=0.5)
    spec_hi = make_spec(sys, horizon=4, p=0.9, x0=np.array([1.3, 0.1]), h_scale=0.5)
    ests, gw = perfect_estimates(sys, 4)
    bumped = [
        ParameterEstimate(
            k=e.k, structure=e.structure, theta=e.theta,
            cov=1e-5 * np.eye(e.dof), n=e.n, m=e.m,
        )
        for e in ests
    ]
    sol_lo = solve(build_robust_socp_multistep(bumped, spec_lo, 0.95, gw, sys.sigma_w))
    sol_hi = solve(build_robust_socp_multistep(bumped, spec_hi, 0.95, gw, sys.sigma_w))
    assert sol_lo.status == sol_hi.status == "Optimal"
    assert sol_hi.objective >= sol_lo.objective - 1e-9


def test_robust_soc_rows_encode_the_tightened_inequality():
    # Evaluate each cone row at a generic (non-optimal) point and compare
    # against the directly computed tightened constraint margin.
    sys = random_system(2, 1, 1, 0.85, Rng(71), sigma_w=0.05, sigma_eps=0.0)
    spec = make_spec(sys, horizon=3, x0=np.array([1.0, 0.2]))
    ests, gw = perfect_estimates(sys, 3)
    bumped = [
        ParameterEstimate(
            k=e.k, structure=e.structure, theta=e.theta,
            cov=1e-4 * np.eye(e.dof), n=e.n, m=e.m,
        )
        for e in ests
    ]
    table = build_tightening_table(spec, bumped, gw, sys.sigma_w, 0.95)
    prog = build_robust_socp_multistep(bumped, spec, 0.95, gw, sys.sigma_w, table=table)
    u = np.array([0.3, -0.4, 0.1])
    x0 = spec.init.mean
    h = spec.h_x[0]
    assert len(prog.soc_rows) == 3
    for k in (1, 2, 3):
        est = bumped[k - 1]
        mean_val = float(h @ (est.g0_hat() @ x0 + est.gu_hat() @ u[:k]))
        zvec = np.concatenate([x0, u[:k]])
        param = table.radius[k] * float(
            np.linalg.norm(sym_sqrt(est.cov) @ np.kron(zvec, h))
        )
        intended = mean_val + param - (1.0 - table.c_ptilde * table.h_exact[(0, k)])
        row = prog.soc_rows[k - 1]
        actual = float(
            np.linalg.norm(row.f_mat @ u + row.g_vec) - (row.c_vec @ u + row.d_off)
        )
        assert abs(intended - actual) <= 1e-12


def test_nominal_rows_encode_the_tightened_inequality():
    sys = random_system(2, 1, 2, 0.85, Rng(72), sigma_w=0.1, sigma_eps=0.0)
    spec = make_spec(sys, horizon=4, x0=np.array([0.7, -0.1]), h_scale=0.3)
    prog = build_nominal_qp_statespace(sys, spec)
    u = Rng(73).generator().standard_normal(4)
    backoff = gaussian_backoff(spec.p)
    x = spec.init.mean
    cov = spec.init.cov
    noise_cov = sys.E @ sys.sigma_w @ sys.E.T
    h = spec.h_x[0]
    for k in range(1, 5):
        x = sys.A @ x + sys.B @ u[k - 1: k]
        cov = sys.A @ cov @ sys.A.T + noise_cov
        intended = float(h @ x) + backoff * math.sqrt(h @ cov @ h) - 1.0
        row_idx = k - 1  # one state row per step here (single constraint row)
        actual = float(prog.lin_a[row_idx] @ u - prog.lin_b[row_idx])
        assert abs(intended - actual) <= 1e-10


def test_fir_program_independent_of_initial_mean():
    gen = Rng(74).generator()
    src = build_multistep(random_system(2, 1, 1, 0.9, gen, sigma_w=0.05), 4)
    from mspc.system import MultiStepModel

    fir = MultiStepModel(
        horizon=4,
        g0=[np.zeros((2, 2)) for _ in range(4)],
        gu=src.gu,
        gw=src.gw,
        sigma_w=src.sigma_w,
    )
    sys_dummy = random_system(2, 1, 1, 0.9, Rng(75), sigma_w=0.05)
    base = make_spec(sys_dummy, horizon=4, h_scale=0.3)
    progs = []
    for x0 in (np.array([0.4, -0.2]), np.array([-0.9, 0.6])):
        spec = OcpSpec(
            horizon=4, Q=base.Q, R=base.R, h_x=base.h_x, u_set=base.u_set,
            p=base.p, init=GaussianBelief(mean=x0, cov=base.init.cov),
        )
        progs.append(build_nominal_qp_multistep(fir, spec))
    a, b = progs
    assert np.array_equal(a.lin_a, b.lin_a)
    assert np.array_equal(a.lin_b, b.lin_b)
    assert np.array_equal(a.p_mat, b.p_mat)
    assert np.array_equal(a.q_vec, b.q_vec)
    assert a.constant == b.constant == 0.0
