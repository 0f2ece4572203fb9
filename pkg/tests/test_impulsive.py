import math

import numpy as np
import numpy.testing as npt
import pytest

from se3opt import (
    RigidBodyState,
    exp_so3,
    log_so3,
    simulate,
)
from se3opt.impulsive import (
    FullState,
    ImpulsiveDecision,
    ImpulsiveProblem,
    RelaxedOrbit,
    cost_and_constraint_gradients,
    default_decision,
    impulsive_cost,
    solve_impulsive,
    solve_tpbvp,
    terminal_constraints,
    terminal_momenta,
)

from conftest import circular_state


def hohmann_speeds(mu, r1, r2):
    """Classical two-impulse coplanar transfer: departure and arrival
    speeds on the half ellipse plus the circular speeds."""
    v_dep = math.sqrt(2 * mu * r2 / (r1 * (r1 + r2)))
    v_arr = math.sqrt(2 * mu * r1 / (r2 * (r1 + r2)))
    return v_dep, v_arr, math.sqrt(mu / r1), math.sqrt(mu / r2)


def hohmann_transfer_time(mu, r1, r2):
    a = 0.5 * (r1 + r2)
    return math.pi * math.sqrt(a**3 / mu)


def test_cost_zero_for_no_impulse_target(point_mass, gravity):
    state = circular_state(gravity.mu)
    n, h = 200, 1e-3
    coast = simulate(point_mass, gravity, h, state, n_steps=n, order=2)
    prob = ImpulsiveProblem(point_mass, gravity, state, n, h,
                            FullState(coast.final_state()))
    cost = impulsive_cost(prob, default_decision(prob))
    assert cost == 0.0


def test_cost_is_sum_of_impulse_magnitudes(point_mass, gravity, rng):
    # initial linear impulse delta plus a forced terminal impulse epsilon
    state = circular_state(gravity.mu)
    n, h = 150, 1e-3
    delta = np.array([0.02, -0.01, 0.03])
    decision = ImpulsiveDecision(gamma0_plus=state.gamma + delta,
                                 Pi0_plus=state.Pi.copy())
    coast = simulate(
        point_mass, gravity, h,
        RigidBodyState(state.R, state.x, decision.Pi0_plus,
                       decision.gamma0_plus),
        n_steps=n, order=2,
    )
    eps_g = np.array([-0.005, 0.004, 0.001])
    eps_p = np.array([1e-6, -2e-6, 0.5e-6])
    desired = RigidBodyState(coast.R[-1], coast.x[-1],
                             coast.Pi[-1] + eps_p, coast.gamma[-1] + eps_g)
    prob = ImpulsiveProblem(point_mass, gravity, state, n, h,
                            FullState(desired))
    cost = impulsive_cost(prob, decision)
    expected = (np.linalg.norm(delta) + np.linalg.norm(eps_g)
                + np.linalg.norm(eps_p))
    npt.assert_allclose(cost, expected, rtol=1e-12)


def test_cost_matches_hohmann(point_mass, gravity):
    # evaluate the impulse cost at the classical transfer decision with a
    # fully specified arrival state: the discrete value approaches the
    # closed-form impulse sum at second order in h
    mu = gravity.mu
    v_dep, v_arr, v_c1, v_c2 = hohmann_speeds(mu, 1.0, 2.0)
    tf = hohmann_transfer_time(mu, 1.0, 2.0)
    n = 8000
    state = circular_state(mu)
    desired = RigidBodyState(np.eye(3), [-2.0, 0, 0], np.zeros(3),
                             [0.0, -v_c2, 0.0])
    prob = ImpulsiveProblem(point_mass, gravity, state, n, tf / n,
                            FullState(desired))
    sol = solve_tpbvp(prob)
    classical = point_mass.m * ((v_dep - v_c1) + (v_c2 - v_arr))
    npt.assert_allclose(sol.cost, classical, rtol=1e-6)


def test_terminal_constraints_relaxed_cases(big_dumbbell, gravity):
    mu = gravity.mu
    e_n = np.array([0.0, 0.0, 1.0])
    relax = RelaxedOrbit(r_d=1.0, e_n=e_n, body_axis=np.array([0.0, 0.0, 1.0]),
                         spin_rate=0.0)
    # aligned state exactly on the target orbit
    state = circular_state(mu)
    prob = ImpulsiveProblem(big_dumbbell, gravity, state, 1, 1e-6, relax)
    traj = simulate(big_dumbbell, gravity, 1e-6, state, n_steps=1, order=2)
    c = terminal_constraints(prob, default_decision(prob), trajectory=traj)
    assert np.abs(c).max() < 1e-7


def test_terminal_constraints_recompute_from_definitions(
        big_dumbbell, gravity, rng):
    relax = RelaxedOrbit(r_d=1.4, e_n=np.array([0.0, 0.0, 1.0]),
                         body_axis=np.array([1.0, 0.0, 0.0]), spin_rate=0.2)
    state = circular_state(gravity.mu,
                           Pi=big_dumbbell.J @ np.array([0.1, 0.0, 0.4]))
    prob = ImpulsiveProblem(big_dumbbell, gravity, state, 60, 0.004, relax)
    d = ImpulsiveDecision(state.gamma + rng.uniform(-0.3, 0.3, 3),
                          big_dumbbell.J @ rng.uniform(-0.5, 0.5, 3))
    traj = simulate(
        big_dumbbell, gravity, prob.h,
        RigidBodyState(state.R, state.x, d.Pi0_plus, d.gamma0_plus),
        n_steps=prob.n_steps, order=2,
    )
    c = terminal_constraints(prob, d, trajectory=traj)
    x_N, R_N = traj.x[-1], traj.R[-1]
    npt.assert_allclose(c[0], np.linalg.norm(x_N) - relax.r_d, rtol=1e-13)
    npt.assert_allclose(c[1], relax.e_n @ x_N, rtol=1e-13)
    npt.assert_allclose(c[2], 1.0 - (R_N @ relax.body_axis) @ relax.e_n,
                        rtol=1e-12, atol=1e-15)


def test_terminal_constraints_full_state_momentum_rows_closed(
        point_mass, gravity):
    state = circular_state(gravity.mu)
    coast = simulate(point_mass, gravity, 1e-3, state, n_steps=100, order=2)
    desired = RigidBodyState(coast.R[-1], coast.x[-1] + 0.01,
                             coast.Pi[-1], coast.gamma[-1] + 0.5)
    prob = ImpulsiveProblem(point_mass, gravity, state, 100, 1e-3,
                            FullState(desired))
    c = terminal_constraints(prob, default_decision(prob))
    assert c.shape == (12,)
    npt.assert_allclose(c[0:3], [0.01, 0.01, 0.01], rtol=1e-10)
    # momentum rows are identically zero: the terminal impulse closes them
    npt.assert_array_equal(c[3:6], np.zeros(3))
    npt.assert_array_equal(c[9:12], np.zeros(3))


def test_gradients_match_finite_differences(big_dumbbell, gravity, rng):
    relax = RelaxedOrbit(r_d=1.3, e_n=np.array([0.0, 0.0, 1.0]),
                         body_axis=np.array([1.0, 0.0, 0.0]), spin_rate=0.3)
    state = RigidBodyState(exp_so3([0.1, 0.2, -0.1]), [1.0, 0, 0],
                           big_dumbbell.J @ np.array([0.1, 0.0, 0.5]),
                           [0.0, math.sqrt(gravity.mu), 0.2])
    prob = ImpulsiveProblem(big_dumbbell, gravity, state, 50, 0.005, relax)
    jscale = np.abs(big_dumbbell.J).max()
    worst_cost = worst_cons = 0.0
    for _ in range(50):
        d = ImpulsiveDecision(
            state.gamma + rng.uniform(-0.4, 0.4, 3),
            big_dumbbell.J @ rng.uniform(-0.6, 0.6, 3),
        )
        g = cost_and_constraint_gradients(prob, d)
        j = int(rng.integers(0, 6))
        dp = np.zeros(6)
        dp[j] = 1e-6 * (1.0 if j < 3 else jscale)
        d_plus = ImpulsiveDecision.from_vector(d.as_vector() + dp)
        d_minus = ImpulsiveDecision.from_vector(d.as_vector() - dp)
        fd_cost = (impulsive_cost(prob, d_plus)
                   - impulsive_cost(prob, d_minus)) / (2 * dp[j])
        worst_cost = max(worst_cost, abs(fd_cost - g.cost_gradient[j])
                         / max(1e-6, abs(fd_cost)))
        fd_cons = (terminal_constraints(prob, d_plus)
                   - terminal_constraints(prob, d_minus)) / (2 * dp[j])
        worst_cons = max(worst_cons,
                         np.abs(fd_cons - g.constraint_jacobian[:, j]).max()
                         / max(1e-6, np.abs(fd_cons).max()))
    assert worst_cost <= 1e-4
    assert worst_cons <= 1e-4


def test_cost_gradient_orthogonal_to_feasible_directions(big_dumbbell,
                                                         gravity):
    # at a converged constrained optimum the cost gradient lies in the
    # row space of the constraint Jacobian: its projection onto the
    # feasible (null-space) directions vanishes
    prob = _radius_double_problem(big_dumbbell, gravity)
    sol = solve_impulsive(prob)
    g = cost_and_constraint_gradients(prob, sol.decision)
    G = g.solver_jacobian
    _, _, vt = np.linalg.svd(G)
    null_basis = vt[G.shape[0]:]
    proj = null_basis @ g.cost_gradient
    assert np.linalg.norm(proj) <= 1e-7 * max(1.0,
                                              np.linalg.norm(g.cost_gradient))


def test_tpbvp_trivial_target_no_iterations(point_mass, gravity):
    state = circular_state(gravity.mu)
    coast = simulate(point_mass, gravity, 1e-3, state, n_steps=300, order=2)
    prob = ImpulsiveProblem(point_mass, gravity, state, 300, 1e-3,
                            FullState(coast.final_state()))
    sol = solve_tpbvp(prob)
    assert sol.iterations == 0
    assert sol.cost == 0.0
    npt.assert_array_equal(sol.decision.gamma0_plus, state.gamma)


def test_tpbvp_attitude_only(big_dumbbell, no_gravity):
    R_d = exp_so3([0.5, 0.3, -0.2])
    state = RigidBodyState(np.eye(3), np.zeros(3), np.zeros(3), np.zeros(3))
    desired = RigidBodyState(R_d, np.zeros(3), np.zeros(3), np.zeros(3))
    prob = ImpulsiveProblem(big_dumbbell, no_gravity, state, 100, 0.01,
                            FullState(desired))
    sol = solve_tpbvp(prob)
    traj = sol.trajectory
    residual = np.linalg.norm(np.concatenate([
        desired.x - traj.x[-1], log_so3(traj.R[-1].T @ R_d)]))
    assert residual <= 1e-12
    assert sol.constraint_violation <= 1e-12


@pytest.mark.slow
def test_tpbvp_recovers_hohmann_departure_momentum(point_mass, gravity):
    # at a fine enough step the solved initial momentum converges to the
    # classical departure speed at second order (coefficient ~24 h^2)
    mu = gravity.mu
    v_dep, _, _, v_c2 = hohmann_speeds(mu, 1.0, 2.0)
    tf = hohmann_transfer_time(mu, 1.0, 2.0)
    n = 64000
    state = circular_state(mu)
    desired = RigidBodyState(np.eye(3), [-2.0, 0, 0], np.zeros(3),
                             [0.0, -v_c2, 0.0])
    prob = ImpulsiveProblem(point_mass, gravity, state, n, tf / n,
                            FullState(desired))
    sol = solve_tpbvp(prob)
    expected = point_mass.m * np.array([0.0, v_dep, 0.0])
    assert np.linalg.norm(sol.decision.gamma0_plus - expected) <= 1e-8


def test_impulsive_zero_impulse_precheck(point_mass, gravity):
    # a state already satisfying the relaxed condition with matching
    # closure momenta returns immediately with the no-impulse decision.
    # The discrete flow's invariant circle at unit radius moves at
    # v* = sqrt(mu) (1 - h^2 mu / 8) + O(h^4) (expand the one-step
    # trapezoidal update on a rotating polygon ansatz), which keeps both
    # the radius and the closure-momentum mismatch at the h^2 floor.
    mu = gravity.mu
    h = 5e-6
    v_h = math.sqrt(mu) * (1.0 - h * h * mu / 8.0)
    state = RigidBodyState(np.eye(3), [1.0, 0, 0], np.zeros(3),
                           [0.0, point_mass.m * v_h, 0.0])
    relax = RelaxedOrbit(r_d=1.0, e_n=np.array([0.0, 0, 1.0]),
                         body_axis=np.array([0.0, 0, 1.0]), spin_rate=0.0)
    prob = ImpulsiveProblem(point_mass, gravity, state, 50, h, relax)
    sol = solve_impulsive(prob)
    assert sol.iterations == 0
    npt.assert_array_equal(sol.decision.gamma0_plus, state.gamma)
    assert sol.cost <= 1e-8
    assert sol.constraint_violation <= 1e-10


def _radius_double_problem(body, gravity, n=200):
    mu = gravity.mu
    tf = hohmann_transfer_time(mu, 1.0, 2.0)
    state = circular_state(mu, Pi=body.J @ np.array([0.0, 0.0, 0.5]))
    relax = RelaxedOrbit(r_d=2.0, e_n=np.array([0.0, 0, 1.0]),
                         body_axis=np.array([1.0, 0, 0]), spin_rate=0.0)
    return ImpulsiveProblem(body, gravity, state, n, tf / n, relax)


def test_impulsive_radius_doubling_feasible(big_dumbbell, gravity):
    prob = _radius_double_problem(big_dumbbell, gravity)
    sol = solve_impulsive(prob)
    assert sol.constraint_violation <= 1e-10
    assert sol.stationarity <= 1e-8
    assert sol.cost > 0


def test_impulsive_cost_self_consistent(big_dumbbell, gravity):
    prob = _radius_double_problem(big_dumbbell, gravity)
    sol = solve_impulsive(prob)
    tr = sol.trajectory
    gN_plus, PN_plus = terminal_momenta(prob, tr.x[-1], tr.R[-1])
    recomputed = (
        np.linalg.norm(sol.decision.Pi0_plus - prob.initial.Pi)
        + np.linalg.norm(sol.decision.gamma0_plus - prob.initial.gamma)
        + np.linalg.norm(PN_plus - tr.Pi[-1])
        + np.linalg.norm(gN_plus - tr.gamma[-1])
    )
    npt.assert_allclose(sol.cost, recomputed, atol=1e-12)


def test_relaxation_dominates_matched_full_state(big_dumbbell, gravity):
    # a full-state target lying on the relaxed constraint set can only
    # cost at least as much as the relaxed optimum warm-started from it
    mu = gravity.mu
    prob = _radius_double_problem(big_dumbbell, gravity)
    ang = 1.1
    x_T = 2.0 * np.array([math.cos(ang), math.sin(ang), 0.0])
    v_T = math.sqrt(mu / 2.0) * np.array([-math.sin(ang), math.cos(ang), 0.0])
    e1 = np.array([0.0, 0, 1.0])
    e2 = -np.array([math.cos(ang), math.sin(ang), 0.0])
    R_T = np.column_stack([e1, e2, np.cross(e1, e2)])
    desired = RigidBodyState(R_T, x_T, np.zeros(3), v_T)
    full = ImpulsiveProblem(big_dumbbell, gravity, prob.initial, prob.n_steps,
                            prob.h, FullState(desired))
    sol_full = solve_tpbvp(full)
    # the full-state target satisfies the relaxed constraints
    assert np.abs(terminal_constraints(prob, sol_full.decision)).max() <= 1e-9
    sol_rel = solve_impulsive(prob, guess=sol_full.decision)
    assert sol_rel.constraint_violation <= 1e-10
    assert sol_rel.cost <= sol_full.cost + 1e-9
