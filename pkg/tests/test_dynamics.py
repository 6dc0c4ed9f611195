import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uvmscoop.dynamics import (
    N_THETA,
    DisturbanceModel,
    HydroParams,
    coriolis_matrix,
    coriolis_times,
    current_velocity,
    disturbance_regressor,
    drag_matrix,
    external_wrench,
    object_terms,
    params_from_theta,
    regressor,
    restoring_wrench,
    robot_object_frame_terms,
    theta_from_params,
)
from uvmscoop.kinematics import grasp_jacobian, rotation_from_euler
from uvmscoop.verify import random_params


def random_state(rng):
    return np.concatenate([rng.normal(size=3), rng.uniform(-1, 1, 3)]), rng.normal(size=6)


def test_object_terms_at_rest_and_neutral(rng):
    p = random_params(rng)
    x, _ = random_state(rng)
    terms = object_terms(x, np.zeros(6), p)
    assert np.array_equal(terms.Cv, np.zeros(6)) and np.array_equal(terms.Dv, np.zeros(6))
    neutral = HydroParams(p.mass_matrix, p.drag_linear, p.drag_quadratic, np.zeros(6))
    assert np.array_equal(object_terms(x, rng.normal(size=6), neutral).g, np.zeros(6))


def test_object_terms_values(rng):
    p = random_params(rng)
    x, v = random_state(rng)
    t = object_terms(x, v, p)
    np.testing.assert_allclose(t.M, p.mass_matrix)
    np.testing.assert_allclose(t.Cv, coriolis_matrix(p.mass_matrix, v) @ v, atol=1e-12)
    np.testing.assert_allclose(t.Dv, (p.drag_linear + p.drag_quadratic * np.abs(v)) * v)
    R = rotation_from_euler(x[3:])
    np.testing.assert_allclose(t.g, np.concatenate([p.restoring[:3], R.T @ p.restoring[3:]]))


def test_coriolis_times_matches_matrix(rng):
    for _ in range(50):
        p = random_params(rng)
        v, c = rng.normal(size=(2, 6))
        np.testing.assert_allclose(coriolis_times(p.mass_matrix, v, c),
                                   coriolis_matrix(p.mass_matrix, v) @ c, atol=1e-12)


def test_coriolis_is_kinetic_energy_consistent(rng):
    # a skew C leaves the kinetic energy untouched: v' C v = 0
    for _ in range(50):
        p = random_params(rng)
        v = rng.normal(size=6)
        assert abs(v @ coriolis_matrix(p.mass_matrix, v) @ v) < 1e-9 * (1 + v @ p.mass_matrix @ v)


def test_skew_symmetry_with_fd_mass_derivative(rng):
    p = random_params(rng)
    offset = rng.normal(size=3) * 0.5
    J = grasp_jacobian(offset)
    x, v = random_state(rng)
    h = 1e-6
    for _ in range(100):
        z = rng.normal(size=6)
        # pose moves along v; the inertia never depends on it, so the FD derivative is exactly zero
        M_plus = object_terms(x + h * v, v, p).M
        M_minus = object_terms(x - h * v, v, p).M
        Mdot = (M_plus - M_minus) / (2 * h)
        C = coriolis_matrix(p.mass_matrix, v)
        assert abs(z @ (Mdot - 2 * C) @ z) < 1e-9 * (z @ z)
        Mi_p, Ci, _, _ = robot_object_frame_terms(x + h * v, v, J, np.zeros((6, 6)), p)
        Mi_m = robot_object_frame_terms(x - h * v, v, J, np.zeros((6, 6)), p)[0]
        assert abs(z @ ((Mi_p - Mi_m) / (2 * h) - 2 * Ci) @ z) < 1e-8 * (z @ z)


def test_robot_terms_reduce_to_task_space(rng):
    p = random_params(rng)
    x, v = random_state(rng)
    M, C, D, g = robot_object_frame_terms(x, v, np.eye(6), np.zeros((6, 6)), p)
    np.testing.assert_allclose(M, p.mass_matrix)
    np.testing.assert_allclose(C, coriolis_matrix(p.mass_matrix, v))
    np.testing.assert_allclose(D, drag_matrix(p, v))
    np.testing.assert_allclose(g, restoring_wrench(p.restoring, x[3:]))


def test_robot_terms_spd(rng):
    for _ in range(100):
        p = random_params(rng)
        x, v = random_state(rng)
        J = grasp_jacobian(rng.normal(size=3))
        M = robot_object_frame_terms(x, v, J, np.zeros((6, 6)), p)[0]
        np.testing.assert_allclose(M, M.T, atol=1e-9)
        assert np.linalg.eigvalsh(M).min() > 0


def test_regressor_trivial_cases(rng):
    p = random_params(rng)
    neutral = HydroParams(p.mass_matrix, p.drag_linear, p.drag_quadratic, np.zeros(6))
    x, v = random_state(rng)
    J = grasp_jacobian(rng.normal(size=3))
    W = regressor(x, v, np.zeros(6), np.zeros(6), J)
    # with c = d = 0 only the restoring columns survive
    assert np.array_equal(W[:, :33], np.zeros((6, 33)))
    np.testing.assert_allclose(W @ theta_from_params(neutral), 0, atol=1e-12)
    np.testing.assert_array_equal(regressor(x, v, *rng.normal(size=(2, 6)), J) @ np.zeros(N_THETA),
                                  np.zeros(6))


def test_regressor_identity(rng):
    for _ in range(200):
        p = random_params(rng)
        a, b = random_state(rng)
        c, d = rng.normal(size=(2, 6))
        J = grasp_jacobian(rng.normal(size=3) * 0.5)
        Jdot = rng.normal(size=(6, 6)) * 0.1
        M, C, D, g = robot_object_frame_terms(a, b, J, Jdot, p)
        direct = M @ d + C @ c + D @ c + g
        got = regressor(a, b, c, d, J, Jdot) @ theta_from_params(p)
        assert np.linalg.norm(got - direct) < 1e-9 * (1 + np.linalg.norm(c) + np.linalg.norm(d))


def test_theta_round_trip(rng):
    p = random_params(rng)
    q = params_from_theta(theta_from_params(p))
    np.testing.assert_allclose(q.mass_matrix, p.mass_matrix)
    np.testing.assert_allclose(q.restoring, p.restoring)
    assert theta_from_params(p).shape == (N_THETA,)


def test_hydro_params_problems():
    good = HydroParams(np.eye(6), np.ones(6), np.ones(6))
    assert good.problems() == []
    bad = HydroParams(-np.eye(6), -np.ones(6), np.ones(6))
    msgs = " ".join(bad.problems())
    assert "positive definite" in msgs and "non-negative" in msgs
    asym = np.eye(6)
    asym[0, 1] = 1.0
    assert "not symmetric" in HydroParams(asym, np.ones(6), np.ones(6)).problems()[0]


def test_current_velocity_values():
    np.testing.assert_allclose(current_velocity(0.0), [0.0, 0.3], atol=1e-15)
    np.testing.assert_allclose(current_velocity(7.5), [0.3, 0.0], atol=1e-15)
    np.testing.assert_allclose(current_velocity(15.0), [0.0, -0.3], atol=1e-15)
    assert np.array_equal(DisturbanceModel(enabled=False).current_velocity(3.0), np.zeros(2))


def test_disturbance_regressor(rng):
    model = DisturbanceModel()
    J = grasp_jacobian([0.5, -0.5, 0.0])
    np.testing.assert_array_equal(disturbance_regressor(J, 3.0, model) @ np.zeros(4), np.zeros(6))
    D0 = disturbance_regressor(np.eye(6), 0.0, model)
    # sin(0) = 0 on the x columns, cos(0) = 1 on the y columns
    assert D0[0, 0] == 0.0 and D0[5, 2] == 0.0
    assert D0[1, 1] == pytest.approx(-0.3) and D0[5, 3] == pytest.approx(-0.3)
    bound = model.bound()
    for t in np.linspace(0, 300, 3001):
        assert np.linalg.norm(disturbance_regressor(np.eye(6), t, model)) <= bound + 1e-12


@settings(max_examples=50)
@given(st.floats(0, 300), st.lists(st.floats(-100, 100), min_size=4, max_size=4))
def test_external_wrench_is_minus_regressor(t, td):
    model = DisturbanceModel()
    td = np.array(td)
    np.testing.assert_allclose(external_wrench(td, t, model),
                               -disturbance_regressor(np.eye(6), t, model) @ td)
