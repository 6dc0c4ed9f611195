import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uvmscoop.errors import OnObstacleBoundary, StuckAtSaddle
from uvmscoop.kinematics import euler_rate_jacobian
from uvmscoop.navigation import (
    NavParams,
    SphereWorld,
    beta,
    beta_gradient,
    gamma,
    in_free_space,
    leader_desired_velocity,
    nav_gradient,
    nav_potential,
    propagate_desired_trajectory,
)

WORLD = SphereWorld([0, 0, 0], 10.0, [([-2, 1, 0], 1.0), ([3, -2, 0.5], 1.0)], team_radius=1.0)
GOAL = np.array([6.0, 1.0, 0.0, 0.0, 0.0, 0.5])


def free_points(rng, n, margin=0.05):
    out = []
    while len(out) < n:
        x = np.concatenate([rng.uniform(-8, 8, 3), rng.uniform(-1, 1, 3)])
        if in_free_space(x, WORLD) and WORLD.clearances(x).min() > margin:
            out.append(x)
    return out


def fd_gradient(f, x, h=1e-6, order=2):
    g = np.empty(6)
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        if order == 2:
            g[j] = (f(x + e) - f(x - e)) / (2 * h)
        else:
            g[j] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return g


def test_gamma_examples():
    goal = np.zeros(6)
    assert gamma(goal, goal) == 0.0
    assert gamma([1, 0, 0, 0, 0, 0], goal) == pytest.approx(1.0)
    assert gamma([1, 1, 0, 0, 0, 0], goal) == pytest.approx(2.0)
    # angles wrap: a full turn is no error
    assert gamma([0, 0, 0, 0, 0, 2 * np.pi], goal) == pytest.approx(0.0, abs=1e-20)


def test_beta_examples():
    empty = SphereWorld([0, 0, 0], 10.0, (), team_radius=1.5)
    assert beta(np.zeros(6), empty) == pytest.approx((10.0 - 1.5) ** 2)
    # a point on the inflated surface of an obstacle
    p = np.array([-2.0, 1.0 + 2.0, 0.0, 0, 0, 0])
    assert beta(p, WORLD) == pytest.approx(0.0, abs=1e-10)
    assert not in_free_space(p + [0, -0.01, 0, 0, 0, 0], WORLD)


def test_beta_positive_iff_geometric_clearance(rng):
    for _ in range(500):
        x = np.concatenate([rng.uniform(-10, 10, 3), np.zeros(3)])
        clear = WORLD.clearances(x).min() > 0
        assert in_free_space(x, WORLD) == clear
        if clear:
            assert beta(x, WORLD) > 0


def test_beta_gradient_fd(rng):
    for x in free_points(rng, 50):
        np.testing.assert_allclose(beta_gradient(x, WORLD), fd_gradient(lambda y: beta(y, WORLD), x),
                                   rtol=1e-6, atol=1e-6)


def test_potential_examples(rng):
    params = NavParams(goal=GOAL, k=5.0)
    assert nav_potential(GOAL, WORLD, params) == 0.0
    on_boundary = np.array([-2.0, 3.0, 0.0, 0, 0, 0])
    assert nav_potential(on_boundary, WORLD, params) == pytest.approx(1.0, abs=1e-9)
    vals = [nav_potential(x, WORLD, params) for x in free_points(rng, 400)]
    assert all(0.0 < v < 1.0 for v in vals)


def test_gradient_at_goal_and_boundary():
    params = NavParams(goal=GOAL, k=5.0)
    np.testing.assert_array_equal(nav_gradient(GOAL, WORLD, params), np.zeros(6))
    np.testing.assert_array_equal(leader_desired_velocity(GOAL, WORLD, params), np.zeros(6))
    with pytest.raises(OnObstacleBoundary):
        nav_gradient([-2.0, 1.0, 0.0, 0, 0, 0], WORLD, params)


# For large k the potential sits within 1e-6 of 1 over most of the space, so
# the h = 1e-6 stencil is swamped by roundoff; a wider 4th-order stencil is used there.
@pytest.mark.parametrize("k, scale, h, order", [(2.0, 1.0, 1e-6, 2), (3.0, 1.0, 1e-6, 2),
                                                (5.0, 10.0, 1e-4, 4)])
def test_gradient_matches_finite_differences(rng, k, scale, h, order):
    params = NavParams(goal=GOAL, k=k, length_scale=scale)
    for x in free_points(rng, 200):
        g = nav_gradient(x, WORLD, params)
        fd = fd_gradient(lambda y: nav_potential(y, WORLD, params), x, h, order)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


def test_gradient_symmetry_on_goal_obstacle_axis():
    world = SphereWorld([0, 0, 0], 10.0, [([4, 0, 0], 1.0)], team_radius=0.5)
    params = NavParams(goal=np.zeros(6), k=5.0)
    # boundary of the inflated obstacle at x = 2.5 and x = 5.5
    for x, away in ((2.4, -1.0), (5.6, +1.0)):
        flow = -nav_gradient([x, 0, 0, 0, 0, 0], world, params)
        assert flow[1] == 0.0 and flow[2] == 0.0
        assert np.sign(flow[0]) == away


def test_leader_velocity_level_orientation(rng):
    params = NavParams(goal=GOAL, k=3.0, gain=2.5)
    for x in free_points(rng, 20):
        x[3:] = 0.0
        v = leader_desired_velocity(x, WORLD, params)
        np.testing.assert_allclose(v[:3], -2.5 * nav_gradient(x, WORLD, params)[:3])


def test_leader_velocity_descends(rng):
    params = NavParams(goal=GOAL, k=3.0)
    for x in free_points(rng, 200):
        v = leader_desired_velocity(x, WORLD, params)
        xdot = euler_rate_jacobian(x[3:]) @ v
        assert nav_gradient(x, WORLD, params) @ xdot < 0


def test_trajectory_at_goal_is_constant():
    params = NavParams(goal=GOAL, k=3.0)
    tr = propagate_desired_trajectory(GOAL, WORLD, params, 0.1, 5.0)
    assert np.array_equal(tr.pose, np.tile(GOAL, (51, 1)))
    assert not tr.twist.any() and not tr.accel.any()


def test_two_obstacle_flow_reaches_goal():
    params = NavParams(goal=GOAL, k=2.0, gain=20.0)
    tr = propagate_desired_trajectory([-7, -1, 0, 0, 0, 0], WORLD, params, 0.1, 200.0, substeps=2)
    assert gamma(tr.pose[-1], GOAL) < 1e-2
    assert min(beta(x, WORLD) for x in tr.pose) > 0
    assert min(WORLD.clearances(x).min() for x in tr.pose) > 0
    assert np.all(np.diff(tr.potential) <= 1e-12)


def test_saddle_detection_and_resolution():
    world = SphereWorld([0, 0, 0], 10.0, [([0, 0, 0], 1.0)], team_radius=0.5)
    params = NavParams(goal=[4, 0, 0, 0, 0, 0], k=1.1, gain=5.0)
    # goal straight behind the obstacle: the flow stalls on the axis
    with pytest.raises(StuckAtSaddle) as info:
        propagate_desired_trajectory([-4, 0, 0, 0, 0, 0], world, params, 0.1, 400.0)
    assert info.value.t > 0
    ok = NavParams(goal=[4, 0, 0, 0, 0, 0], k=2.0, gain=5.0)
    tr = propagate_desired_trajectory([-4, 0.3, 0, 0, 0, 0], world, ok, 0.1, 200.0)
    assert gamma(tr.pose[-1], ok.goal) < 1e-2


def test_world_problems():
    assert WORLD.problems() == []
    close = SphereWorld([0, 0, 0], 10.0, [([0, 0, 0], 1.0), ([2.5, 0, 0], 1.0)], team_radius=0.5)
    assert any("gap" in m for m in close.problems())


@settings(max_examples=100)
@given(st.floats(-9, 9), st.floats(-9, 9), st.floats(-2, 2))
def test_potential_in_unit_interval(x, y, yaw):
    p = np.array([x, y, 0.0, 0.0, 0.0, yaw])
    v = nav_potential(p, WORLD, NavParams(goal=GOAL, k=3.0))
    assert 0.0 <= v <= 1.0
