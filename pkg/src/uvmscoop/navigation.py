"""Sphere-world navigation function and the leader's reference generator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OnObstacleBoundary, StuckAtSaddle
from .kinematics import inverse_euler_rate_jacobian, wrap_angle


@dataclass(frozen=True)
class Obstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class SphereWorld:
    """Spherical workspace with spherical obstacles.

    ``team_radius`` is the radius of the ball around the object frame that
    covers the object and every robot; the boundary and the obstacles are
    inflated by it so the object frame can be treated as a point.
    """
    center: np.ndarray
    radius: float
    obstacles: tuple = ()
    team_radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        obs = tuple(o if isinstance(o, Obstacle) else Obstacle(*o) for o in self.obstacles)
        object.__setattr__(self, "obstacles", obs)

    def problems(self) -> list[str]:
        out = []
        R = self.team_radius
        if self.radius <= R:
            out.append("workspace radius must exceed the team radius")
        for m, o in enumerate(self.obstacles):
            if o.radius <= 0:
                out.append(f"obstacle {m}: radius must be positive")
            if np.linalg.norm(o.center - self.center) + o.radius >= self.radius:
                out.append(f"obstacle {m}: not strictly inside the workspace")
        for m in range(len(self.obstacles)):
            for n in range(m + 1, len(self.obstacles)):
                a, b = self.obstacles[m], self.obstacles[n]
                gap = np.linalg.norm(a.center - b.center) - a.radius - b.radius
                if gap <= 2.0 * R:
                    out.append(
                        f"obstacles {m} and {n}: gap {gap:.3f} m does not exceed "
                        f"twice the team radius ({2 * R:.3f} m)")
        return out

    def clearances(self, p) -> np.ndarray:
        """Signed distances of the team ball to the boundary and each obstacle."""
        p = np.asarray(p, dtype=float)[:3]
        R = self.team_radius
        d = [self.radius - np.linalg.norm(p - self.center) - R]
        d += [np.linalg.norm(p - o.center) - o.radius - R for o in self.obstacles]
        return np.array(d)


@dataclass(frozen=True)
class NavParams:
    """Navigation-function parameters.

    ``length_scale`` divides positions before the potential is evaluated;
    with the workspace radius as scale the potential is dimensionless and
    its gradient keeps a usable magnitude over the whole workspace.
    """
    goal: np.ndarray
    k: float = 5.0
    gain: float = 1.0
    length_scale: float = 1.0
    goal_tolerance: float = 1e-2
    saddle_gradient: float = 1e-6
    saddle_window: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float).reshape(6))

    def problems(self) -> list[str]:
        out = []
        if not self.k > 1:
            out.append("nav.k must be > 1")
        if not self.gain > 0:
            out.append("nav.gain must be > 0")
        if not self.length_scale > 0:
            out.append("nav.length_scale must be > 0")
        return out


def _nav_error(x, goal, length_scale):
    x = np.asarray(x, dtype=float).reshape(6)
    goal = np.asarray(goal, dtype=float).reshape(6)
    e = np.empty(6)
    e[:3] = (x[:3] - goal[:3]) / length_scale
    e[3:] = wrap_angle(x[3:] - goal[3:])
    return e


def gamma(x_O, goal, length_scale: float = 1.0) -> float:
    """Attractive term: squared pose distance to the goal."""
    e = _nav_error(x_O, goal, length_scale)
    return float(e @ e)


def gamma_gradient(x_O, goal, length_scale: float = 1.0) -> np.ndarray:
    e = _nav_error(x_O, goal, length_scale)
    g = 2.0 * e
    g[:3] /= length_scale
    return g


def _beta_factors(p, world: SphereWorld, length_scale):
    L2 = length_scale ** 2
    R = world.team_radius
    f = [((world.radius - R) ** 2 - np.sum((p - world.center) ** 2)) / L2]
    grads = [-2.0 * (p - world.center) / L2]
    for o in world.obstacles:
        f.append((np.sum((p - o.center) ** 2) - (o.radius + R) ** 2) / L2)
        grads.append(2.0 * (p - o.center) / L2)
    return np.array(f), np.array(grads)


def beta(x_O, world: SphereWorld, length_scale: float = 1.0) -> float:
    """Repulsive term: product of inflated boundary and obstacle functions."""
    p = np.asarray(x_O, dtype=float)[:3]
    f, _ = _beta_factors(p, world, length_scale)
    return float(np.prod(f))


def beta_gradient(x_O, world: SphereWorld, length_scale: float = 1.0) -> np.ndarray:
    p = np.asarray(x_O, dtype=float)[:3]
    f, grads = _beta_factors(p, world, length_scale)
    others = np.array([np.prod(np.delete(f, j)) for j in range(len(f))])
    g = np.zeros(6)
    g[:3] = others @ grads
    return g


def in_free_space(x_O, world: SphereWorld, length_scale: float = 1.0) -> bool:
    p = np.asarray(x_O, dtype=float)[:3]
    f, _ = _beta_factors(p, world, length_scale)
    return bool(np.all(f > 0))


def nav_potential(x_O, world: SphereWorld, params: NavParams) -> float:
    """Navigation potential in [0, 1]; 1 on (and beyond) inflated boundaries."""
    L = params.length_scale
    if not in_free_space(x_O, world, L):
        return 1.0
    g = gamma(x_O, params.goal, L)
    b = beta(x_O, world, L)
    # mathematically <= 1; clip the last-ulp overshoot next to a boundary
    return float(min(g / (g ** params.k + b) ** (1.0 / params.k), 1.0))


def nav_gradient(x_O, world: SphereWorld, params: NavParams) -> np.ndarray:
    """Analytic gradient of :func:`nav_potential` w.r.t. the six pose coordinates.

    Raises:
      OnObstacleBoundary: outside the (inflated) free space.
    """
    L = params.length_scale
    k = params.k
    if not in_free_space(x_O, world, L):
        raise OnObstacleBoundary(f"pose {np.asarray(x_O)[:3]} is not in the free space")
    g = gamma(x_O, params.goal, L)
    b = beta(x_O, world, L)
    dg = gamma_gradient(x_O, params.goal, L)
    db = beta_gradient(x_O, world, L)
    return (g ** k + b) ** (-1.0 / k - 1.0) * (b * dg - (g / k) * db)


def leader_desired_velocity(x_O, world: SphereWorld, params: NavParams) -> np.ndarray:
    """Desired object twist ``-K_NF J_O^{-1} grad(phi)``."""
    Jinv = inverse_euler_rate_jacobian(np.asarray(x_O, dtype=float)[3:])
    return -params.gain * (Jinv @ nav_gradient(x_O, world, params))


@dataclass
class DesiredTrajectory:
    t: np.ndarray
    pose: np.ndarray
    twist: np.ndarray
    accel: np.ndarray
    potential: np.ndarray = field(default=None)

    def sample(self, k: int):
        """Reference at grid index ``k``; holds the final pose at rest beyond the end."""
        if k < len(self.t):
            return self.pose[k], self.twist[k], self.accel[k]
        return self.pose[-1], np.zeros(6), np.zeros(6)

    def to_csv(self, path) -> None:
        cols = (["t"] + [f"x{i}" for i in range(6)] + [f"v{i}" for i in range(6)]
                + [f"a{i}" for i in range(6)])
        data = np.column_stack([self.t, self.pose, self.twist, self.accel])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def propagate_desired_trajectory(x0, world: SphereWorld, params: NavParams, dt: float,
                                 T: float, substeps: int = 10) -> DesiredTrajectory:
    """Integrate the gradient flow ``x_dot = J_O v_d = -K_NF grad(phi)`` with RK4.

    Samples are returned on the grid ``k * dt``; ``accel`` is the central
    finite difference of the sampled twist.

    Raises:
      OnObstacleBoundary: if ``x0`` is not in the free space.
      StuckAtSaddle: if the gradient vanishes away from the goal for longer
        than ``params.saddle_window`` seconds.
    """
    x = np.asarray(x0, dtype=float).reshape(6).copy()
    n = int(round(T / dt))
    h = dt / substeps

    def flow(y):
        return -params.gain * nav_gradient(y, world, params)

    poses = np.empty((n + 1, 6))
    twists = np.empty((n + 1, 6))
    phis = np.empty(n + 1)
    stuck_since = None
    for k in range(n + 1):
        poses[k] = x
        twists[k] = leader_desired_velocity(x, world, params)
        phis[k] = nav_potential(x, world, params)
        grad_norm = np.linalg.norm(nav_gradient(x, world, params))
        far = gamma(x, params.goal, params.length_scale) > params.goal_tolerance
        if far and grad_norm < params.saddle_gradient:
            stuck_since = k * dt if stuck_since is None else stuck_since
            if k * dt - stuck_since >= params.saddle_window:
                raise StuckAtSaddle(
                    f"navigation gradient vanished away from the goal at t={stuck_since:.2f} s",
                    t=stuck_since)
        else:
            stuck_since = None
        if k == n:
            break
        for _ in range(substeps):
            k1 = flow(x)
            k2 = flow(x + 0.5 * h * k1)
            k3 = flow(x + 0.5 * h * k2)
            k4 = flow(x + h * k3)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    t = dt * np.arange(n + 1)
    accel = np.gradient(twists, dt, axis=0) if n > 1 else np.zeros_like(twists)
    return DesiredTrajectory(t, poses, twists, accel, phis)
