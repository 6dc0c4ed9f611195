"""Built-in oracle suites behind ``uvmscoop verify``.

Each suite draws random inputs from a seeded generator and compares the
library against an independent oracle.  ``faults`` switches in
deliberately broken variants so the suites can be shown to catch them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics, navigation
from .dynamics import HydroParams, coriolis_matrix, regressor, theta_from_params
from .engine import Plant
from .kinematics import grasp_jacobian, rotation_from_euler

FAULTS = ("coriolis-sign", "gradient-chain")


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def random_params(rng, scale=1.0) -> HydroParams:
    A = rng.normal(size=(6, 6))
    M = scale * (A @ A.T + 6.0 * np.eye(6))
    return HydroParams(M, scale * rng.uniform(1, 5, 6), scale * rng.uniform(0, 3, 6),
                       rng.normal(size=6))


def _coriolis(M, v, faults):
    C = coriolis_matrix(M, v)
    if "coriolis-sign" in faults:
        C[:3, 3:] *= -1.0
    return C


def _nav_gradient(x, world, params, faults):
    if "gradient-chain" not in faults:
        return navigation.nav_gradient(x, world, params)
    L, k = params.length_scale, params.k
    g = navigation.gamma(x, params.goal, L)
    b = navigation.beta(x, world, L)
    dg = navigation.gamma_gradient(x, params.goal, L)
    return (g ** k + b) ** (-1.0 / k - 1.0) * (b * dg)


def skew_symmetry_suite(rng, n=200, faults=()) -> SuiteResult:
    """``z^T (M_dot - 2 C) z = 0`` for object and robot terms (``M`` is constant here)."""
    worst = 0.0
    for _ in range(n):
        p = random_params(rng)
        v = rng.normal(size=6)
        J = grasp_jacobian(rng.normal(size=3) * 0.5)
        z = rng.normal(size=6)
        for C in (_coriolis(p.mass_matrix, v, faults),
                  J.T @ _coriolis(p.mass_matrix, J @ v, faults) @ J):
            worst = max(worst, abs(z @ (-2.0 * C) @ z) / (z @ z))
    return SuiteResult("skew-symmetry", bool(worst < 1e-8), f"max |z'(Mdot-2C)z|/|z|^2 = {worst:.3g}")


def regressor_suite(rng, n=200, faults=()) -> SuiteResult:
    worst = 0.0
    for _ in range(n):
        p = random_params(rng)
        a = np.concatenate([rng.normal(size=3), rng.uniform(-1, 1, 3)])
        b, c, d = rng.normal(size=(3, 6))
        J = grasp_jacobian(rng.normal(size=3) * 0.5)
        M = J.T @ p.mass_matrix @ J
        nu = J @ b
        C = J.T @ _coriolis(p.mass_matrix, nu, faults) @ J
        D = J.T @ dynamics.drag_matrix(p, nu) @ J
        g = J.T @ dynamics.restoring_wrench(p.restoring, a[3:])
        direct = M @ d + C @ c + D @ c + g
        err = np.linalg.norm(regressor(a, b, c, d, J) @ theta_from_params(p) - direct)
        worst = max(worst, err / (1 + np.linalg.norm(c) + np.linalg.norm(d)))
    for _ in range(n):
        model = dynamics.DisturbanceModel()
        t = rng.uniform(0, 300)
        td = rng.normal(size=4)
        J = grasp_jacobian(rng.normal(size=3))
        vcx, vcy = model.current_velocity(t)
        direct = J.T @ np.array([-td[0] * vcx, -td[1] * vcy, 0, 0, 0,
                                 -td[2] * vcx - td[3] * vcy])
        worst = max(worst, np.linalg.norm(dynamics.disturbance_regressor(J, t, model) @ td - direct))
    return SuiteResult("regressor-identity", bool(worst < 1e-9), f"max scaled residual = {worst:.3g}")


def gradient_suite(rng, n=200, faults=()) -> SuiteResult:
    world = navigation.SphereWorld([0, 0, 0], 10.0, [([-2, 1, 0], 1.0), ([3, -2, 0.5], 1.0)],
                                   team_radius=1.0)
    params = navigation.NavParams(goal=[6, 1, 0, 0, 0, 0.5], k=3.0)
    worst, count, h = 0.0, 0, 1e-6
    while count < n:
        x = np.concatenate([rng.uniform(-8, 8, 3), rng.uniform(-1, 1, 3)])
        if not navigation.in_free_space(x, world) or min(world.clearances(x)) < 0.1:
            continue
        count += 1
        g = _nav_gradient(x, world, params, faults)
        fd = np.empty(6)
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            fd[j] = (navigation.nav_potential(x + e, world, params)
                     - navigation.nav_potential(x - e, world, params)) / (2 * h)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-8))
    return SuiteResult("navigation-gradient", bool(worst < 1e-5), f"max relative error = {worst:.3g}")


def newton_suite(rng, n=200, faults=()) -> SuiteResult:
    worst = 0.0
    model = dynamics.DisturbanceModel()
    for _ in range(n):
        obj = random_params(rng)
        robots = [random_params(rng) for _ in range(4)]
        offsets = rng.normal(size=(4, 3)) * 0.5
        plant = Plant(obj, robots, offsets, rng.normal(size=4), rng.normal(size=(4, 4)), model)
        x = np.concatenate([rng.normal(size=3), rng.uniform(-1, 1, 3)])
        v = rng.normal(size=6)
        us = list(rng.normal(size=(4, 6)) * 10)
        t = rng.uniform(0, 300)
        v_dot, lams = plant.accel(x, v, us, t)
        R = rotation_from_euler(x[3:])
        n_O = (_coriolis(obj.mass_matrix, v, faults) @ v + dynamics.drag_matrix(obj, v) @ v
               + np.concatenate([obj.restoring[:3], R.T @ obj.restoring[3:]]))
        lhs = obj.mass_matrix @ v_dot
        rhs = -sum(J.T @ l for J, l in zip(plant.Js, lams)) + plant.object_wrench(t) - n_O
        worst = max(worst, np.linalg.norm(lhs - rhs) / (1 + np.linalg.norm(lhs)))
        # each robot, in its own task space
        for p, J, u, lam, td in zip(robots, plant.Js, us, lams, plant.theta_ds):
            nu, nu_dot = J @ v, J @ v_dot
            lhs = (p.mass_matrix @ nu_dot + _coriolis(p.mass_matrix, nu, faults) @ nu
                   + dynamics.drag_matrix(p, nu) @ nu + dynamics.restoring_wrench(p.restoring, x[3:]))
            rhs = u + lam + dynamics.external_wrench(td, t, model)
            worst = max(worst, np.linalg.norm(lhs - rhs) / (1 + np.linalg.norm(lhs)))
    return SuiteResult("newton-back-substitution", bool(worst < 1e-8), f"max relative residual = {worst:.3g}")


SUITES = (skew_symmetry_suite, regressor_suite, gradient_suite, newton_suite)


def run_all(seed: int = 0, faults=(), n: int = 200) -> list[SuiteResult]:
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown fault(s): {', '.join(sorted(unknown))}")
    return [suite(np.random.default_rng([seed, i]), n=n, faults=tuple(faults))
            for i, suite in enumerate(SUITES)]
