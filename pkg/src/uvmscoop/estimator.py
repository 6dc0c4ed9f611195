"""Prescribed-performance estimate of the object's desired trajectory.

A follower never sees the leader's reference.  It integrates

    xhat_dot_j = k_j ln((1 + e_j / rho_j) / (1 - e_j / rho_j)),   e = x_O - xhat

which keeps every error component inside a shrinking envelope
``|e_j| < rho_j(t)``, and uses ``xhat`` with its first two derivatives as
its own reference.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import EnvelopeViolation
from .kinematics import body_rate_matrix_dot, euler_rate_matrix, inverse_euler_rate_jacobian, wrap_angle


@dataclass(frozen=True)
class PerformanceFunction:
    rho_0: float
    rho_inf: float
    lam: float

    def problems(self) -> list[str]:
        out = []
        if not self.rho_0 > self.rho_inf > 0:
            out.append("performance function needs rho_0 > rho_inf > 0")
        if not self.lam > 0:
            out.append("performance decay rate must be positive")
        return out

    def rho(self, t: float) -> float:
        return (self.rho_0 - self.rho_inf) * np.exp(-self.lam * t) + self.rho_inf

    def rho_dot(self, t: float) -> float:
        return -self.lam * (self.rho_0 - self.rho_inf) * np.exp(-self.lam * t)


def rho(perf: PerformanceFunction, t: float) -> float:
    return perf.rho(t)


@dataclass(frozen=True)
class EstimatorState:
    x_hat: np.ndarray
    k_gains: np.ndarray
    perf: tuple
    t: float = 0.0

    def rhos(self, t=None) -> np.ndarray:
        t = self.t if t is None else t
        return np.array([p.rho(t) for p in self.perf])

    def rho_dots(self, t=None) -> np.ndarray:
        t = self.t if t is None else t
        return np.array([p.rho_dot(t) for p in self.perf])


def estimator_init(x_O, k_gains, rho_inf, lam, floor: float = 0.5, x_hat=None) -> EstimatorState:
    """Start at the observed pose (or ``x_hat``) with ``rho_0 = max(2 |e(0)|, floor)``.

    ``floor`` must exceed ``rho_inf`` on every axis.
    """
    x_O = np.asarray(x_O, dtype=float).reshape(6)
    x_hat = x_O.copy() if x_hat is None else np.asarray(x_hat, dtype=float).reshape(6)
    e0 = pose_difference(x_O, x_hat)
    rho_inf = np.broadcast_to(np.asarray(rho_inf, dtype=float), (6,))
    floor = np.broadcast_to(np.asarray(floor, dtype=float), (6,))
    perf = tuple(PerformanceFunction(float(max(2 * abs(e), f)), float(ri), float(lam))
                 for e, f, ri in zip(e0, floor, rho_inf))
    k = np.broadcast_to(np.asarray(k_gains, dtype=float), (6,)).copy()
    return EstimatorState(x_hat, k, perf, 0.0)


def pose_difference(x, y) -> np.ndarray:
    """Componentwise ``x - y`` with the Euler part wrapped to (-pi, pi]."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    d[3:] = wrap_angle(d[3:])
    return d


def _ratios(e, t, state: EstimatorState):
    r = state.rhos(t)
    ratio = np.asarray(e, dtype=float) / r
    worst = int(np.argmax(np.abs(ratio)))
    if not abs(ratio[worst]) < 1.0:
        raise EnvelopeViolation(
            f"estimation error left its envelope on axis {worst} at t={t:.3f} s "
            f"(|e|/rho = {abs(ratio[worst]):.4f})",
            t=t, axis=worst, ratio=float(abs(ratio[worst])))
    return ratio, r


def estimator_rate(e, t: float, state: EstimatorState) -> np.ndarray:
    ratio, _ = _ratios(e, t, state)
    # ln((1 + r) / (1 - r)) == 2 artanh(r), which stays accurate for tiny r
    return 2.0 * state.k_gains * np.arctanh(ratio)


def estimator_accel(e, e_dot, t: float, state: EstimatorState) -> np.ndarray:
    ratio, r = _ratios(e, t, state)
    r_dot = state.rho_dots(t)
    e = np.asarray(e, dtype=float)
    e_dot = np.asarray(e_dot, dtype=float)
    return 2.0 * state.k_gains / (1.0 - ratio ** 2) * (e_dot * r - e * r_dot) / r ** 2


def implicit_error(e_pred, rho_next, k, dt, tol=1e-14, max_iter=100):
    """Solve ``e = e_pred - 2 dt k artanh(e / rho_next)`` for ``e`` per axis.

    This is the backward Euler step of the estimator error.  With
    ``e = rho tanh(s)`` the equation becomes ``rho tanh(s) + 2 dt k s = e_pred``,
    whose left side increases strictly from -inf to inf, so the root exists,
    is unique and always satisfies ``|e| < rho_next`` whatever ``dt``.
    Safeguarded Newton on ``s`` inside the bracket
    ``[(e_pred - rho) / (2 dt k), (e_pred + rho) / (2 dt k)]``.
    """
    e_pred = np.asarray(e_pred, dtype=float)
    r = np.asarray(rho_next, dtype=float)
    a = 2.0 * dt * np.asarray(k, dtype=float)
    lo, hi = (e_pred - r) / a, (e_pred + r) / a
    s = np.clip(np.arctanh(np.clip(e_pred / r, -0.5, 0.5)), lo, hi)
    for _ in range(max_iter):
        th = np.tanh(s)
        g = r * th + a * s - e_pred
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        step = g / (r * (1.0 - th * th) + a)
        s_new = s - step
        bad = (s_new <= lo) | (s_new >= hi)
        s_new = np.where(bad, 0.5 * (lo + hi), s_new)
        if np.all(np.abs(s_new - s) <= tol * (1.0 + np.abs(s))):
            s = s_new
            break
        s = s_new
    return r * np.tanh(s)


def follower_reference(state: EstimatorState, x_O, v_O, dt: float):
    """One control step of the estimator.

    Returns ``(new_state, x_hat, v_d, a_d)`` where ``x_hat`` is the estimate
    at the current time (before the update), ``v_d`` its twist and ``a_d``
    the twist derivative, both obtained with the object's own orientation.

    The estimate is advanced with backward Euler against the object pose
    extrapolated over ``dt``: the barrier term is stiff next to the
    envelope, and an explicit step can jump across it when ``dt k / rho``
    is not small.

    Raises:
      EnvelopeViolation: if some ``|e_j| >= rho_j(t)``.
      SingularOrientation: near the Euler singularity.
    """
    x_O = np.asarray(x_O, dtype=float).reshape(6)
    v_O = np.asarray(v_O, dtype=float).reshape(6)
    t = state.t
    e = pose_difference(x_O, state.x_hat)
    xhat_dot = estimator_rate(e, t, state)
    E = euler_rate_matrix(x_O[3:])
    x_O_dot = np.concatenate([v_O[:3], E @ v_O[3:]])
    xhat_ddot = estimator_accel(e, x_O_dot - xhat_dot, t, state)
    Jinv = inverse_euler_rate_jacobian(x_O[3:])
    v_d = Jinv @ xhat_dot
    Jinv_dot = np.zeros((6, 6))
    Jinv_dot[3:, 3:] = body_rate_matrix_dot(x_O[3:], x_O_dot[3:])
    a_d = Jinv @ xhat_ddot + Jinv_dot @ xhat_dot
    x_pred = x_O + dt * x_O_dot
    e_next = implicit_error(pose_difference(x_pred, state.x_hat), state.rhos(t + dt),
                            state.k_gains, dt)
    x_hat_next = state.x_hat + pose_difference(x_pred - e_next, state.x_hat)
    new = replace(state, x_hat=x_hat_next, t=t + dt)
    return new, state.x_hat.copy(), v_d, a_d
