"""Adaptive impedance control law run by every robot of the team.

All quantities are expressed in object coordinates.  Leader and followers
execute the same functions; they only differ in where the reference
``(x_d, v_d, a_d)`` comes from.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import N_THETA, N_THETA_D
from .errors import RankDeficientJacobian


def _spd(name, A, out):
    A = np.asarray(A)
    if A.shape != (6, 6) or not np.all(np.isfinite(A)):
        out.append(f"{name} must be a finite 6x6 matrix")
    elif not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
        out.append(f"{name} is not symmetric")
    elif np.linalg.eigvalsh(A).min() <= 0:
        out.append(f"{name} is not positive definite")


@dataclass(frozen=True)
class ImpedanceGains:
    """Gain set of one robot.

    ``M_d``, ``F`` and ``Y`` fix the robot-level impedance:
    ``D_d = M_d (F + Y)`` and ``K_d = M_d Y F``, so ``K_g = F + Y`` and
    ``K_p = Y F`` hold by construction (constant ``F``).  ``F`` and ``Y``
    are diagonal; ``Gamma`` and ``Gamma_d`` are given by their diagonals.
    """
    M_dO: np.ndarray
    D_dO: np.ndarray
    K_dO: np.ndarray
    M_d: np.ndarray
    F: np.ndarray
    Y: np.ndarray
    K: np.ndarray
    Gamma: np.ndarray
    Gamma_d: np.ndarray
    lambda_int: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        for name in ("M_dO", "D_dO", "K_dO", "M_d", "F", "Y", "K"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "Gamma", np.asarray(self.Gamma, dtype=float).reshape(-1))
        object.__setattr__(self, "Gamma_d", np.asarray(self.Gamma_d, dtype=float).reshape(-1))
        object.__setattr__(self, "lambda_int", np.asarray(self.lambda_int, dtype=float).reshape(6))

    @property
    def K_f(self) -> np.ndarray:
        return np.linalg.inv(self.M_d)

    @property
    def K_g(self) -> np.ndarray:
        return self.F + self.Y

    @property
    def K_p(self) -> np.ndarray:
        return self.Y @ self.F

    @property
    def D_d(self) -> np.ndarray:
        return self.M_d @ self.K_g

    @property
    def K_d(self) -> np.ndarray:
        return self.M_d @ self.K_p

    def problems(self) -> list[str]:
        out = []
        for name in ("M_dO", "D_dO", "K_dO", "M_d", "F", "Y", "K"):
            _spd(name, getattr(self, name), out)
        for name in ("F", "Y"):
            A = getattr(self, name)
            if A.shape == (6, 6) and np.any(A - np.diag(np.diag(A))):
                out.append(f"{name} must be diagonal")
        if not out:
            _spd("D_d = M_d (F + Y)", self.D_d, out)
            _spd("K_d = M_d Y F", self.K_d, out)
        if self.Gamma.shape != (N_THETA,) or np.any(self.Gamma <= 0):
            out.append(f"Gamma must hold {N_THETA} positive diagonal entries")
        if self.Gamma_d.shape != (N_THETA_D,) or np.any(self.Gamma_d <= 0):
            out.append(f"Gamma_d must hold {N_THETA_D} positive diagonal entries")
        return out


@dataclass(frozen=True)
class ControllerState:
    theta_hat: np.ndarray
    theta_d_hat: np.ndarray
    f: np.ndarray


def _inv_T(J):
    J = np.asarray(J, dtype=float)
    s = np.linalg.svd(J, compute_uv=False)
    if s[-1] <= 1e-9 * s[0]:
        raise RankDeficientJacobian(f"grasp Jacobian singular (sigma_min={s[-1]:.3g})")
    return np.linalg.inv(J).T


def y_cmd(a_d, v_tilde, e_tilde, gains: ImpedanceGains) -> np.ndarray:
    """Object-level impedance command ``a_d + M_dO^-1 (-D_dO v~ - K_dO e~)``."""
    rhs = -gains.D_dO @ v_tilde - gains.K_dO @ e_tilde
    return np.asarray(a_d, dtype=float) + np.linalg.solve(gains.M_dO, rhs)


def desired_wrench(M_Oi, n_Oi, y, lam_e_hat, J, lambda_int) -> np.ndarray:
    """Desired interaction wrench ``lambda_i^d`` (object on robot, as ``lambda_i``).

    If every robot realizes it and the estimates are exact, the robots push
    the object with ``M_O y + n_O - lambda_e`` in total, so ``v_O_dot = y``.
    ``n_Oi`` is the robot's share of ``C_O v_O + D_O v_O + g_O``.
    """
    inner = M_Oi @ y + n_Oi - lam_e_hat
    return np.asarray(lambda_int, dtype=float) - _inv_T(J) @ inner


def force_filter_rate(f, lam_d, J, gains: ImpedanceGains) -> np.ndarray:
    return -gains.Y @ f + gains.K_f @ (np.asarray(J).T @ lam_d)


def force_filter_step(f, lam_d, J, gains: ImpedanceGains, dt: float) -> np.ndarray:
    """Trapezoidal update of ``f_dot + Y f = K_f J^T lam_d`` with the input held over ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    I = np.eye(6)
    w = gains.K_f @ (np.asarray(J).T @ lam_d)
    rhs = (I - 0.5 * dt * gains.Y) @ f + dt * w
    return np.linalg.solve(I + 0.5 * dt * gains.Y, rhs)


def auxiliary_z(v_tilde, e_tilde, f, F) -> np.ndarray:
    """``z = v~ + F e~ - f``, identical to ``v_O - v_r``."""
    return np.asarray(v_tilde) + np.asarray(F) @ e_tilde - np.asarray(f)


def reference_velocity(v_d, a_d, e_tilde, e_tilde_dot, f, f_dot, F):
    """Reference twist ``v_r = v_d - F e~ + f`` and its time derivative."""
    F = np.asarray(F)
    v_r = np.asarray(v_d) - F @ e_tilde + f
    a_r = np.asarray(a_d) - F @ e_tilde_dot + f_dot
    return v_r, a_r


def control_input(lam, Omega, Delta, state: ControllerState, z, gains: ImpedanceGains, J) -> np.ndarray:
    """Task-space wrench ``u = -lam + J^-T (Omega th^ + Delta thd^ - K z)``."""
    inner = Omega @ state.theta_hat + Delta @ state.theta_d_hat - gains.K @ z
    return -np.asarray(lam, dtype=float) + _inv_T(J) @ inner


def adapt_step(state: ControllerState, Omega, Delta, z, gains: ImpedanceGains, dt: float,
               bounds=None) -> ControllerState:
    """Explicit Euler step of the gradient update laws.

    ``bounds`` optionally gives ``(lower, upper)`` arrays for a box
    projection of ``theta_hat``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    th = state.theta_hat - dt * gains.Gamma * (Omega.T @ z)
    thd = state.theta_d_hat - dt * gains.Gamma_d * (Delta.T @ z)
    if bounds is not None:
        th = np.clip(th, bounds[0], bounds[1])
    return replace(state, theta_hat=th, theta_d_hat=thd)


def lyapunov_value(zs, Ms, theta_tildes, theta_d_tildes, gains_list) -> float:
    """Sum of ``z^T M z / 2`` plus the weighted parameter errors over all robots."""
    V = 0.0
    for z, M, tt, ttd, g in zip(zs, Ms, theta_tildes, theta_d_tildes, gains_list):
        V += 0.5 * z @ M @ z + 0.5 * tt @ (tt / g.Gamma) + 0.5 * ttd @ (ttd / g.Gamma_d)
    return float(V)


def impedance_error(v_tilde_dot, v_tilde, e_tilde, lam_d, J, gains: ImpedanceGains) -> np.ndarray:
    """Robot impedance residual ``M_d v~' + D_d v~ + K_d e~ - J^T lam_d``."""
    return (gains.M_d @ v_tilde_dot + gains.D_d @ v_tilde + gains.K_d @ e_tilde
            - np.asarray(J).T @ lam_d)
