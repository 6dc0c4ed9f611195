"""Hydrodynamic rigid-body models in object coordinates.

Every body (the object and each robot end-effector) is a 6-DoF marine-craft
style model

    M v_dot + C(v) v + D(v) v + g(eta) + d(t) = tau

with constant added+rigid mass ``M``, the skew-symmetric Coriolis
factorisation of ``M``, diagonal linear plus quadratic drag and a restoring
wrench whose moment part is resolved in the body frame.  The unknown
parameters are collected in a flat vector laid out as::

    [upper triangle of M (21, row-major), drag_linear (6), drag_quadratic (6), restoring (6)]

so a regressor built from the same layout reproduces the dynamics exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import RankDeficientJacobian
from .kinematics import rotation_from_euler

N_MASS = 21
N_THETA = N_MASS + 18
N_THETA_D = 4

_TRIU = np.triu_indices(6)
_MASS_BASIS = np.zeros((N_MASS, 6, 6))
for _k, (_r, _s) in enumerate(zip(*_TRIU)):
    _MASS_BASIS[_k, _r, _s] = 1.0
    _MASS_BASIS[_k, _s, _r] = 1.0


@dataclass(frozen=True)
class HydroParams:
    mass_matrix: np.ndarray
    drag_linear: np.ndarray
    drag_quadratic: np.ndarray
    restoring: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "mass_matrix", np.asarray(self.mass_matrix, dtype=float).reshape(6, 6))
        for name in ("drag_linear", "drag_quadratic", "restoring"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(6))

    def problems(self) -> list[str]:
        """Return human readable admissibility violations (empty if valid)."""
        out = []
        M = self.mass_matrix
        if not np.allclose(M, M.T, atol=1e-9 * max(1.0, np.abs(M).max())):
            out.append("mass_matrix is not symmetric")
        elif np.linalg.eigvalsh(0.5 * (M + M.T)).min() <= 0.0:
            out.append("mass_matrix is not positive definite")
        if np.any(self.drag_linear < 0) or np.any(self.drag_quadratic < 0):
            out.append("drag coefficients must be non-negative")
        arrays = (M, self.drag_linear, self.drag_quadratic, self.restoring)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            out.append("non-finite hydrodynamic parameter")
        return out


def theta_from_params(p: HydroParams) -> np.ndarray:
    return np.concatenate([p.mass_matrix[_TRIU], p.drag_linear, p.drag_quadratic, p.restoring])


def params_from_theta(theta) -> HydroParams:
    theta = np.asarray(theta, dtype=float).reshape(N_THETA)
    M = np.tensordot(theta[:N_MASS], _MASS_BASIS, axes=1)
    # the basis sets both (r, s) and (s, r), so the diagonal is counted once
    return HydroParams(M, theta[21:27], theta[27:33], theta[33:39])


class BodyTerms(NamedTuple):
    M: np.ndarray
    Cv: np.ndarray
    Dv: np.ndarray
    g: np.ndarray


def coriolis_matrix(M, v) -> np.ndarray:
    """Skew-symmetric Coriolis/centripetal matrix generated by ``M`` at ``v``."""
    h = np.asarray(M) @ np.asarray(v)
    S1 = _skew(h[:3])
    S2 = _skew(h[3:])
    C = np.zeros((6, 6))
    C[:3, 3:] = -S1
    C[3:, :3] = -S1
    C[3:, 3:] = -S2
    return C


def _cross(a, b):
    # np.cross carries heavy per-call overhead for single 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def coriolis_times(M, v, c) -> np.ndarray:
    """``coriolis_matrix(M, v) @ c`` without forming the matrix."""
    h = M @ v
    out = np.empty(6)
    out[:3] = _cross(c[3:], h[:3])
    out[3:] = _cross(c[:3], h[:3]) + _cross(c[3:], h[3:])
    return out


def _skew(x):
    return np.array([[0.0, -x[2], x[1]], [x[2], 0.0, -x[0]], [-x[1], x[0], 0.0]])


def drag_matrix(p: HydroParams, v) -> np.ndarray:
    return np.diag(p.drag_linear + p.drag_quadratic * np.abs(v))


def restoring_wrench(restoring, euler) -> np.ndarray:
    """Force kept in the world frame, moment resolved in the body frame."""
    restoring = np.asarray(restoring, dtype=float)
    R = rotation_from_euler(euler)
    return np.concatenate([restoring[:3], R.T @ restoring[3:]])


def object_terms(x_O, v_O, p: HydroParams) -> BodyTerms:
    """Inertia, Coriolis, drag and restoring terms of the object."""
    x_O = np.asarray(x_O, dtype=float).reshape(6)
    v = np.asarray(v_O, dtype=float).reshape(6)
    M = p.mass_matrix
    return BodyTerms(
        M,
        coriolis_times(M, v, v),
        (p.drag_linear + p.drag_quadratic * np.abs(v)) * v,
        restoring_wrench(p.restoring, x_O[3:]),
    )


def _check_rank(J, tol=1e-9):
    s = np.linalg.svd(J, compute_uv=False)
    if s[-1] <= tol * s[0]:
        raise RankDeficientJacobian(f"grasp Jacobian singular (sigma_min={s[-1]:.3g})")


def robot_object_frame_terms(x_O, v_O, J, Jdot, p: HydroParams):
    """Robot task-space terms expressed in object coordinates.

    Returns ``(M_i, C_i, D_i, g_i)`` with
    ``M_i = J^T M J``, ``C_i = J^T (C(Jv) J + M Jdot)``, ``D_i = J^T D(Jv) J``
    and ``g_i = J^T g``.
    """
    J = np.asarray(J, dtype=float)
    Jdot = np.zeros((6, 6)) if Jdot is None else np.asarray(Jdot, dtype=float)
    _check_rank(J)
    x_O = np.asarray(x_O, dtype=float).reshape(6)
    nu = J @ np.asarray(v_O, dtype=float).reshape(6)
    Mv = p.mass_matrix
    M = J.T @ Mv @ J
    C = J.T @ (coriolis_matrix(Mv, nu) @ J + Mv @ Jdot)
    D = J.T @ drag_matrix(p, nu) @ J
    g = J.T @ restoring_wrench(p.restoring, x_O[3:])
    return M, C, D, g


def regressor(a, b, c, d, J=None, Jdot=None) -> np.ndarray:
    """Regressor ``Omega`` (6 x 39) with

        Omega @ theta == M(a) d + C(a, b) c + D(a, b) c + g(a)

    for the body whose parameters are ``theta`` and whose task-space twist is
    ``J @ (object twist)``.  ``a`` is the object pose, ``b`` the object twist
    at which C and D are evaluated, ``c`` and ``d`` arbitrary 6-vectors.
    """
    a = np.asarray(a, dtype=float).reshape(6)
    J = np.eye(6) if J is None else np.asarray(J, dtype=float)
    nu = J @ np.asarray(b, dtype=float).reshape(6)
    cc = J @ np.asarray(c, dtype=float).reshape(6)
    dd = J @ np.asarray(d, dtype=float).reshape(6)
    if Jdot is not None:
        dd = dd + np.asarray(Jdot, dtype=float) @ np.asarray(c, dtype=float).reshape(6)

    W = np.empty((6, N_THETA))
    # inertia + Coriolis columns: both are linear in the entries of M
    inertia = _MASS_BASIS @ dd                     # (21, 6)
    h = _MASS_BASIS @ nu                           # (21, 6)
    cor = np.empty((N_MASS, 6))
    cor[:, :3] = np.cross(cc[3:], h[:, :3])
    cor[:, 3:] = np.cross(cc[:3], h[:, :3]) + np.cross(cc[3:], h[:, 3:])
    W[:, :N_MASS] = (inertia + cor).T
    W[:, 21:27] = np.diag(cc)
    W[:, 27:33] = np.diag(np.abs(nu) * cc)
    G = np.eye(6)
    G[3:, 3:] = rotation_from_euler(a[3:]).T
    W[:, 33:39] = G
    return J.T @ W


@dataclass(frozen=True)
class DisturbanceModel:
    """Slowly varying horizontal sea current.

    The current wrench on a body is linear in four unknown coefficients
    ``theta_d = (X, Y, N_x, N_y)``: surge/sway forces ``X v_cx``, ``Y v_cy``
    and a yaw moment ``N_x v_cx + N_y v_cy``.
    """
    current_amplitude: tuple = (0.3, 0.3)
    current_frequency: float = np.pi / 15.0
    enabled: bool = True

    def current_velocity(self, t: float) -> np.ndarray:
        if not self.enabled:
            return np.zeros(2)
        ax, ay = self.current_amplitude
        w = self.current_frequency
        return np.array([ax * np.sin(w * t), ay * np.cos(w * t)])

    def bound(self) -> float:
        """Upper bound of the Frobenius norm of the body-level regressor."""
        if not self.enabled:
            return 0.0
        return float(np.sqrt(2.0) * np.hypot(*self.current_amplitude))


def current_velocity(t: float, model: DisturbanceModel | None = None) -> np.ndarray:
    return (model or DisturbanceModel()).current_velocity(t)


def body_disturbance_regressor(t: float, model: DisturbanceModel) -> np.ndarray:
    """6 x 4 regressor of the disturbance term (left-hand-side sign)."""
    vcx, vcy = model.current_velocity(t)
    Delta = np.zeros((6, N_THETA_D))
    Delta[0, 0] = -vcx
    Delta[1, 1] = -vcy
    Delta[5, 2] = -vcx
    Delta[5, 3] = -vcy
    return Delta


def disturbance_regressor(J, t: float, model: DisturbanceModel) -> np.ndarray:
    """Disturbance regressor mapped to object coordinates, ``J^T Delta_v``."""
    return np.asarray(J).T @ body_disturbance_regressor(t, model)


def external_wrench(theta_d, t: float, model: DisturbanceModel) -> np.ndarray:
    """Current wrench acting on a body (right-hand-side sign)."""
    return -body_disturbance_regressor(t, model) @ np.asarray(theta_d, dtype=float)
