"""Rigid-body kinematics shared by the models and controllers.

Poses are 6-vectors ``[x, y, z, roll, pitch, yaw]``; twists and wrenches are
6-vectors with the linear/force part first.  The angular part of a twist is
the body-frame angular velocity, so Euler rates follow from the standard
roll-pitch-yaw transform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularOrientation

#: default margin on |pitch| below pi/2 for the Euler-rate Jacobian
SINGULARITY_MARGIN = 1e-3


def _vec3(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(3)


@dataclass(frozen=True)
class Pose6:
    position: np.ndarray
    euler: np.ndarray

    @classmethod
    def from_vector(cls, x) -> "Pose6":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(x[:3].copy(), x[3:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([_vec3(self.position), _vec3(self.euler)])

    def __array__(self, dtype=None, copy=None):
        return self.vector if dtype is None else self.vector.astype(dtype)


@dataclass(frozen=True)
class Twist6:
    linear: np.ndarray
    angular: np.ndarray

    @classmethod
    def from_vector(cls, v) -> "Twist6":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3].copy(), v[3:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([_vec3(self.linear), _vec3(self.angular)])

    def __array__(self, dtype=None, copy=None):
        return self.vector if dtype is None else self.vector.astype(dtype)


@dataclass(frozen=True)
class Wrench6:
    force: np.ndarray
    torque: np.ndarray

    @classmethod
    def from_vector(cls, w) -> "Wrench6":
        w = np.asarray(w, dtype=float).reshape(6)
        return cls(w[:3].copy(), w[3:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([_vec3(self.force), _vec3(self.torque)])

    def __array__(self, dtype=None, copy=None):
        return self.vector if dtype is None else self.vector.astype(dtype)


def rotation_from_euler(euler) -> np.ndarray:
    """Rotation matrix Rz(yaw) @ Ry(pitch) @ Rx(roll); columns are (n, o, a)."""
    phi, theta, psi = _vec3(euler)
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.array([
        [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
        [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
        [-st, ct * sf, ct * cf],
    ])


def _check_pitch(theta: float, margin: float) -> None:
    if not np.isfinite(theta) or abs(theta) >= np.pi / 2 - margin:
        raise SingularOrientation(
            f"pitch {theta:.6f} rad within {margin:g} rad of the Euler singularity")


def euler_rate_matrix(euler, margin: float = SINGULARITY_MARGIN) -> np.ndarray:
    """3x3 map from body angular velocity to Euler-angle rates."""
    phi, theta, _ = _vec3(euler)
    _check_pitch(theta, margin)
    cf, sf = np.cos(phi), np.sin(phi)
    ct, tt = np.cos(theta), np.tan(theta)
    return np.array([
        [1.0, sf * tt, cf * tt],
        [0.0, cf, -sf],
        [0.0, sf / ct, cf / ct],
    ])


def body_rate_matrix(euler) -> np.ndarray:
    """Inverse of :func:`euler_rate_matrix` (defined everywhere)."""
    phi, theta, _ = _vec3(euler)
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    return np.array([
        [1.0, 0.0, -st],
        [0.0, cf, ct * sf],
        [0.0, -sf, ct * cf],
    ])


def body_rate_matrix_dot(euler, euler_rate) -> np.ndarray:
    """Time derivative of :func:`body_rate_matrix` along ``euler_rate``."""
    phi, theta, _ = _vec3(euler)
    dphi, dtheta, _ = _vec3(euler_rate)
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    d_phi = np.array([
        [0.0, 0.0, 0.0],
        [0.0, -sf, ct * cf],
        [0.0, -cf, -ct * sf],
    ])
    d_theta = np.array([
        [0.0, 0.0, -ct],
        [0.0, 0.0, -st * sf],
        [0.0, 0.0, -st * cf],
    ])
    return dphi * d_phi + dtheta * d_theta


def euler_rate_jacobian(euler, margin: float = SINGULARITY_MARGIN) -> np.ndarray:
    """6x6 representation Jacobian ``J_O`` with ``x_dot = J_O @ v``.

    Raises:
      SingularOrientation: if |pitch| >= pi/2 - margin.
    """
    J = np.eye(6)
    J[3:, 3:] = euler_rate_matrix(euler, margin)
    return J


def inverse_euler_rate_jacobian(euler, margin: float = SINGULARITY_MARGIN) -> np.ndarray:
    _check_pitch(_vec3(euler)[1], margin)
    J = np.eye(6)
    J[3:, 3:] = body_rate_matrix(euler)
    return J


def skew(l) -> np.ndarray:
    """Cross-product matrix: ``skew(l) @ v == np.cross(l, v)``."""
    x, y, z = _vec3(l)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def grasp_jacobian(l) -> np.ndarray:
    """Twist map from the object frame to a grasp point offset by ``l``."""
    J = np.eye(6)
    J[:3, 3:] = -skew(l)
    return J


def grasp_jacobian_inverse(l) -> np.ndarray:
    J = np.eye(6)
    J[:3, 3:] = skew(l)
    return J


def grasp_matrix(offsets) -> np.ndarray:
    """Stack of grasp Jacobians, shape (6 * n_robots, 6)."""
    offsets = list(offsets)
    if not offsets:
        raise ValueError("grasp matrix needs at least one grasp offset")
    return np.vstack([grasp_jacobian(l) for l in offsets])


def orientation_error(R, R_d) -> np.ndarray:
    """Outer-product orientation error ``0.5 * (n x n_d + o x o_d + a x a_d)``.

    For ``R_d = I`` and ``R`` a yaw by ``delta`` this is ``(0, 0, -sin delta)``.
    """
    R = np.asarray(R, dtype=float)
    R_d = np.asarray(R_d, dtype=float)
    return 0.5 * np.cross(R, R_d, axis=0).sum(axis=1)


def pose_error(x, x_d) -> np.ndarray:
    """Pose error, actual minus desired.

    The rotational part is ``orientation_error(R_d, R)``, which is close to
    the desired-to-actual rotation vector (world frame) for small errors, so
    both halves share the actual-minus-desired sign.
    """
    x = np.asarray(x, dtype=float).reshape(6)
    x_d = np.asarray(x_d, dtype=float).reshape(6)
    e = np.empty(6)
    e[:3] = x[:3] - x_d[:3]
    e[3:] = orientation_error(rotation_from_euler(x_d[3:]), rotation_from_euler(x[3:]))
    return e


def pose_error_rate(x, x_d, v, v_d) -> np.ndarray:
    """Analytic time derivative of :func:`pose_error`.

    Uses ``R_dot = R @ skew(omega)`` for body-frame angular velocities.
    """
    x = np.asarray(x, dtype=float).reshape(6)
    x_d = np.asarray(x_d, dtype=float).reshape(6)
    v = np.asarray(v, dtype=float).reshape(6)
    v_d = np.asarray(v_d, dtype=float).reshape(6)
    R = rotation_from_euler(x[3:])
    R_d = rotation_from_euler(x_d[3:])
    w = R @ v[3:]
    w_d = R_d @ v_d[3:]
    dR = np.cross(w, R, axisb=0, axisc=0)
    dR_d = np.cross(w_d, R_d, axisb=0, axisc=0)
    de = np.empty(6)
    de[:3] = v[:3] - v_d[:3]
    de[3:] = 0.5 * (np.cross(dR_d, R, axis=0) + np.cross(R_d, dR, axis=0)).sum(axis=1)
    return de


def transform_twist(v_O, l) -> Twist6:
    """Grasp-point twist of a rigidly attached frame (angular part unchanged)."""
    return Twist6.from_vector(grasp_jacobian(l) @ np.asarray(v_O, dtype=float).reshape(6))


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)
