"""Momentum-based observer of each robot's share of the external wrench.

Each robot filters the equivalent object momentum ``mu_i = c_i M_O v_O``
through

    zeta_i = K_mu (mu_i + int (c_i (C_O v_O + D_O v_O + g_O) - zeta_i) dt)

which behaves like ``zeta_dot = K_mu (c_i (applied + lambda_e) - zeta)``,
a first-order low pass of the total wrench acting on the object.  Only the
object model, the object twist and the robot's own wrench measurement are
needed, so every robot runs its observer locally.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import BodyTerms


@dataclass(frozen=True)
class ObserverState:
    zeta: np.ndarray
    integral_acc: np.ndarray
    K_mu: np.ndarray
    c: float
    # integrand at the last sample, kept for the trapezoidal rule
    integrand: np.ndarray

    def problems(self) -> list[str]:
        out = []
        K = self.K_mu
        if not np.allclose(K, K.T) or np.linalg.eigvalsh(0.5 * (K + K.T)).min() <= 0:
            out.append("observer gain K_mu must be symmetric positive definite")
        if not 0.0 < self.c < 1.0 and self.c != 1.0:
            out.append("load share c must lie in (0, 1]")
        return out


def object_momentum(v_O, M_Oi) -> np.ndarray:
    return np.asarray(M_Oi, dtype=float) @ np.asarray(v_O, dtype=float)


def _model_terms(terms: BodyTerms, c: float) -> np.ndarray:
    return c * (terms.Cv + terms.Dv + terms.g)


def observer_init(K_mu, c: float, v_O, terms: BodyTerms) -> ObserverState:
    """Observer at rest: ``zeta = 0`` with the integral absorbing ``mu(0)``."""
    K_mu = np.asarray(K_mu, dtype=float)
    mu0 = object_momentum(v_O, c * terms.M)
    return ObserverState(np.zeros(6), -mu0, K_mu, float(c), _model_terms(terms, c))


def observer_step(state: ObserverState, v_O, terms: BodyTerms, dt: float) -> ObserverState:
    """Advance the observer by ``dt`` given the object twist and model terms at the new sample.

    The trapezoidal integral contains the unknown ``zeta`` at the new sample,
    so it is solved for implicitly, which keeps the update stable for any
    positive gain.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    K, c = state.K_mu, state.c
    mu = object_momentum(v_O, c * terms.M)
    n_new = _model_terms(terms, c)
    partial = state.integral_acc + 0.5 * dt * (state.integrand - state.zeta + n_new)
    lhs = np.eye(6) + 0.5 * dt * K
    zeta = np.linalg.solve(lhs, K @ (mu + partial))
    integral = partial - 0.5 * dt * zeta
    return replace(state, zeta=zeta, integral_acc=integral, integrand=n_new)


def disturbance_estimate(state: ObserverState, lam, J) -> np.ndarray:
    """Estimate of ``c_i lambda_e``.

    ``lam`` is the wrench the object exerts on the robot, so the robot
    pushes on the object with ``-lam`` and the estimate is
    ``zeta + J^T lam``.
    """
    return state.zeta + np.asarray(J, dtype=float).T @ np.asarray(lam, dtype=float)
