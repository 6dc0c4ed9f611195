"""Closed-loop simulation of the rigidly grasped team.

The object and the end-effectors form one rigid assembly, so the plant has
a single generalized coordinate: the object pose ``x_O`` and twist ``v_O``.
Interaction wrenches follow from each robot's own equation of motion once
the common acceleration is known.

Control runs at ``dt`` with zero-order hold; the plant is integrated with
classical RK4 over ``substeps`` sub-intervals.  Every robot is an
:class:`Agent` whose ``act`` method only receives its own sensing (object
pose, its own end-effector twist and its own wrench measurement) and its
own state, which enforces the no-communication constraint structurally.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ScenarioConfig
from .dynamics import (
    HydroParams,
    body_disturbance_regressor,
    coriolis_times,
    disturbance_regressor,
    external_wrench,
    object_terms,
    regressor,
    theta_from_params,
)
from .errors import NonFiniteState, SingularMass
from .estimator import EstimatorState, estimator_init, follower_reference, pose_difference
from .impedance import (
    ControllerState,
    ImpedanceGains,
    adapt_step,
    auxiliary_z,
    control_input,
    desired_wrench,
    force_filter_rate,
    force_filter_step,
    lyapunov_value,
    reference_velocity,
    y_cmd,
)
from .kinematics import (
    euler_rate_matrix,
    grasp_jacobian,
    grasp_jacobian_inverse,
    pose_error,
    pose_error_rate,
    rotation_from_euler,
)
from .navigation import (
    DesiredTrajectory,
    SphereWorld,
    beta,
    nav_potential,
    propagate_desired_trajectory,
)
from .observer import ObserverState, disturbance_estimate, observer_init, observer_step


# --------------------------------------------------------------------------- plant

class Plant:
    """Rigid object plus grasping robots, reduced to object coordinates."""

    def __init__(self, obj: HydroParams, robots, offsets, theta_dO, theta_ds, disturbance):
        self.obj = obj
        self.robots = list(robots)
        self.Js = [grasp_jacobian(l) for l in offsets]
        self.JTs = [J.T for J in self.Js]
        self.Jinv_Ts = [grasp_jacobian_inverse(l).T for l in offsets]
        self.M_is = [J.T @ p.mass_matrix @ J for J, p in zip(self.Js, self.robots)]
        self.M_total = obj.mass_matrix + sum(self.M_is)
        if np.linalg.eigvalsh(0.5 * (self.M_total + self.M_total.T)).min() <= 0:
            raise SingularMass("assembled inertia is not positive definite")
        self._Mtot_inv = np.linalg.inv(self.M_total)
        self.theta_dO = np.asarray(theta_dO, dtype=float)
        self.theta_ds = [np.asarray(td, dtype=float) for td in theta_ds]
        self.disturbance = disturbance

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    def object_wrench(self, t) -> np.ndarray:
        """External (current) wrench on the object."""
        return external_wrench(self.theta_dO, t, self.disturbance)

    def _robot_bias(self, i, x, v, t, R, Delta_v):
        """``C_i v + D_i v + g_i + d_i`` of robot ``i`` in object coordinates."""
        p = self.robots[i]
        J = self.Js[i]
        nu = J @ v
        body = (coriolis_times(p.mass_matrix, nu, nu)
                + (p.drag_linear + p.drag_quadratic * np.abs(nu)) * nu
                + np.concatenate([p.restoring[:3], R.T @ p.restoring[3:]])
                + Delta_v @ self.theta_ds[i])
        return self.JTs[i] @ body

    def accel(self, x, v, us, t):
        """Common acceleration and the robot-side constraint wrenches.

        Returns ``(v_dot, lams)`` where ``lams[i]`` is the wrench the object
        exerts on robot ``i`` (in that robot's task space).
        """
        R = rotation_from_euler(x[3:])
        Delta_v = body_disturbance_regressor(t, self.disturbance)
        M_O = self.obj.mass_matrix
        n_O = (coriolis_times(M_O, v, v)
               + (self.obj.drag_linear + self.obj.drag_quadratic * np.abs(v)) * v
               + np.concatenate([self.obj.restoring[:3], R.T @ self.obj.restoring[3:]]))
        lam_e = -Delta_v @ self.theta_dO
        biases = [self._robot_bias(i, x, v, t, R, Delta_v) for i in range(self.n_robots)]
        applied = [JT @ u for JT, u in zip(self.JTs, us)]
        rhs = sum(applied) + lam_e - n_O - sum(biases)
        v_dot = self._Mtot_inv @ rhs
        lams = [Jit @ (M @ v_dot + b - a)
                for Jit, M, b, a in zip(self.Jinv_Ts, self.M_is, biases, applied)]
        return v_dot, lams

    def derivative(self, x, v, us, t):
        xdot = np.empty(6)
        xdot[:3] = v[:3]
        xdot[3:] = euler_rate_matrix(x[3:]) @ v[3:]
        v_dot, _ = self.accel(x, v, us, t)
        return xdot, v_dot

    def rk4(self, x, v, us, t, h, n):
        for _ in range(n):
            k1x, k1v = self.derivative(x, v, us, t)
            k2x, k2v = self.derivative(x + 0.5 * h * k1x, v + 0.5 * h * k1v, us, t + 0.5 * h)
            k3x, k3v = self.derivative(x + 0.5 * h * k2x, v + 0.5 * h * k2v, us, t + 0.5 * h)
            k4x, k4v = self.derivative(x + h * k3x, v + h * k3v, us, t + h)
            x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            t = t + h
        return x, v

    def kinetic_energy(self, v) -> float:
        return 0.5 * float(v @ self.M_total @ v)


def coupled_accel(plant: Plant, x_O, v_O, us, t):
    """Module-level wrapper of :meth:`Plant.accel`."""
    return plant.accel(np.asarray(x_O, dtype=float), np.asarray(v_O, dtype=float),
                       [np.asarray(u, dtype=float) for u in us], t)


# --------------------------------------------------------------------------- agents

@dataclass(frozen=True)
class Sensing:
    """Everything a robot measures at a control instant."""
    k: int
    t: float
    x_O: np.ndarray
    v_ee: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class AgentState:
    ctrl: ControllerState
    obs: ObserverState
    est: EstimatorState | None = None


@dataclass(frozen=True)
class AgentOutput:
    u: np.ndarray
    x_d: np.ndarray
    v_d: np.ndarray
    a_d: np.ndarray
    lam_d: np.ndarray
    lam_e_hat: np.ndarray
    z: np.ndarray
    e: np.ndarray
    v_tilde: np.ndarray


class Agent:
    """One robot's controller.

    ``trajectory`` is given to the leader only; followers build their
    reference with the prescribed-performance estimator.
    """

    def __init__(self, offset, gains: ImpedanceGains, object_model: HydroParams, load_share,
                 K_mu, dt, disturbance, trajectory: DesiredTrajectory | None = None,
                 estimator_cfg=None, adapt_bounds=None):
        self.J = grasp_jacobian(offset)
        self.Jinv = grasp_jacobian_inverse(offset)
        self.gains = gains
        self.object_model = object_model
        self.c = float(load_share)
        self.K_mu = np.asarray(K_mu, dtype=float)
        self.dt = float(dt)
        self.disturbance = disturbance
        self.trajectory = trajectory
        self.estimator_cfg = estimator_cfg
        self.adapt_bounds = adapt_bounds

    @property
    def is_leader(self) -> bool:
        return self.trajectory is not None

    def init_state(self, x_O, v_O, theta_hat, theta_d_hat) -> AgentState:
        terms = object_terms(x_O, v_O, self.object_model)
        ctrl = ControllerState(np.array(theta_hat, dtype=float), np.array(theta_d_hat, dtype=float),
                               np.zeros(6))
        obs = observer_init(self.K_mu, self.c, v_O, terms)
        est = None
        if not self.is_leader:
            cfg = self.estimator_cfg
            est = estimator_init(x_O, cfg.k, cfg.rho_inf, cfg.lam, cfg.rho_floor,
                                 x_hat=np.asarray(x_O) - cfg.initial_offset)
        return AgentState(ctrl, obs, est)

    def act(self, st: AgentState, s: Sensing):
        J, g, dt = self.J, self.gains, self.dt
        x_O = np.asarray(s.x_O, dtype=float)
        v_O = self.Jinv @ s.v_ee
        terms = object_terms(x_O, v_O, self.object_model)
        obs = st.obs if s.k == 0 else observer_step(st.obs, v_O, terms, dt)
        lam_e_hat = disturbance_estimate(obs, s.lam, J)

        est = st.est
        if self.is_leader:
            x_d, v_d, a_d = self.trajectory.sample(s.k)
        else:
            est, x_d, v_d, a_d = follower_reference(st.est, x_O, v_O, dt)

        e = pose_error(x_O, x_d)
        v_t = v_O - v_d
        e_dot = pose_error_rate(x_O, x_d, v_O, v_d)
        y = y_cmd(a_d, v_t, e, g)
        n_Oi = self.c * (terms.Cv + terms.Dv + terms.g)
        lam_d = desired_wrench(self.c * terms.M, n_Oi, y, lam_e_hat, J, g.lambda_int)

        f = st.ctrl.f
        f_dot = force_filter_rate(f, lam_d, J, g)
        v_r, a_r = reference_velocity(v_d, a_d, e, e_dot, f, f_dot, g.F)
        z = auxiliary_z(v_t, e, f, g.F)
        Omega = regressor(x_O, v_O, v_r, a_r, J)
        Delta = disturbance_regressor(J, s.t, self.disturbance)
        u = control_input(s.lam, Omega, Delta, st.ctrl, z, g, J)

        ctrl = adapt_step(st.ctrl, Omega, Delta, z, g, dt, self.adapt_bounds)
        ctrl = replace(ctrl, f=force_filter_step(f, lam_d, J, g, dt))
        out = AgentOutput(u, np.asarray(x_d, dtype=float), np.asarray(v_d, dtype=float),
                          np.asarray(a_d, dtype=float), lam_d, lam_e_hat, z, e, v_t)
        return AgentState(ctrl, obs, est), out


# --------------------------------------------------------------------------- simulation

@dataclass(frozen=True)
class SimState:
    k: int
    t: float
    x_O: np.ndarray
    v_O: np.ndarray
    lam: tuple
    agents: tuple


class Simulation:
    """Static pieces of a run: plant, agents, leader trajectory and true parameters."""

    def __init__(self, config: ScenarioConfig, trajectory: DesiredTrajectory | None = None):
        self.config = cfg = config
        self.n_steps = int(round(cfg.duration / cfg.dt))
        obj = cfg.object
        self.plant = Plant(obj.params, [r.params for r in cfg.robots],
                           [r.offset for r in cfg.robots], obj.theta_d,
                           [r.theta_d for r in cfg.robots], cfg.disturbance)
        if trajectory is None:
            trajectory = propagate_desired_trajectory(
                obj.initial_pose, cfg.world, cfg.nav, cfg.dt, cfg.duration, cfg.nav_substeps)
        self.trajectory = trajectory
        self.agents = []
        for i, r in enumerate(cfg.robots):
            self.agents.append(Agent(
                r.offset, r.gains, obj.params, r.load_share, cfg.K_mu, cfg.dt, cfg.disturbance,
                trajectory=trajectory if i == 0 else None,
                estimator_cfg=cfg.estimator, adapt_bounds=cfg.adapt_bounds))
        self.theta_true = [theta_from_params(r.params) for r in cfg.robots]
        self.theta_d_true = [np.asarray(r.theta_d, dtype=float) for r in cfg.robots]

    def initial_state(self) -> SimState:
        cfg = self.config
        x = np.array(cfg.object.initial_pose, dtype=float)
        v = np.array(cfg.object.initial_twist, dtype=float)
        zero = [np.zeros(6) for _ in self.agents]
        _, lams = self.plant.accel(x, v, zero, 0.0)
        agents = tuple(a.init_state(x, v, r.theta_hat0, r.theta_d_hat0)
                       for a, r in zip(self.agents, cfg.robots))
        return SimState(0, 0.0, x, v, tuple(lams), agents)

    def _measured(self, state: SimState, i: int) -> np.ndarray:
        lam = state.lam[i]
        sigma = self.config.sensor_noise
        if sigma > 0:
            rng = np.random.default_rng([self.config.seed, state.k, i])
            lam = lam + rng.normal(0.0, sigma, 6)
        return lam

    def control(self, state: SimState):
        """Run every agent once (followers in index order, then the leader)."""
        n = len(self.agents)
        order = list(range(1, n)) + [0]
        outs = [None] * n
        new_agents = list(state.agents)
        for i in order:
            sens = Sensing(state.k, state.t, state.x_O, self.plant.Js[i] @ state.v_O,
                           self._measured(state, i))
            new_agents[i], outs[i] = self.agents[i].act(state.agents[i], sens)
        return tuple(new_agents), outs

    def advance(self, state: SimState, agents, us) -> SimState:
        cfg = self.config
        h = cfg.dt / cfg.substeps
        x, v = self.plant.rk4(state.x_O, state.v_O, us, state.t, h, cfg.substeps)
        k = state.k + 1
        t = k * cfg.dt
        _check_finite(t, x_O=x, v_O=v)
        _, lams = self.plant.accel(x, v, us, t)
        return SimState(k, t, x, v, tuple(lams), agents)

    def lyapunov(self, state: SimState, outs) -> float:
        zs = [o.z for o in outs]
        tt = [a.ctrl.theta_hat - th for a, th in zip(state.agents, self.theta_true)]
        ttd = [a.ctrl.theta_d_hat - th for a, th in zip(state.agents, self.theta_d_true)]
        return lyapunov_value(zs, self.plant.M_is, tt, ttd, [r.gains for r in self.config.robots])


def _check_finite(t, **arrays):
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            raise NonFiniteState(f"non-finite {name} at t={t:.3f} s", t=t, quantity=name)


def step(state: SimState, sim: Simulation) -> SimState:
    """One control period: controllers, then the held-input plant integration."""
    agents, outs = sim.control(state)
    us = [o.u for o in outs]
    _check_finite(state.t, u=np.array(us))
    return sim.advance(state, agents, us)


# --------------------------------------------------------------------------- log

@dataclass
class SimLog:
    """Per-control-step time series (arrays indexed by sample first)."""
    t: np.ndarray
    x_O: np.ndarray
    v_O: np.ndarray
    a_O: np.ndarray
    x_d: np.ndarray
    v_d: np.ndarray
    u: np.ndarray
    lam: np.ndarray
    lam_d: np.ndarray
    lam_e_hat: np.ndarray
    lam_e_share: np.ndarray
    zeta_error: np.ndarray
    zeta_target: np.ndarray
    z: np.ndarray
    w: np.ndarray
    theta_err: np.ndarray
    theta_d_err: np.ndarray
    x_hat: np.ndarray
    est_error: np.ndarray
    rho: np.ndarray
    V: np.ndarray
    clearance: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    goal: np.ndarray
    rho_inf: np.ndarray
    z_weight: np.ndarray
    meta: dict = field(default_factory=dict)

    def columns(self):
        """Ordered ``(name, 1-D array)`` pairs of the CSV export."""
        cols = [("t", self.t)]
        ax = ["x", "y", "z", "roll", "pitch", "yaw"]
        tw = ["vx", "vy", "vz", "wx", "wy", "wz"]
        wr = ["fx", "fy", "fz", "tx", "ty", "tz"]

        def add(prefix, arr, names):
            for j, n in enumerate(names):
                cols.append((f"{prefix}{n}", arr[:, j]))

        add("obj_", self.x_O, ax)
        add("obj_", self.v_O, tw)
        add("obj_a", self.a_O, tw)
        add("ref_", self.x_d, ax)
        add("ref_", self.v_d, tw)
        for i in range(self.u.shape[1]):
            add(f"r{i}_u_", self.u[:, i], wr)
            add(f"r{i}_lam_", self.lam[:, i], wr)
            add(f"r{i}_lamd_", self.lam_d[:, i], wr)
            add(f"r{i}_lame_", self.lam_e_hat[:, i], wr)
            add(f"r{i}_z_", self.z[:, i], tw)
            cols.append((f"r{i}_w_norm", np.linalg.norm(self.w[:, i], axis=1)))
            cols.append((f"r{i}_theta_err", self.theta_err[:, i]))
            cols.append((f"r{i}_theta_d_err", self.theta_d_err[:, i]))
        for f in range(self.x_hat.shape[1]):
            i = f + 1
            add(f"r{i}_xhat_", self.x_hat[:, f], ax)
            add(f"r{i}_e_", self.est_error[:, f], ax)
            add(f"r{i}_rho_", self.rho[:, f], ax)
        cols += [("V", self.V), ("min_clearance", self.clearance), ("beta", self.beta),
                 ("phi", self.phi)]
        return cols

    def to_csv(self, path) -> None:
        cols = self.columns()
        data = np.column_stack([c for _, c in cols])
        np.savetxt(path, data, delimiter=",", header=",".join(n for n, _ in cols),
                   comments="", fmt="%.17g")

    def digest(self) -> str:
        h = hashlib.sha256()
        for _, c in self.columns():
            h.update(np.ascontiguousarray(c, dtype=np.float64).tobytes())
        return h.hexdigest()

    def trajectory_xy_rows(self):
        return np.column_stack([self.t, self.x_O[:, :3], self.x_d[:, :3]])

    def tracking_error_rows(self):
        e = np.array([pose_error(x, self.goal) for x in self.x_O])
        e_ref = np.array([pose_error(x, xd) for x, xd in zip(self.x_O, self.x_d)])
        return np.column_stack([self.t, e, e_ref])


def run_scenario(config: ScenarioConfig, trajectory: DesiredTrajectory | None = None,
                 progress=None) -> SimLog:
    """Simulate ``config`` from ``t = 0`` to its duration and return the log.

    Raises whatever the modules raise (``EnvelopeViolation``,
    ``StuckAtSaddle``, ``NonFiniteState``, ...); each carries the time of
    the failure.
    """
    sim = Simulation(config, trajectory)
    plant = sim.plant
    n = sim.n_steps
    R = plant.n_robots
    nf = R - 1
    S = n + 1
    z6 = lambda *s: np.zeros(s + (6,))
    buf = dict(
        t=np.zeros(S), x_O=z6(S), v_O=z6(S), a_O=z6(S), x_d=z6(S), v_d=z6(S),
        u=z6(S, R), lam=z6(S, R), lam_d=z6(S, R), lam_e_hat=z6(S, R), lam_e_share=z6(S, R),
        zeta_error=np.zeros((S, R)), zeta_target=np.zeros((S, R)), z=z6(S, R), w=z6(S, R),
        theta_err=np.zeros((S, R)), theta_d_err=np.zeros((S, R)),
        x_hat=z6(S, nf), est_error=z6(S, nf), rho=z6(S, nf),
        V=np.zeros(S), clearance=np.zeros(S), beta=np.zeros(S), phi=np.zeros(S),
    )
    world: SphereWorld = config.world
    goal = config.nav.goal
    state = sim.initial_state()
    for k in range(S):
        agents, outs = sim.control(state)
        us = [o.u for o in outs]
        _check_finite(state.t, u=np.array(us))
        a_O, lam_now = plant.accel(state.x_O, state.v_O, us, state.t)
        lam_e = plant.object_wrench(state.t)
        s_tot = sum(J.T @ l for J, l in zip(plant.Js, lam_now))
        buf["t"][k] = state.t
        buf["x_O"][k] = state.x_O
        buf["v_O"][k] = state.v_O
        buf["a_O"][k] = a_O
        buf["x_d"][k] = outs[0].x_d
        buf["v_d"][k] = outs[0].v_d
        for i, (o, a_new) in enumerate(zip(outs, agents)):
            g = config.robots[i].gains
            J = plant.Js[i]
            buf["u"][k, i] = o.u
            buf["lam"][k, i] = state.lam[i]
            buf["lam_d"][k, i] = o.lam_d
            buf["lam_e_hat"][k, i] = o.lam_e_hat
            buf["lam_e_share"][k, i] = a_new.obs.c * lam_e
            zeta = state.agents[i].obs.zeta if k == 0 else a_new.obs.zeta
            target = a_new.obs.c * (lam_e - s_tot)
            buf["zeta_error"][k, i] = np.linalg.norm(zeta - target)
            buf["zeta_target"][k, i] = np.linalg.norm(target)
            buf["z"][k, i] = o.z
            buf["w"][k, i] = (g.M_d @ (a_O - o.a_d) + g.D_d @ o.v_tilde + g.K_d @ o.e
                              - J.T @ o.lam_d)
            buf["theta_err"][k, i] = np.linalg.norm(state.agents[i].ctrl.theta_hat - sim.theta_true[i])
            buf["theta_d_err"][k, i] = np.linalg.norm(
                state.agents[i].ctrl.theta_d_hat - sim.theta_d_true[i])
            if i > 0:
                est = state.agents[i].est
                buf["x_hat"][k, i - 1] = est.x_hat
                buf["est_error"][k, i - 1] = pose_difference(state.x_O, est.x_hat)
                buf["rho"][k, i - 1] = est.rhos()
        buf["V"][k] = sim.lyapunov(state, outs)
        buf["clearance"][k] = world.clearances(state.x_O).min()
        buf["beta"][k] = beta(state.x_O, world, config.nav.length_scale)
        buf["phi"][k] = nav_potential(state.x_O, world, config.nav)
        if k == n:
            break
        state = sim.advance(state, agents, us)
        if progress is not None:
            progress(state)
    rho_inf = np.array([[p.rho_inf for p in a.est.perf] for a in state.agents[1:]]).reshape(nf, 6)
    z_weight = np.array([np.diag(r.gains.K) for r in config.robots])
    return SimLog(**buf, goal=np.asarray(goal), rho_inf=rho_inf, z_weight=z_weight,
                  meta={"dt": config.dt, "substeps": config.substeps, "n_robots": R})


# --------------------------------------------------------------------------- metrics

def _rotation_angle(x, goal) -> float:
    R = rotation_from_euler(np.asarray(x)[3:])
    Rd = rotation_from_euler(np.asarray(goal)[3:])
    c = np.clip(0.5 * (np.trace(Rd.T @ R) - 1.0), -1.0, 1.0)
    return float(np.arccos(c))


def _last_time_above(t, flag) -> float:
    idx = np.flatnonzero(flag)
    return float(t[idx[-1]]) if idx.size else 0.0


def metrics(log: SimLog, v_tolerance: float = 1e-6) -> dict:
    """Summary record of a run (plain floats and lists, JSON ready)."""
    t = log.t
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    n = len(t)
    e_ref = np.array([pose_error(x, xd) for x, xd in zip(log.x_O, log.x_d)]) if n else np.zeros((0, 6))
    out = {}
    out["final_time"] = float(t[-1])
    out["final_position_error"] = float(np.linalg.norm(log.x_O[-1, :3] - log.goal[:3]))
    out["final_orientation_error"] = _rotation_angle(log.x_O[-1], log.goal)
    out["final_tracking_error"] = np.abs(e_ref[-1]).tolist()
    out["rms_tracking_error"] = np.sqrt(np.mean(e_ref ** 2, axis=0)).tolist()

    if log.rho.shape[1] and n:
        ratios = np.abs(log.est_error) / log.rho
        out["max_envelope_ratio"] = float(ratios.max())
        worst = np.unravel_index(np.argmax(ratios), ratios.shape)
        out["max_envelope_ratio_time"] = float(t[worst[0]])
        outside = np.any(np.abs(log.est_error) > log.rho_inf[None, :, :], axis=(1, 2))
        out["estimation_transient_time"] = _last_time_above(t, outside)
    else:
        out["max_envelope_ratio"] = 0.0
        out["max_envelope_ratio_time"] = 0.0
        out["estimation_transient_time"] = 0.0

    i_min = int(np.argmin(log.beta))
    out["min_beta"] = float(log.beta[i_min])
    out["min_beta_time"] = float(t[i_min])
    j_min = int(np.argmin(log.clearance))
    out["min_clearance"] = float(log.clearance[j_min])
    out["min_clearance_time"] = float(t[j_min])

    V = log.V
    V0 = float(V[0])
    inc = np.diff(V)
    viol = np.flatnonzero(inc > v_tolerance * V0)
    out["V0"] = V0
    out["V_final"] = float(V[-1])
    out["V_max_increase"] = float(inc.max()) if inc.size else 0.0
    out["V_violations"] = int(viol.size)
    out["V_first_violation_time"] = float(t[viol[0] + 1]) if viol.size else None

    zsq = np.einsum("tij,ij,tij->t", log.z, log.z_weight, log.z) if n else np.zeros(0)
    zl2 = np.sum(log.z ** 2, axis=(1, 2)) * dt
    total = float(zl2.sum())
    tail = float(zl2[int(0.8 * n):].sum())
    out["z_l2"] = total
    out["z_l2_tail_fraction"] = tail / total if total > 0 else 0.0
    out["z_weighted_l2"] = float(zsq.sum() * dt)

    wn = np.linalg.norm(log.w, axis=2)
    out["w_initial"] = wn[0].tolist()
    out["w_final"] = wn[-1].tolist()
    out["control_effort"] = (np.sum(log.u ** 2, axis=2).sum(axis=0) * dt).tolist()

    # observer settles once every zeta stays within 5 % of the largest wrench it tracks
    scale = max(float(log.zeta_target.max()) if n else 0.0, 1e-12)
    out["observer_settling_time"] = _last_time_above(t, log.zeta_error.max(axis=1) > 0.05 * scale)
    out["nonfinite"] = bool(not all(np.all(np.isfinite(c)) for _, c in log.columns()))
    out["log_sha256"] = log.digest()
    return out


def write_outputs(log: SimLog, outdir, metrics_record=None) -> dict:
    """Write ``log.csv``, ``metrics.json`` and the per-figure CSV files."""
    from pathlib import Path
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rec = metrics(log) if metrics_record is None else metrics_record
    log.to_csv(out / "log.csv")
    (out / "metrics.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    np.savetxt(out / "trajectory_xy.csv", log.trajectory_xy_rows(), delimiter=",",
               header="t,obj_x,obj_y,obj_z,ref_x,ref_y,ref_z", comments="", fmt="%.10g")
    ax = ["x", "y", "z", "roll", "pitch", "yaw"]
    hdr = ["t"] + [f"goal_err_{a}" for a in ax] + [f"ref_err_{a}" for a in ax]
    np.savetxt(out / "tracking_error.csv", log.tracking_error_rows(), delimiter=",",
               header=",".join(hdr), comments="", fmt="%.10g")
    rows = [log.t]
    hdr = ["t"]
    for f in range(log.est_error.shape[1]):
        for j, a in enumerate(ax):
            rows += [log.est_error[:, f, j], log.rho[:, f, j]]
            hdr += [f"r{f + 1}_e_{a}", f"r{f + 1}_rho_{a}"]
    np.savetxt(out / "estimation_envelope.csv", np.column_stack(rows), delimiter=",",
               header=",".join(hdr), comments="", fmt="%.10g")
    return rec
