"""Scenario configuration: JSON loading, dotted-key overrides and validation.

Matrix-valued fields accept a scalar (times identity), a 6-list (diagonal)
or a 6x6 row-major nested list.  All units are SI.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import N_MASS, N_THETA, N_THETA_D, DisturbanceModel, HydroParams, theta_from_params
from .errors import ParseError, SchemaError
from .impedance import ImpedanceGains
from .kinematics import SINGULARITY_MARGIN, grasp_jacobian
from .navigation import NavParams, SphereWorld, in_free_space

_NUM = {"type": "number"}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_VEC6 = {"type": "array", "items": _NUM, "minItems": 6, "maxItems": 6}
_VEC4 = {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4}
_MAT = {"oneOf": [_NUM, _VEC6, {"type": "array", "items": _VEC6, "minItems": 6, "maxItems": 6}]}
_SCALAR_OR_6 = {"oneOf": [_NUM, _VEC6]}
_HYDRO = {
    "mass_matrix": _MAT,
    "drag_linear": _SCALAR_OR_6,
    "drag_quadratic": _SCALAR_OR_6,
    "restoring": _VEC6,
}
_GAMMA = {"oneOf": [
    _NUM,
    {"type": "array", "items": _NUM, "minItems": N_THETA, "maxItems": N_THETA},
    {"type": "object", "additionalProperties": False, "required": ["mass", "drag_linear",
                                                                  "drag_quadratic", "restoring"],
     "properties": {k: _NUM for k in ("mass", "drag_linear", "drag_quadratic", "restoring")}},
]}
_ROBOT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        **_HYDRO,
        "grasp_offset": _VEC3,
        "theta_d": _VEC4,
        "theta_hat_scale": _NUM,
        "theta_hat": {"type": "array", "items": _NUM, "minItems": N_THETA, "maxItems": N_THETA},
        "theta_d_hat": _VEC4,
        "load_share": _NUM,
        "lambda_int": _VEC6,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["world", "object", "robot_defaults", "robots", "nav", "controller",
                 "observer", "estimator"],
    "properties": {
        "name": {"type": "string"},
        "dt": _NUM,
        "substeps": {"type": "integer"},
        "nav_substeps": {"type": "integer"},
        "duration": _NUM,
        "seed": {"type": "integer"},
        "sensor_noise": _NUM,
        "world": {
            "type": "object", "additionalProperties": False,
            "required": ["radius", "robot_radius"],
            "properties": {
                "center": _VEC3, "radius": _NUM, "robot_radius": _NUM,
                "obstacles": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["center", "radius"],
                    "properties": {"center": _VEC3, "radius": _NUM}}},
            },
        },
        "object": {
            "type": "object", "additionalProperties": False,
            "required": ["mass_matrix", "drag_linear", "drag_quadratic", "radius",
                         "initial_pose", "goal"],
            "properties": {**_HYDRO, "radius": _NUM, "initial_pose": _VEC6,
                           "initial_twist": _VEC6, "goal": _VEC6, "theta_d": _VEC4},
        },
        "disturbance": {
            "type": "object", "additionalProperties": False,
            "properties": {"enabled": {"type": "boolean"},
                           "amplitude": {"type": "array", "items": _NUM,
                                         "minItems": 2, "maxItems": 2},
                           "frequency": _NUM},
        },
        "nav": {
            "type": "object", "additionalProperties": False,
            "properties": {k: _NUM for k in ("k", "gain", "length_scale", "goal_tolerance",
                                            "saddle_gradient", "saddle_window")},
        },
        "controller": {
            "type": "object", "additionalProperties": False,
            "required": ["M_dO", "D_dO", "K_dO", "M_d", "F", "Y", "K", "Gamma", "Gamma_d"],
            "properties": {
                **{k: _MAT for k in ("M_dO", "D_dO", "K_dO", "M_d", "F", "Y", "K")},
                "Gamma": _GAMMA,
                "Gamma_d": {"oneOf": [_NUM, _VEC4]},
                "theta_bounds": {"type": "boolean"},
            },
        },
        "observer": {
            "type": "object", "additionalProperties": False, "required": ["K_mu"],
            "properties": {"K_mu": _MAT},
        },
        "estimator": {
            "type": "object", "additionalProperties": False,
            "required": ["k", "rho_inf", "lam"],
            "properties": {"k": _SCALAR_OR_6, "rho_inf": _SCALAR_OR_6, "lam": _NUM,
                           "rho_floor": _SCALAR_OR_6, "initial_offset": _VEC6},
        },
        "robot_defaults": _ROBOT,
        "robots": {"type": "array", "items": _ROBOT, "minItems": 1},
    },
}


def matrix6(value) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(6)
    if a.shape == (6,):
        return np.diag(a)
    return a.reshape(6, 6)


def vector6(value) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (6,)).copy()


def _gamma(value) -> np.ndarray:
    if isinstance(value, dict):
        return np.concatenate([np.full(N_MASS, value["mass"]), np.full(6, value["drag_linear"]),
                               np.full(6, value["drag_quadratic"]), np.full(6, value["restoring"])])
    return np.broadcast_to(np.asarray(value, dtype=float), (N_THETA,)).copy()


@dataclass(frozen=True)
class ObjectConfig:
    params: HydroParams
    radius: float
    initial_pose: np.ndarray
    initial_twist: np.ndarray
    goal: np.ndarray
    theta_d: np.ndarray


@dataclass(frozen=True)
class RobotConfig:
    params: HydroParams
    offset: np.ndarray
    gains: ImpedanceGains
    theta_d: np.ndarray
    theta_hat0: np.ndarray
    theta_d_hat0: np.ndarray
    load_share: float


@dataclass(frozen=True)
class EstimatorConfig:
    k: np.ndarray
    rho_inf: np.ndarray
    lam: float
    rho_floor: np.ndarray
    # followers start from x_O(0) - initial_offset (a wrong prior)
    initial_offset: np.ndarray = np.zeros(6)


@dataclass(frozen=True)
class ScenarioConfig:
    world: SphereWorld
    object: ObjectConfig
    robots: tuple
    nav: NavParams
    K_mu: np.ndarray
    estimator: EstimatorConfig
    disturbance: DisturbanceModel
    dt: float = 0.1
    substeps: int = 10
    nav_substeps: int = 2
    duration: float = 300.0
    seed: int = 0
    sensor_noise: float = 0.0
    adapt_bounds: tuple | None = None
    name: str = "scenario"

    def problems(self) -> list[str]:
        """Every violated scenario invariant, as readable messages."""
        out = []
        out += [f"world: {m}" for m in self.world.problems()]
        out += [f"nav: {m}" for m in self.nav.problems()]
        out += [f"object: {m}" for m in self.object.params.problems()]
        if not self.dt > 0:
            out.append("dt must be positive")
        if self.substeps < 1 or self.nav_substeps < 1:
            out.append("substeps must be >= 1")
        if self.duration < 0:
            out.append("duration must be non-negative")
        if self.sensor_noise < 0:
            out.append("sensor_noise must be non-negative")
        K = self.K_mu
        if not np.allclose(K, K.T) or np.linalg.eigvalsh(0.5 * (K + K.T)).min() <= 0:
            out.append("observer: K_mu is not symmetric positive definite")
        est = self.estimator
        if np.any(est.k <= 0):
            out.append("estimator: gains k must be positive")
        if np.any(est.rho_inf <= 0):
            out.append("estimator: rho_inf must be positive")
        if not est.lam > 0:
            out.append("estimator: lam must be positive")
        if np.any(est.rho_floor <= est.rho_inf):
            out.append("estimator: rho_floor must exceed rho_inf, otherwise rho_0 > |e(0)| "
                       "and rho_0 > rho_inf cannot both hold")
        pose = self.object.initial_pose
        L = self.nav.length_scale
        if not in_free_space(pose, self.world, L):
            out.append("object: initial pose is not in the free space (beta <= 0)")
        if not in_free_space(self.nav.goal, self.world, L):
            out.append("object: goal is not in the free space (beta <= 0)")
        if abs(pose[4]) >= np.pi / 2 - SINGULARITY_MARGIN:
            out.append("object: initial pitch too close to the Euler singularity")
        shares = np.array([r.load_share for r in self.robots])
        if np.any(shares <= 0) or np.any(shares > 1) or (len(shares) > 1 and np.any(shares >= 1)):
            out.append("load shares must lie in (0, 1)")
        if abs(shares.sum() - 1.0) > 1e-9:
            out.append(f"load shares sum to {shares.sum():.6g}, not 1")
        offsets = [r.offset for r in self.robots]
        for i, r in enumerate(self.robots):
            out += [f"robot {i}: {m}" for m in r.params.problems()]
            out += [f"robot {i}: {m}" for m in r.gains.problems()]
            if np.linalg.norm(r.offset) > self.object.radius + 1e-12:
                out.append(f"robot {i}: grasp offset exceeds the object radius")
            for j in range(i):
                if np.allclose(offsets[i], offsets[j]):
                    out.append(f"robots {j} and {i}: grasp offsets coincide")
        internal = sum(grasp_jacobian(r.offset).T @ r.gains.lambda_int for r in self.robots)
        if np.linalg.norm(internal) > 1e-9 * (1 + sum(np.linalg.norm(r.gains.lambda_int)
                                                      for r in self.robots)):
            out.append("lambda_int does not lie in the null space of the grasp aggregation")
        return out


def apply_overrides(raw: dict, overrides) -> dict:
    """Return a copy of ``raw`` with ``key.sub=value`` overrides applied.

    Values are parsed as JSON when possible (numbers, lists, booleans) and
    kept as strings otherwise.  List elements are addressed by index,
    e.g. ``robots.0.grasp_offset``.
    """
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise SchemaError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            node = _child(node, p, key)
        last = parts[-1]
        if isinstance(node, list):
            node[_index(node, last, key)] = value
        elif isinstance(node, dict):
            node[last] = value
        else:
            raise SchemaError(f"override {key!r}: cannot descend into a scalar")
    return raw


def _index(node, p, key):
    try:
        i = int(p)
        node[i]
        return i
    except (ValueError, IndexError):
        raise SchemaError(f"override {key!r}: bad list index {p!r}") from None


def _child(node, p, key):
    if isinstance(node, list):
        return node[_index(node, p, key)]
    if isinstance(node, dict):
        if p not in node:
            node[p] = {}
        elif not isinstance(node[p], (dict, list)):
            raise SchemaError(f"override {key!r}: {p!r} is a scalar")
        return node[p]
    raise SchemaError(f"override {key!r}: cannot descend into a scalar")


def read_raw(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def _hydro(d) -> HydroParams:
    return HydroParams(matrix6(d["mass_matrix"]), vector6(d["drag_linear"]),
                       vector6(d["drag_quadratic"]), vector6(d.get("restoring", 0.0)))


def parse_config(raw: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a decoded JSON document.

    Raises:
      SchemaError: on structural problems (missing keys, wrong shapes).
    """
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None

    w = raw["world"]
    obj = raw["object"]
    robot_radius = float(w["robot_radius"])
    world = SphereWorld(w.get("center", [0.0, 0.0, 0.0]), float(w["radius"]),
                        [(o["center"], o["radius"]) for o in w.get("obstacles", [])],
                        team_radius=robot_radius + float(obj["radius"]))
    nav = NavParams(goal=obj["goal"], **raw["nav"])
    object_cfg = ObjectConfig(
        _hydro(obj), float(obj["radius"]), np.asarray(obj["initial_pose"], dtype=float),
        np.asarray(obj.get("initial_twist", [0.0] * 6), dtype=float),
        np.asarray(obj["goal"], dtype=float),
        np.asarray(obj.get("theta_d", [0.0] * N_THETA_D), dtype=float))

    c = raw["controller"]
    dist = raw.get("disturbance", {})
    disturbance = DisturbanceModel(tuple(dist.get("amplitude", (0.3, 0.3))),
                                   float(dist.get("frequency", np.pi / 15.0)),
                                   bool(dist.get("enabled", True)))
    n = len(raw["robots"])
    robots = []
    for entry in raw["robots"]:
        d = {**raw["robot_defaults"], **entry}
        missing = [k for k in ("mass_matrix", "drag_linear", "drag_quadratic", "grasp_offset")
                   if k not in d]
        if missing:
            raise SchemaError(f"robot entry lacks {', '.join(missing)}")
        params = _hydro(d)
        gains = ImpedanceGains(
            matrix6(c["M_dO"]), matrix6(c["D_dO"]), matrix6(c["K_dO"]), matrix6(c["M_d"]),
            matrix6(c["F"]), matrix6(c["Y"]), matrix6(c["K"]), _gamma(c["Gamma"]),
            np.broadcast_to(np.asarray(c["Gamma_d"], dtype=float), (N_THETA_D,)).copy(),
            vector6(d.get("lambda_int", 0.0)))
        theta = theta_from_params(params)
        if "theta_hat" in d:
            theta_hat = np.asarray(d["theta_hat"], dtype=float)
        else:
            theta_hat = float(d.get("theta_hat_scale", 1.0)) * theta
        robots.append(RobotConfig(
            params, np.asarray(d["grasp_offset"], dtype=float), gains,
            np.asarray(d.get("theta_d", [0.0] * N_THETA_D), dtype=float), theta_hat,
            np.asarray(d.get("theta_d_hat", [0.0] * N_THETA_D), dtype=float),
            float(d.get("load_share", 1.0 / n))))

    e = raw["estimator"]
    estimator = EstimatorConfig(vector6(e["k"]), vector6(e["rho_inf"]), float(e["lam"]),
                                vector6(e.get("rho_floor", 0.5)),
                                vector6(e.get("initial_offset", 0.0)))
    bounds = None
    if c.get("theta_bounds"):
        # keep the mass and drag estimates physically meaningful
        lo = np.full(N_THETA, -np.inf)
        lo[21:33] = 0.0
        bounds = (lo, np.full(N_THETA, np.inf))
    return ScenarioConfig(
        world=world, object=object_cfg, robots=tuple(robots), nav=nav,
        K_mu=matrix6(raw["observer"]["K_mu"]), estimator=estimator, disturbance=disturbance,
        dt=float(raw.get("dt", 0.1)), substeps=int(raw.get("substeps", 10)),
        nav_substeps=int(raw.get("nav_substeps", 2)),
        duration=float(raw.get("duration", 300.0)), seed=int(raw.get("seed", 0)),
        sensor_noise=float(raw.get("sensor_noise", 0.0)), adapt_bounds=bounds,
        name=str(raw.get("name", "scenario")))


def load_config(path, overrides=()) -> ScenarioConfig:
    return parse_config(apply_overrides(read_raw(path), overrides))


def nominal_raw() -> dict:
    """Decoded copy of the shipped nominal scenario."""
    text = resources.files("uvmscoop").joinpath("scenarios/nominal.json").read_text()
    return json.loads(text)


def nominal_path() -> Path:
    return Path(str(resources.files("uvmscoop").joinpath("scenarios/nominal.json")))


def nominal_config(overrides=()) -> ScenarioConfig:
    return parse_config(apply_overrides(nominal_raw(), overrides))
