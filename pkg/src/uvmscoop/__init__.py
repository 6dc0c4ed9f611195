"""Decentralized leader-follower transport of a rigid object by underwater
vehicle-manipulator systems: planning, control, observation, estimation and
a rigid-grasp simulator."""
from .config import ScenarioConfig, load_config, nominal_config, parse_config
from .engine import Simulation, SimLog, metrics, run_scenario, step, write_outputs
from .errors import (
    ConfigError,
    EnvelopeViolation,
    NonFiniteState,
    OnObstacleBoundary,
    ParseError,
    RankDeficientJacobian,
    SchemaError,
    SingularMass,
    SingularOrientation,
    StuckAtSaddle,
    UvmsError,
)

__version__ = "0.1.0"
