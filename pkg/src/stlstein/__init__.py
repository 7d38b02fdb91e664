"""Trajectory optimization for signal temporal logic tasks with Stein variational particles."""

from .dynamics import DynamicsSpec, backprop_controls, rollout, rollout_jacobians
from .objective import StlObjective
from .optimizer import RunResult, SvpioConfig, run_svpio, svgd_step
from .scenarios import Scenario, builtin, build_formula, check_trajectory, load_scenario
from .semantics import SmoothingConfig, Trace, robustness_hard, robustness_smooth
from .stl import parse_formula, pretty_print

__version__ = "0.1.0"

__all__ = [
    "DynamicsSpec", "RunResult", "Scenario", "SmoothingConfig", "StlObjective", "SvpioConfig",
    "Trace", "backprop_controls", "build_formula", "builtin", "check_trajectory",
    "load_scenario", "parse_formula", "pretty_print", "robustness_hard", "robustness_smooth",
    "rollout", "rollout_jacobians", "run_svpio", "svgd_step",
]
