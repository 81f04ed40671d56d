"""Planar single-integrator extremum seeking with GEKF gradient estimation.

The controller dithers a position with sin/cos inputs, estimates the gradient
of the measured objective with a geometric continuous-discrete EKF, and feeds
the estimate to an amplitude adaptation law that shrinks the dither as the
source is approached.
"""
from .errors import ConfigError, NumericalAbort
from .esc import EscParams, EscState
from .field import ScalarField, SensorModel, build_field
from .gekf import GekfParams, GekfState
from .kernels import BACKEND
from .sim import Scenario, TrajectoryRecord, run_scenario

__all__ = [
    "BACKEND", "ConfigError", "EscParams", "EscState", "GekfParams", "GekfState",
    "NumericalAbort", "ScalarField", "Scenario", "SensorModel", "TrajectoryRecord",
    "build_field", "run_scenario",
]
__version__ = "0.1.0"
