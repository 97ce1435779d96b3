"""Inertial-Newton optimizers with adaptive gradient scaling, reference
methods, learning-rate schedules, desk-scale objectives, a continuous-flow
consistency layer and a config-driven experiment harness."""

from . import harness, numerics, ode, optimizers, problems, schedulers
from .errors import (
    ConfigError,
    ContractViolation,
    DivergenceError,
    DomainError,
    InnapropError,
    ParseError,
    WellPosednessError,
)
from .numerics import ParamVector, Precision, RngStream

__version__ = "0.1.0"
