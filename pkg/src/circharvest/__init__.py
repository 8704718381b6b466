"""Spatial renewable-resource harvesting on a circle.

Impulse stock dynamics, constant-share revenue, adjoint-based optimal
control, durable-good monopoly, an I-player harvesting game and Monte Carlo
checks of collusion detectability under noise.
"""

from .model import (
    ConvergenceError,
    DomainError,
    ModelParams,
    ParameterError,
    RoundGrid,
    StockState,
    grow,
    harvest_jump,
    location_at,
    round_schedule,
)

__all__ = [
    "ConvergenceError",
    "DomainError",
    "ModelParams",
    "ParameterError",
    "RoundGrid",
    "StockState",
    "grow",
    "harvest_jump",
    "location_at",
    "round_schedule",
]

__version__ = "0.1.0"
