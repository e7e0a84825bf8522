"""Numerical core: networks, environments, rollouts, modulation and the update phase."""

from .errors import CheckpointError, ConfigurationError, NumericalError
from .modulation import ControllerState, ModulationConfig
from .update import MetricsRecord, UpdateConfig

__all__ = [
    "CheckpointError",
    "ConfigurationError",
    "ControllerState",
    "MetricsRecord",
    "ModulationConfig",
    "NumericalError",
    "UpdateConfig",
]
