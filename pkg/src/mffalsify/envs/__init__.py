"""Benchmark environments with explicit fidelity knobs, plus hand-written controllers."""

from .base import Controller, SimulatorStack
from .space import UncertaintySpace

__all__ = ["Controller", "SimulatorStack", "UncertaintySpace"]
