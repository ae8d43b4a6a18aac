"""Shared controller type and the simulator-stack interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from ..trajectory import Trajectory
from .space import UncertaintySpace


@dataclass(frozen=True)
class Controller:
    """Deterministic policy mapping an observation vector to a discrete action."""

    name: str
    policy: Callable[[np.ndarray], int]

    def __call__(self, obs: np.ndarray) -> int:
        return int(self.policy(np.asarray(obs, dtype=float)))


@runtime_checkable
class SimulatorStack(Protocol):
    """A family of simulators of the same system at fidelity levels 1..q."""

    space: UncertaintySpace
    fidelity_names: tuple[str, ...]

    @property
    def q(self) -> int: ...

    def simulate(self, e: np.ndarray, fidelity: int, seed: int) -> Trajectory: ...
