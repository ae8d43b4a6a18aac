"""Trajectory container shared by simulators, robustness monitors, and the cost model."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


@dataclass
class Trajectory:
    """Timestamped state sequence produced by one simulator run at one fidelity.

    ``states`` always holds the true physical state. ``observations``, when a
    fidelity setting degrades the sensors, holds what the controller actually
    saw; it is ``None`` for simulators whose controller observes the true state.
    """

    times: np.ndarray
    states: np.ndarray
    fidelity_index: int
    env_params: np.ndarray
    seed: int
    observations: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.env_params = np.asarray(self.env_params, dtype=float).reshape(-1)
        if self.observations is not None:
            self.observations = np.atleast_2d(np.asarray(self.observations, dtype=float))
        if len(self.times) < 1:
            raise InvalidInputError("trajectory must contain at least one sample")
        if self.states.shape[0] != len(self.times):
            raise InvalidInputError(
                f"times ({len(self.times)}) and states ({self.states.shape[0]}) disagree"
            )
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise InvalidInputError("trajectory times must be strictly increasing")
        if self.fidelity_index < 1:
            raise InvalidInputError("fidelity_index is 1-based")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]


def write_trajectory_jsonl(traj: Trajectory, path: str | Path) -> None:
    """Write one ``{"t": ..., "state": [...]}`` record per line."""
    with open(path, "w") as fh:
        for t, s in zip(traj.times, traj.states):
            fh.write(json.dumps({"t": float(t), "state": [float(v) for v in s]}) + "\n")


def read_trajectory_jsonl(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a trajectory file back as ``(times, states)`` arrays."""
    times, states = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            times.append(float(rec["t"]))
            states.append([float(v) for v in rec["state"]])
    if not times:
        raise InvalidInputError(f"trajectory file {path} is empty")
    return np.asarray(times), np.asarray(states)
