"""Analytic multi-fidelity benchmark family for deterministic tests and studies.

The default pair is the classic 1-D two-fidelity test problem

    f_hf(x) = (6x - 2)^2 * sin(12x - 4)
    f_lf(x) = 0.5 * f_hf(x) + 10 * (x - 0.5) - 5

on [0, 1]; the high-fidelity minimum is known, so falsification runs against
it have a ground-truth violating region.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidInputError
from ..specs import Pred, Predicate, SpecFormula
from ..trajectory import Trajectory
from .space import UncertaintySpace

FORRESTER_MINIMIZER = 0.75724876
FORRESTER_MINIMUM = -6.02074006


@dataclass(frozen=True)
class SyntheticMfBenchmark:
    """Fidelity-ordered analytic functions with a known top-level minimum."""

    dim: int
    functions: tuple[Callable[[np.ndarray], float], ...]
    minimizer: np.ndarray
    minimum: float

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(
            self, "minimizer", np.asarray(self.minimizer, dtype=float).reshape(-1)
        )
        if len(self.functions) < 1:
            raise InvalidInputError("benchmark needs at least one fidelity")
        if len(self.minimizer) != self.dim:
            raise InvalidInputError("minimizer dimension mismatch")

    @property
    def q(self) -> int:
        return len(self.functions)


def high_fidelity_forrester(x: np.ndarray) -> float:
    x = float(np.asarray(x).reshape(-1)[0])
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)


def low_fidelity_forrester(x: np.ndarray) -> float:
    x = float(np.asarray(x).reshape(-1)[0])
    return 0.5 * high_fidelity_forrester(x) + 10.0 * (x - 0.5) - 5.0


def forrester_benchmark() -> SyntheticMfBenchmark:
    return SyntheticMfBenchmark(
        dim=1,
        functions=(low_fidelity_forrester, high_fidelity_forrester),
        minimizer=[FORRESTER_MINIMIZER],
        minimum=FORRESTER_MINIMUM,
    )


def synthetic_eval(bench: SyntheticMfBenchmark, e: np.ndarray, i: int) -> float:
    """Evaluate fidelity ``i`` of the benchmark at a unit-box point."""
    if not 1 <= i <= bench.q:
        raise InvalidInputError(f"fidelity {i} out of range 1..{bench.q}")
    e = np.asarray(e, dtype=float).reshape(-1)
    if len(e) != bench.dim:
        raise InvalidInputError("point dimension does not match benchmark")
    if np.any(e < -1e-9) or np.any(e > 1 + 1e-9):
        raise InvalidInputError(f"point {e.tolist()} outside the unit box")
    return float(bench.functions[i - 1](e))


def synthetic_value_spec() -> SpecFormula:
    """Robustness is simply the recorded scalar; negative values falsify."""

    def value_margin(traj: Trajectory) -> float:
        return float(np.min(traj.states[:, 0]))

    return Pred(Predicate("synthetic_value", value_margin, state_dim=1))


@dataclass(frozen=True)
class SyntheticStack:
    """Wraps a benchmark as a simulator stack emitting one-sample trajectories."""

    benchmark: SyntheticMfBenchmark
    fidelity_names: tuple[str, ...]

    @property
    def space(self) -> UncertaintySpace:
        return UncertaintySpace(lows=np.zeros(self.benchmark.dim), highs=np.ones(self.benchmark.dim))

    @property
    def q(self) -> int:
        return self.benchmark.q

    def simulate(self, e: np.ndarray, fidelity: int, seed: int) -> Trajectory:
        value = synthetic_eval(self.benchmark, e, fidelity)
        return Trajectory(
            times=[0.0],
            states=[[value]],
            fidelity_index=fidelity,
            env_params=np.asarray(e, dtype=float),
            seed=seed,
        )


def make_synthetic_stack(levels: Sequence[str] = ("low", "high")) -> SyntheticStack:
    bench = forrester_benchmark()
    if len(levels) != bench.q:
        raise InvalidInputError("forrester benchmark has exactly two fidelities")
    return SyntheticStack(benchmark=bench, fidelity_names=tuple(levels))
