"""Relative simulator query costs from wall-clock timing and output similarity.

For each fidelity level i the measurement runs identical (probe, seed)
experiments on every simulator, records mean wall-clock time t_i, and compares
fidelity-i trajectories to top-fidelity trajectories by cosine similarity s_i.
The cost ratio to the top level is then

    lambda_q / lambda_i = (t_q / t_i) * s_i        (s_q = 1)

and the table is normalized so lambda_1 = 1. Dividing by s_i shrinks the
relative cost of a dissimilar cheap simulator; the formula is implemented
exactly as stated even though the opposite convention is arguable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, SimulationError
from .trajectory import Trajectory

DEFAULT_N_TRIALS = 10
DEFAULT_N_PROBES = 10


@dataclass(frozen=True)
class CostTable:
    """Per-fidelity relative query costs, normalized so the cheapest level is 1."""

    lambdas: tuple[float, ...]
    provenance: str = "configured"
    timing_stats: tuple[float, ...] | None = None
    similarity_stats: tuple[float, ...] | None = None
    ordering_warning: bool = field(default=False)

    def __post_init__(self):
        lambdas = tuple(float(v) for v in self.lambdas)
        object.__setattr__(self, "lambdas", lambdas)
        if len(lambdas) < 1:
            raise InvalidInputError("cost table needs at least one fidelity")
        if any(v <= 0 for v in lambdas):
            raise InvalidInputError("costs must be positive")
        if abs(lambdas[0] - 1.0) > 1e-12:
            raise InvalidInputError("cost table must be normalized with lambda_1 = 1")
        if self.provenance not in ("measured", "configured"):
            raise InvalidInputError("provenance must be 'measured' or 'configured'")

    @property
    def q(self) -> int:
        return len(self.lambdas)

    def to_dict(self) -> dict:
        doc = {"lambdas": list(self.lambdas), "provenance": self.provenance}
        if self.timing_stats is not None:
            doc["timing_seconds"] = list(self.timing_stats)
        if self.similarity_stats is not None:
            doc["similarity_to_top"] = list(self.similarity_stats)
        doc["ordering_warning"] = self.ordering_warning
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "CostTable":
        return cls(
            lambdas=tuple(doc["lambdas"]),
            provenance=doc.get("provenance", "configured"),
            timing_stats=tuple(doc["timing_seconds"]) if "timing_seconds" in doc else None,
            similarity_stats=(
                tuple(doc["similarity_to_top"]) if "similarity_to_top" in doc else None
            ),
            ordering_warning=bool(doc.get("ordering_warning", False)),
        )


def configured_costs(lambdas) -> CostTable:
    """Build a table from raw positive costs, normalizing the first to 1."""
    lambdas = [float(v) for v in lambdas]
    if any(v <= 0 for v in lambdas):
        raise InvalidInputError("costs must be positive")
    return CostTable(lambdas=tuple(v / lambdas[0] for v in lambdas), provenance="configured")


def save_cost_table(table: CostTable, path: str | Path) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n")


def load_cost_table(path: str | Path) -> CostTable:
    return CostTable.from_dict(json.loads(Path(path).read_text()))


def _flatten(traj: Trajectory, length: int, use_observations: bool) -> np.ndarray:
    block = traj.observations if (use_observations and traj.observations is not None) else traj.states
    return np.asarray(block[:length], dtype=float).reshape(-1)


def cosine_similarity(a: Trajectory, b: Trajectory, use_observations: bool = False) -> float:
    """Cosine of the flattened state sequences, truncated to the shorter run.

    Returns 0 when either flattened trajectory is the zero vector. By default
    the true (un-noised) states are compared, so the score reflects dynamics
    gaps rather than sensor gaps.
    """
    if a.state_dim != b.state_dim:
        raise InvalidInputError(
            f"state dimensionality mismatch: {a.state_dim} vs {b.state_dim}"
        )
    length = min(len(a), len(b))
    va = _flatten(a, length, use_observations)
    vb = _flatten(b, length, use_observations)
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def measure_costs(
    stack,
    probes,
    n_trials: int = DEFAULT_N_TRIALS,
    seed: int = 0,
    use_observations: bool = False,
) -> CostTable:
    """Measure the relative cost table of a simulator stack.

    Runs every probe ``n_trials`` times per fidelity with identical seeds
    across fidelities, strictly sequentially so the wall-clock means stay
    honest. Any simulator failure is re-raised with the fidelity attached.
    """
    if n_trials < 1:
        raise InvalidInputError("n_trials must be >= 1")
    probes = [np.asarray(p, dtype=float) for p in probes]
    if not probes:
        raise InvalidInputError("need at least one probe point")
    q = stack.q
    seeds = [int(s) for s in np.random.default_rng(seed).integers(0, 2**31 - 1, len(probes))]

    mean_times = []
    reference: list[Trajectory] = []
    similarities = []
    for level in range(1, q + 1):
        elapsed = []
        trajectories = []
        for probe, probe_seed in zip(probes, seeds):
            traj = None
            for _ in range(n_trials):
                start = time.perf_counter()
                try:
                    traj = stack.simulate(probe, level, probe_seed)
                except Exception as exc:  # noqa: BLE001 - annotate and propagate
                    raise SimulationError(
                        f"simulator failed at fidelity {level}: {exc}", fidelity=level
                    ) from exc
                elapsed.append(time.perf_counter() - start)
            trajectories.append(traj)
        mean_times.append(float(np.mean(elapsed)))
        if level == q:
            reference = trajectories
        else:
            similarities.append(trajectories)

    sim_means = []
    for level_trajs in similarities:
        values = [
            cosine_similarity(traj, ref, use_observations=use_observations)
            for traj, ref in zip(level_trajs, reference)
        ]
        sim_means.append(float(np.mean(values)))
    sim_means.append(1.0)  # the top fidelity compared to itself

    # lambda_i proportional to t_i / s_i, then normalized to the cheapest level.
    raw = [t / max(s, 1e-12) for t, s in zip(mean_times, sim_means)]
    lambdas = tuple(v / raw[0] for v in raw)
    ordering_warning = any(a > b * (1 + 1e-9) for a, b in zip(lambdas, lambdas[1:]))
    return CostTable(
        lambdas=lambdas,
        provenance="measured",
        timing_stats=tuple(mean_times),
        similarity_stats=tuple(sim_means),
        ordering_warning=ordering_warning,
    )
