"""Axis-aligned box of environment parameters with unit-box normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats.qmc

from ..errors import InvalidInputError


@dataclass(frozen=True)
class UncertaintySpace:
    """Closed per-dimension intervals the falsifier searches over."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        lows = np.asarray(self.lows, dtype=float).reshape(-1)
        highs = np.asarray(self.highs, dtype=float).reshape(-1)
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        if len(lows) != len(highs):
            raise InvalidInputError("lows and highs disagree in length")
        if np.any(lows >= highs):
            raise InvalidInputError("each interval needs lo < hi")

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def widths(self) -> np.ndarray:
        return self.highs - self.lows

    def contains(self, e: np.ndarray, atol: float = 1e-9) -> bool:
        e = np.asarray(e, dtype=float).reshape(-1)
        if len(e) != self.dim:
            return False
        return bool(np.all(e >= self.lows - atol) and np.all(e <= self.highs + atol))

    def require(self, e: np.ndarray, context: str = "environment parameters") -> np.ndarray:
        e = np.asarray(e, dtype=float).reshape(-1)
        if not self.contains(e):
            raise InvalidInputError(f"{context} {e.tolist()} outside the uncertainty space")
        return e

    def normalize(self, e: np.ndarray) -> np.ndarray:
        """Map points from the box to [0, 1]^d (rows if 2-D)."""
        return (np.asarray(e, dtype=float) - self.lows) / self.widths

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        """Map unit-box points back to the original coordinates."""
        return self.lows + np.asarray(u, dtype=float) * self.widths

    def sample_lhs(self, n: int, seed: int = 0) -> np.ndarray:
        """Seeded Latin-hypercube sample of ``n`` points inside the box."""
        sampler = scipy.stats.qmc.LatinHypercube(d=self.dim, seed=np.random.default_rng(seed))
        return self.denormalize(sampler.random(n))
