"""Entropy-search acquisition with cost-scaled joint (point, fidelity) selection.

The distribution over the minimizer's location is discretized onto a candidate
set and estimated by Monte Carlo from joint posterior samples of the
top-fidelity function. A query's value is the expected drop in the entropy of
that distribution after conditioning on a fantasized observation at the query,
and queries at different fidelity levels compete after dividing by their
relative simulator cost.

Conditioning on a fantasy never refits hyperparameters: it is the exact
rank-one Gaussian update, applied pathwise to the common base samples (the
same standard-normal draws are reused before and after conditioning, so the
entropy difference reflects information, not fresh Monte Carlo noise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats.qmc

from .errors import InvalidInputError
from .gp import chol_with_jitter

_TAG_BASE = 0xB5E
_TAG_FANTASY = 0xFA27
_TAG_PMIN = 0x991

MIN_PREDICTIVE_VAR = 1e-15


@dataclass(frozen=True)
class CandidateSet:
    """Discretization of the acquisition search, in the unit box."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.shape[0] < 2:
            raise InvalidInputError("candidate set needs at least 2 points")
        if np.any(pts < -1e-9) or np.any(pts > 1 + 1e-9):
            raise InvalidInputError("candidates must lie in the unit box")

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def sample_candidates(dim: int, m: int, seed: int) -> CandidateSet:
    """Seeded scrambled-Halton candidate set of ``m`` points in [0, 1]^dim."""
    sampler = scipy.stats.qmc.Halton(d=dim, scramble=True, seed=np.random.default_rng(seed))
    return CandidateSet(points=sampler.random(m))


@dataclass(frozen=True)
class EsConfig:
    """Monte Carlo budget of the entropy-search estimate."""

    n_posterior_samples: int = 256
    n_fantasies: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_posterior_samples < 2:
            raise InvalidInputError("need at least 2 posterior samples")
        if self.n_fantasies < 1:
            raise InvalidInputError("need at least 1 fantasy")


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats of a discrete distribution; 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < -1e-12):
        raise InvalidInputError("probabilities must be nonnegative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise InvalidInputError(f"probabilities sum to {p.sum()}, not 1")
    return float(_entropy_last_axis(np.maximum(p, 0.0)))


def _entropy_last_axis(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def _pmin_from_samples(samples: np.ndarray) -> np.ndarray:
    """Fraction of sample rows minimized at each column; exact ties split equally."""
    rowmin = samples.min(axis=-1, keepdims=True)
    mask = samples == rowmin
    counts = mask.sum(axis=-1, keepdims=True)
    return (mask / counts).sum(axis=-2) / samples.shape[-2]


def _pmin_argmin(samples: np.ndarray) -> np.ndarray:
    """Fast pmin for the acquisition hot loop: first-index argmin per row.

    Exact ties (a measure-zero event for jittered posterior samples) go to the
    lowest column instead of being split; the public ``pmin_distribution``
    keeps the exact tie-splitting rule.
    """
    idx = samples.argmin(axis=-1)
    m = samples.shape[-1]
    if samples.ndim == 2:
        return np.bincount(idx, minlength=m) / samples.shape[-2]
    lead = int(np.prod(samples.shape[:-2]))
    n = samples.shape[-2]
    offsets = np.arange(lead)[:, None] * m
    counts = np.bincount((idx.reshape(lead, n) + offsets).ravel(), minlength=lead * m)
    return counts.reshape(*samples.shape[:-2], m) / n


def _posterior_samples(mean, cov, n_samples, rng):
    scale = max(float(np.max(np.diag(cov))), 1e-12)
    lower, _ = chol_with_jitter(cov, scale, "acquisition joint covariance")
    z = rng.standard_normal((n_samples, len(mean)))
    return mean + z @ lower.T


def pmin_distribution(post, candidates: CandidateSet, n_samples: int, seed: int) -> np.ndarray:
    """Monte Carlo distribution of the top-fidelity minimizer over the candidates."""
    if n_samples < 2:
        raise InvalidInputError("n_samples must be >= 2")
    mean, cov = post.joint(candidates.points, np.full(candidates.m, post.q))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _TAG_PMIN]))
    samples = _posterior_samples(mean, cov, n_samples, rng)
    return _pmin_from_samples(samples)


def _es_single_query(h_base, base_top, f_query, cross, mean_query, var_query, noise, n_fantasies, rng):
    """Entropy drop from one fantasized observation, via pathwise conditioning.

    ``base_top`` are joint samples at the candidates (top fidelity), ``f_query``
    the matching latent samples at the query. Conditioning on an observed value
    y maps each sample f to ``f + cross * (y - f_query - eps) / v`` with
    ``v = var_query + noise``, which has exactly the conditioned mean and
    covariance.
    """
    v = max(var_query + noise, MIN_PREDICTIVE_VAR)
    fantasy_values = mean_query + np.sqrt(v) * rng.standard_normal(n_fantasies)
    eps = np.sqrt(max(noise, 0.0)) * rng.standard_normal(base_top.shape[0])
    coef = ((fantasy_values[:, None] - f_query[None, :] - eps[None, :]) / v).astype(np.float32)
    conditioned = base_top[None, :, :] + coef[:, :, None] * cross.astype(np.float32)[None, None, :]
    h_fantasy = _entropy_last_axis(_pmin_argmin(conditioned))
    return h_base - float(np.mean(h_fantasy))


def es_value(post, candidates: CandidateSet, query: tuple[np.ndarray, int], cfg: EsConfig) -> float:
    """Expected entropy reduction (nats) of observing the query point/fidelity."""
    e, fidelity = query
    if not 1 <= fidelity <= post.q:
        raise InvalidInputError(f"query fidelity {fidelity} out of range 1..{post.q}")
    e = np.asarray(e, dtype=float).reshape(1, -1)
    pts = np.vstack([candidates.points, e])
    fids = np.concatenate([np.full(candidates.m, post.q), [fidelity]])
    mean, cov = post.joint(pts, fids)
    rng_base = np.random.default_rng(np.random.SeedSequence([cfg.seed, _TAG_BASE]))
    samples = _posterior_samples(mean, cov, cfg.n_posterior_samples, rng_base)
    rng_fantasy = np.random.default_rng(np.random.SeedSequence([cfg.seed, _TAG_FANTASY]))
    base_top = samples[:, : candidates.m].astype(np.float32)
    h_base = float(_entropy_last_axis(_pmin_argmin(base_top)))
    return _es_single_query(
        h_base=h_base,
        base_top=base_top,
        f_query=samples[:, -1],
        cross=cov[: candidates.m, -1],
        mean_query=float(mean[-1]),
        var_query=float(cov[-1, -1]),
        noise=post.predictive_noise(fidelity),
        n_fantasies=cfg.n_fantasies,
        rng=rng_fantasy,
    )


def es_matrix(post, candidates: CandidateSet, cfg: EsConfig) -> np.ndarray:
    """Entropy-search value of every (candidate, fidelity) query; shape (m, q).

    All queries share one set of base posterior samples over the candidates at
    every fidelity; each query's fantasy stream is derived from
    ``(seed, fidelity, candidate index)`` so evaluations are order-independent.
    """
    m, q = candidates.m, post.q
    pts = np.vstack([candidates.points] * q)
    fids = np.concatenate([np.full(m, level) for level in range(1, q + 1)])
    mean, cov = post.joint(pts, fids)
    rng_base = np.random.default_rng(np.random.SeedSequence([cfg.seed, _TAG_BASE]))
    samples = _posterior_samples(mean, cov, cfg.n_posterior_samples, rng_base)

    top = slice((q - 1) * m, q * m)
    base_top = samples[:, top].astype(np.float32)
    h_base = float(_entropy_last_axis(_pmin_argmin(base_top)))
    values = np.empty((m, q))
    for level in range(1, q + 1):
        noise = post.predictive_noise(level)
        for j in range(m):
            col = (level - 1) * m + j
            rng_fantasy = np.random.default_rng(
                np.random.SeedSequence([cfg.seed, _TAG_FANTASY, level, j])
            )
            values[j, level - 1] = _es_single_query(
                h_base=h_base,
                base_top=base_top,
                f_query=samples[:, col],
                cross=cov[top, col],
                mean_query=float(mean[col]),
                var_query=float(cov[col, col]),
                noise=noise,
                n_fantasies=cfg.n_fantasies,
                rng=rng_fantasy,
            )
    return values


def argmax_cost_scaled(scores: np.ndarray, lambdas: np.ndarray) -> tuple[int, int]:
    """Best (candidate index, fidelity) by score/cost; ties prefer the higher
    fidelity, then the lowest candidate index."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
    if scores.shape[1] != len(lambdas):
        raise InvalidInputError("one cost per fidelity column required")
    scaled = scores / lambdas[None, :]
    best = np.max(scaled)
    ties = np.argwhere(scaled == best)
    j, i0 = min(ties.tolist(), key=lambda ji: (-ji[1], ji[0]))
    return int(j), int(i0) + 1


def select_next(
    post,
    candidates: CandidateSet,
    costs,
    cfg: EsConfig,
    diagnostics: dict | None = None,
) -> tuple[np.ndarray, int]:
    """Pick the next (environment parameter, fidelity) to simulate.

    Maximizes entropy reduction per unit cost over the candidate set and all
    fidelity levels. ``costs`` is anything exposing per-fidelity ``lambdas``
    (or an array of them). Deterministic given ``cfg.seed``.
    """
    lambdas = np.asarray(getattr(costs, "lambdas", costs), dtype=float).reshape(-1)
    if len(lambdas) != post.q:
        raise InvalidInputError(f"need {post.q} costs, got {len(lambdas)}")
    if np.any(lambdas <= 0):
        raise InvalidInputError("costs must be positive")
    scores = es_matrix(post, candidates, cfg)
    j, fidelity = argmax_cost_scaled(scores, lambdas)
    if diagnostics is not None:
        scaled = scores / lambdas[None, :]
        diagnostics["per_fidelity_best"] = [float(v) for v in scaled.max(axis=0)]
        diagnostics["selected_es"] = float(scores[j, fidelity - 1])
        diagnostics["selected_scaled"] = float(scaled[j, fidelity - 1])
        diagnostics["candidate_index"] = j
    return candidates.points[j].copy(), fidelity
