"""Auto-regressive multi-fidelity GP over the extended input space (e, level).

Fidelity levels are 1-based: level 1 is the cheapest simulator, level q the
most accurate. Adjacent levels are linked linearly, ``f_i = eta_i * f_{i-1} +
gap_i``, where each ``gap_i`` is an independent GP. That makes the whole stack
a single GP on inputs tagged with their fidelity index, with level kernels

    k_1 = base_kernel
    k_l = eta_l^2 * k_{l-1} + gap_kernel_l          (l = 2..q)

and cross-level covariance ``cov((e,i),(e2,j)) = (prod eta over the gap) *
k_min(i,j)(e, e2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.stats.qmc

from .errors import InvalidInputError, NumericFailureError
from .gp import (
    Dataset,
    LENGTHSCALE_BOUNDS,
    NOISE_BOUNDS,
    RbfKernel,
    VARIANCE_BOUNDS,
    chol_with_jitter,
    rbf_matrix,
)

ETA_BOUNDS = (-10.0, 10.0)


@dataclass(frozen=True)
class ArParams:
    """Linear transfer factors and kernels of the auto-regressive stack.

    ``eta[l-2]`` scales level ``l-1`` into level ``l``; ``gap_kernels[l-2]``
    is the bias GP kernel of level ``l``.
    """

    eta: np.ndarray
    base_kernel: RbfKernel
    gap_kernels: tuple[RbfKernel, ...]

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float).reshape(-1)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gap_kernels", tuple(self.gap_kernels))
        if len(self.gap_kernels) != len(eta):
            raise InvalidInputError("need one gap kernel per eta factor")
        if not np.all(np.isfinite(eta)):
            raise InvalidInputError("eta factors must be finite")
        for k in self.gap_kernels:
            if k.dim != self.base_kernel.dim:
                raise InvalidInputError("gap kernels must match base kernel dimension")

    @property
    def q(self) -> int:
        return len(self.eta) + 1

    @property
    def dim(self) -> int:
        return self.base_kernel.dim


@dataclass
class MfDataset:
    """Per-fidelity observation sets D_1..D_q (level 1 first)."""

    levels: list[Dataset]

    def __post_init__(self):
        if len(self.levels) < 2:
            raise InvalidInputError("multi-fidelity dataset needs at least 2 levels")
        dims = {ds.dim for ds in self.levels}
        if len(dims) != 1:
            raise InvalidInputError("all levels must share one input dimension")

    @property
    def q(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return self.levels[0].dim

    def is_nested(self) -> bool:
        """True when each higher level's inputs are rows of the level below."""
        for lower, upper in zip(self.levels, self.levels[1:]):
            lower_rows = {tuple(row) for row in lower.inputs}
            if any(tuple(row) not in lower_rows for row in upper.inputs):
                return False
        return True

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Concatenate all levels: inputs, fidelity tags, outputs, noise diag."""
        xs = np.vstack([ds.inputs for ds in self.levels])
        fids = np.concatenate(
            [np.full(ds.n, i + 1, dtype=int) for i, ds in enumerate(self.levels)]
        )
        ys = np.concatenate([ds.outputs for ds in self.levels])
        noise = np.concatenate([np.full(ds.n, ds.noise_variance) for ds in self.levels])
        return xs, fids, ys, noise


def _check_level(i: int, q: int) -> None:
    if not 1 <= i <= q:
        raise InvalidInputError(f"fidelity index {i} out of range 1..{q}")


def level_kernel_matrix(p: ArParams, level: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Within-level kernel ``k_level`` evaluated between row sets."""
    _check_level(level, p.q)
    out = rbf_matrix(p.base_kernel, a, b)
    for l in range(2, level + 1):
        out = p.eta[l - 2] ** 2 * out + rbf_matrix(p.gap_kernels[l - 2], a, b)
    return out


def mf_cov_matrix(p: ArParams, a: np.ndarray, i: int, b: np.ndarray, j: int) -> np.ndarray:
    """Cross-covariance block between points at level ``i`` and level ``j``."""
    _check_level(i, p.q)
    _check_level(j, p.q)
    lo, hi = min(i, j), max(i, j)
    factor = float(np.prod(p.eta[lo - 1 : hi - 1])) if hi > lo else 1.0
    return factor * level_kernel_matrix(p, lo, a, b)


def mf_cov(p: ArParams, e: np.ndarray, i: int, e2: np.ndarray, j: int) -> float:
    """Scalar covariance between extended inputs ``(e, i)`` and ``(e2, j)``."""
    e = np.asarray(e, dtype=float).reshape(1, -1)
    e2 = np.asarray(e2, dtype=float).reshape(1, -1)
    return float(mf_cov_matrix(p, e, i, e2, j)[0, 0])


def joint_gram(p: ArParams, xs: np.ndarray, fids: np.ndarray) -> np.ndarray:
    """Full kernel matrix over extended inputs grouped by fidelity level."""
    fids = np.asarray(fids, dtype=int)
    n = len(fids)
    gram = np.empty((n, n))
    levels = np.unique(fids)
    for i in levels:
        sel_i = np.flatnonzero(fids == i)
        for j in levels:
            if j < i:
                continue
            sel_j = np.flatnonzero(fids == j)
            block = mf_cov_matrix(p, xs[sel_i], int(i), xs[sel_j], int(j))
            gram[np.ix_(sel_i, sel_j)] = block
            if j != i:
                gram[np.ix_(sel_j, sel_i)] = block.T
    return gram


@dataclass
class MfPosterior:
    """Joint posterior over all fidelity levels, with cached factorization."""

    ar_params: ArParams
    train_inputs: np.ndarray = field(repr=False)
    train_fidelities: np.ndarray = field(repr=False)
    train_outputs: np.ndarray = field(repr=False)
    noise_by_level: np.ndarray
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float

    @property
    def q(self) -> int:
        return self.ar_params.q

    def predictive_noise(self, fidelity: int) -> float:
        _check_level(fidelity, self.q)
        return float(self.noise_by_level[fidelity - 1])

    def _cross(self, points: np.ndarray, fidelities: np.ndarray) -> np.ndarray:
        fidelities = np.asarray(fidelities, dtype=int)
        out = np.empty((points.shape[0], self.train_inputs.shape[0]))
        for i in np.unique(fidelities):
            rows = np.flatnonzero(fidelities == i)
            for j in np.unique(self.train_fidelities):
                cols = np.flatnonzero(self.train_fidelities == j)
                out[np.ix_(rows, cols)] = mf_cov_matrix(
                    self.ar_params, points[rows], int(i), self.train_inputs[cols], int(j)
                )
        return out

    def joint(self, points: np.ndarray, fidelities) -> tuple[np.ndarray, np.ndarray]:
        """Joint posterior mean/covariance at extended inputs ``(points, fidelities)``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        fidelities = np.asarray(fidelities, dtype=int)
        if len(fidelities) != points.shape[0]:
            raise InvalidInputError("one fidelity tag per point required")
        k_xn = self._cross(points, fidelities)
        mean = k_xn @ self.alpha
        v = scipy.linalg.solve_triangular(self.chol, k_xn.T, lower=True)
        prior = joint_gram(self.ar_params, points, fidelities)
        return mean, prior - v.T @ v


def build_mf_posterior(ds: MfDataset, p: ArParams) -> MfPosterior:
    """Fit the joint GP on the stacked, fidelity-tagged observations."""
    if ds.dim != p.dim:
        raise InvalidInputError("dataset dimension does not match AR kernels")
    if ds.q != p.q:
        raise InvalidInputError(f"dataset has {ds.q} levels, AR params have {p.q}")
    xs, fids, ys, noise = ds.stacked()
    gram = joint_gram(p, xs, fids) + np.diag(noise)
    scale = max(p.base_kernel.variance, *(k.variance for k in p.gap_kernels), 1e-12)
    context = f"mf dataset q={ds.q}, n={len(ys)}, d={ds.dim}"
    lower, jitter = chol_with_jitter(gram, scale, context)
    alpha = scipy.linalg.cho_solve((lower, True), ys)
    return MfPosterior(
        ar_params=p,
        train_inputs=xs,
        train_fidelities=fids,
        train_outputs=ys,
        noise_by_level=np.asarray([d.noise_variance for d in ds.levels]),
        chol=lower,
        alpha=alpha,
        jitter=jitter,
    )


def mf_predict(post: MfPosterior, e: np.ndarray, i: int) -> tuple[float, float]:
    """Posterior mean/variance of the level-``i`` function at ``e``."""
    e = np.asarray(e, dtype=float).reshape(1, -1)
    mean, cov = post.joint(e, np.asarray([i]))
    return float(mean[0]), max(float(cov[0, 0]), 0.0)


def joint_log_marginal_likelihood(ds: MfDataset, p: ArParams, noise_variance: float) -> float:
    """Evidence of all observations under the AR model with shared noise."""
    xs, fids, ys, _ = ds.stacked()
    gram = joint_gram(p, xs, fids) + noise_variance * np.eye(len(ys))
    scale = max(p.base_kernel.variance, *(k.variance for k in p.gap_kernels), 1e-12)
    lower, _ = chol_with_jitter(gram, scale, "joint evidence")
    alpha = scipy.linalg.cho_solve((lower, True), ys)
    return (
        -0.5 * float(ys @ alpha)
        - float(np.sum(np.log(np.diag(lower))))
        - 0.5 * len(ys) * np.log(2.0 * np.pi)
    )


class MfFit(NamedTuple):
    params: ArParams
    noise_variance: float


def fit_ar_params(
    ds: MfDataset,
    restarts: int = 2,
    seed: int = 0,
    maxfun: int = 400,
    warm_start: MfFit | None = None,
) -> MfFit:
    """Maximize the joint evidence over eta factors, kernels, and shared noise.

    Eta factors start at 1.0; extra restarts perturb all parameters from a
    seeded stream, so the result is deterministic given ``seed``. Raises once
    every restart fails numerically.
    """
    if restarts < 1:
        raise InvalidInputError("restarts must be >= 1")
    q, d = ds.q, ds.dim
    if q < 2:
        raise InvalidInputError("at least 2 fidelity levels required")

    n_kernels = q  # base + q-1 gaps, each (variance, d lengthscales)
    log_bounds = []
    for _ in range(n_kernels):
        log_bounds.append(np.log(VARIANCE_BOUNDS))
        log_bounds.extend([np.log(LENGTHSCALE_BOUNDS)] * d)
    bounds = log_bounds + [ETA_BOUNDS] * (q - 1) + [np.log(NOISE_BOUNDS)]

    def unpack(theta) -> tuple[ArParams, float]:
        kernels = []
        pos = 0
        for _ in range(n_kernels):
            kernels.append(
                RbfKernel(
                    variance=np.exp(theta[pos]),
                    lengthscales=np.exp(theta[pos + 1 : pos + 1 + d]),
                )
            )
            pos += 1 + d
        eta = np.asarray(theta[pos : pos + q - 1], dtype=float)
        noise = float(np.exp(theta[-1]))
        return ArParams(eta=eta, base_kernel=kernels[0], gap_kernels=tuple(kernels[1:])), noise

    def objective(theta):
        params, noise = unpack(theta)
        try:
            return -joint_log_marginal_likelihood(ds, params, noise)
        except NumericFailureError:
            return 1e12

    base_var = max(float(np.var(ds.levels[0].outputs)), 1e-2)
    start = []
    for k in range(n_kernels):
        start.append(np.log(np.clip(base_var if k == 0 else 0.25 * base_var, *VARIANCE_BOUNDS)))
        start.extend([np.log(0.3)] * d)
    start += [1.0] * (q - 1)
    start.append(np.log(max(ds.levels[0].noise_variance, 1e-6)))
    starts = [np.asarray(start)]
    if warm_start is not None:
        starts.insert(0, _pack(warm_start, d))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA12F]))
    while len(starts) < restarts + (warm_start is not None):
        theta = np.asarray(start, dtype=float)
        theta += rng.normal(scale=0.5, size=len(theta))
        theta = np.clip(theta, [b[0] for b in bounds], [b[1] for b in bounds])
        starts.append(theta)

    best_theta, best_val = None, np.inf
    for theta0 in starts:
        res = scipy.optimize.minimize(
            objective, theta0, method="L-BFGS-B", bounds=bounds, options={"maxfun": maxfun}
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if best_theta is None or best_val >= 1e12:
        raise NumericFailureError("all AR hyperparameter restarts failed")
    params, noise = unpack(best_theta)
    return MfFit(params=params, noise_variance=noise)


def _pack(fit: MfFit, d: int) -> np.ndarray:
    parts = []
    for k in (fit.params.base_kernel, *fit.params.gap_kernels):
        parts.append(np.log(max(k.variance, 1e-8)))
        parts.extend(np.log(k.lengthscales))
    parts.extend(fit.params.eta)
    parts.append(np.log(max(fit.noise_variance, NOISE_BOUNDS[0])))
    return np.asarray(parts, dtype=float)


def make_nested_design(space, sizes, seed: int = 0) -> list[np.ndarray]:
    """Nested space-filling initialization sets, largest (cheapest) level first.

    Level 1 is a seeded Latin-hypercube sample of ``sizes[0]`` points scaled to
    ``space``; each subsequent level is a random subset of the previous one.
    """
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise InvalidInputError("design sizes must be >= 1")
    if any(a < b for a, b in zip(sizes, sizes[1:])):
        raise InvalidInputError(f"design sizes must be non-increasing, got {sizes}")
    seq = np.random.SeedSequence([seed, 0x5EED])
    sampler = scipy.stats.qmc.LatinHypercube(d=space.dim, seed=np.random.default_rng(seq))
    unit = sampler.random(sizes[0])
    points = space.denormalize(unit)
    designs = [points]
    rng = np.random.default_rng(seq.spawn(1)[0])
    for size in sizes[1:]:
        idx = rng.choice(len(designs[-1]), size=size, replace=False)
        designs.append(designs[-1][np.sort(idx)])
    return designs
