"""Single-output Gaussian process regression with an anisotropic RBF kernel.

Zero prior mean, homoscedastic Gaussian observation noise, Cholesky-backed
posterior. ``GpPosterior`` caches the triangular factor of
``K + sigma^2 I + jitter I`` so repeated predictions are cheap, and exposes the
same joint-prediction interface the multi-fidelity posterior does (with a
single fidelity level), so acquisition code is agnostic to which one it holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import InvalidInputError, NumericFailureError

# Diagonal jitter starts at JITTER_REL * signal variance and is escalated by
# x10 on factorization failure up to JITTER_REL_MAX, after which we give up.
JITTER_REL = 1e-8
JITTER_REL_MAX = 1e-4

DEFAULT_NOISE_VARIANCE = 1e-6
NOISE_BOUNDS = (1e-8, 1e-1)
VARIANCE_BOUNDS = (1e-4, 1e3)
LENGTHSCALE_BOUNDS = (1e-2, 1e1)


@dataclass(frozen=True)
class RbfKernel:
    """Squared-exponential kernel with one lengthscale per input dimension.

    ``variance`` is allowed to be zero so degenerate gap kernels can switch a
    component off entirely; it is never negative.
    """

    variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float).reshape(-1)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "variance", float(self.variance))
        if self.variance < 0:
            raise InvalidInputError("kernel variance must be >= 0")
        if np.any(ls <= 0):
            raise InvalidInputError("kernel lengthscales must be > 0")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)


def rbf_eval(kernel: RbfKernel, e: np.ndarray, e2: np.ndarray) -> float:
    """Kernel value between two points: ``v * exp(-0.5 * sum(((e-e2)/ls)^2))``."""
    e = np.asarray(e, dtype=float).reshape(-1)
    e2 = np.asarray(e2, dtype=float).reshape(-1)
    if len(e) != kernel.dim or len(e2) != kernel.dim:
        raise InvalidInputError(
            f"dimension mismatch: kernel dim {kernel.dim}, inputs {len(e)} and {len(e2)}"
        )
    z = (e - e2) / kernel.lengthscales
    return kernel.variance * float(np.exp(-0.5 * np.dot(z, z)))


def rbf_matrix(kernel: RbfKernel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel matrix between row sets ``a`` (n,d) and ``b`` (m,d)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != kernel.dim or b.shape[1] != kernel.dim:
        raise InvalidInputError("input dimension does not match kernel lengthscales")
    if kernel.variance == 0.0:
        return np.zeros((a.shape[0], b.shape[0]))
    diff = (a[:, None, :] - b[None, :, :]) / kernel.lengthscales
    return kernel.variance * np.exp(-0.5 * np.sum(diff * diff, axis=2))


@dataclass
class Dataset:
    """Observed inputs/outputs with shared observation-noise variance."""

    inputs: np.ndarray
    outputs: np.ndarray
    noise_variance: float = DEFAULT_NOISE_VARIANCE

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        if self.inputs.shape[0] != len(self.outputs):
            raise InvalidInputError("inputs and outputs disagree in length")
        if self.inputs.shape[0] < 1:
            raise InvalidInputError("dataset needs at least one observation")
        if self.noise_variance < 0:
            raise InvalidInputError("noise variance must be >= 0")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def chol_with_jitter(gram: np.ndarray, scale: float, context: str) -> tuple[np.ndarray, float]:
    """Cholesky-factor ``gram`` with an escalating diagonal jitter.

    Returns the lower factor and the jitter that succeeded; raises
    ``NumericFailureError`` naming ``context`` once the escalation cap is hit.
    """
    scale = max(float(scale), 1e-12)
    jitter = JITTER_REL * scale
    eye = np.eye(gram.shape[0])
    while jitter <= JITTER_REL_MAX * scale * (1 + 1e-12):
        try:
            lower = scipy.linalg.cholesky(gram + jitter * eye, lower=True)
            return lower, jitter
        except scipy.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericFailureError(
        f"Gram matrix not positive definite after jitter escalation ({context})"
    )


@dataclass
class GpPosterior:
    """Posterior over a single latent function, with cached factorization."""

    kernel: RbfKernel
    dataset: Dataset
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float

    # Number of fidelity levels; lets acquisition code treat a plain GP as the
    # degenerate single-level case of the multi-fidelity posterior.
    @property
    def q(self) -> int:
        return 1

    def predictive_noise(self, fidelity: int = 1) -> float:
        return self.dataset.noise_variance

    def joint(self, points: np.ndarray, fidelities=None) -> tuple[np.ndarray, np.ndarray]:
        """Joint posterior mean vector and covariance matrix at ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k_xn = rbf_matrix(self.kernel, points, self.dataset.inputs)
        mean = k_xn @ self.alpha
        v = scipy.linalg.solve_triangular(self.chol, k_xn.T, lower=True)
        cov = rbf_matrix(self.kernel, points, points) - v.T @ v
        return mean, cov


def build_posterior(ds: Dataset, kernel: RbfKernel, jitter: float | None = None) -> GpPosterior:
    """Factorize ``K + sigma^2 I (+ jitter)`` and cache solves for prediction.

    ``jitter`` overrides the escalation rule with a fixed diagonal shift, which
    lets equivalence checks against other factorizations share one
    regularization exactly.
    """
    if ds.dim != kernel.dim:
        raise InvalidInputError("dataset dimension does not match kernel")
    gram = rbf_matrix(kernel, ds.inputs, ds.inputs) + ds.noise_variance * np.eye(ds.n)
    context = f"dataset n={ds.n}, d={ds.dim}, noise={ds.noise_variance:g}"
    if jitter is None:
        lower, jitter = chol_with_jitter(gram, kernel.variance, context)
    else:
        try:
            lower = scipy.linalg.cholesky(gram + jitter * np.eye(ds.n), lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise NumericFailureError(f"fixed-jitter factorization failed ({context})") from exc
    alpha = scipy.linalg.cho_solve((lower, True), ds.outputs)
    return GpPosterior(kernel=kernel, dataset=ds, chol=lower, alpha=alpha, jitter=jitter)


def predict(post: GpPosterior, e: np.ndarray) -> tuple[float, float]:
    """Posterior mean and variance at one point; variance clamped at zero."""
    e = np.asarray(e, dtype=float).reshape(1, -1)
    if e.shape[1] != post.dataset.dim:
        raise InvalidInputError("query dimension does not match dataset")
    mean, cov = post.joint(e)
    return float(mean[0]), max(float(cov[0, 0]), 0.0)


def predict_batch(post: GpPosterior, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Marginal means and (clamped) variances at many points."""
    mean, cov = post.joint(points)
    return mean, np.maximum(np.diag(cov), 0.0)


def log_marginal_likelihood(ds: Dataset, kernel: RbfKernel) -> float:
    """Gaussian evidence of the data under the kernel and dataset noise."""
    post = build_posterior(ds, kernel)
    fit = -0.5 * float(ds.outputs @ post.alpha)
    logdet = -float(np.sum(np.log(np.diag(post.chol))))
    return fit + logdet - 0.5 * ds.n * np.log(2.0 * np.pi)


def fit_hyperparams(
    ds: Dataset,
    bounds: dict[str, tuple[float, float]] | None = None,
    restarts: int = 4,
    seed: int = 0,
    fit_noise: bool = True,
    maxfun: int = 400,
) -> tuple[RbfKernel, float]:
    """Maximize the evidence over kernel parameters (and noise, if enabled).

    Multi-start L-BFGS-B in log-parameter space, deterministic given ``seed``.
    Returns the best kernel together with the noise variance (the dataset's own
    noise when ``fit_noise`` is off).
    """
    if restarts < 1:
        raise InvalidInputError("restarts must be >= 1")
    bounds = bounds or {}
    var_b = bounds.get("variance", VARIANCE_BOUNDS)
    ls_b = bounds.get("lengthscale", LENGTHSCALE_BOUNDS)
    noise_b = bounds.get("noise", NOISE_BOUNDS)
    d = ds.dim

    log_bounds = [np.log(var_b)] + [np.log(ls_b)] * d
    if fit_noise:
        log_bounds.append(np.log(noise_b))

    def unpack(theta):
        kernel = RbfKernel(variance=np.exp(theta[0]), lengthscales=np.exp(theta[1 : 1 + d]))
        noise = np.exp(theta[1 + d]) if fit_noise else ds.noise_variance
        return kernel, float(noise)

    def objective(theta):
        kernel, noise = unpack(theta)
        try:
            value = log_marginal_likelihood(
                Dataset(ds.inputs, ds.outputs, noise_variance=noise), kernel
            )
        except NumericFailureError:
            return 1e12
        return -value

    y_var = max(float(np.var(ds.outputs)), 1e-4)
    base = [np.log(np.clip(y_var, *var_b))] + [np.log(np.clip(0.3, *ls_b))] * d
    if fit_noise:
        base.append(np.log(np.clip(max(ds.noise_variance, 1e-6), *noise_b)))
    starts = [np.asarray(base)]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6F17]))
    for _ in range(restarts - 1):
        starts.append(np.asarray([rng.uniform(lo, hi) for lo, hi in log_bounds]))

    best_theta, best_val = None, np.inf
    for theta0 in starts:
        res = scipy.optimize.minimize(
            objective,
            theta0,
            method="L-BFGS-B",
            bounds=log_bounds,
            options={"maxfun": maxfun},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if best_theta is None or best_val >= 1e12:
        raise NumericFailureError("all hyperparameter fitting restarts failed")
    return unpack(best_theta)
