import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mffalsify.errors import InvalidInputError, NumericFailureError
from mffalsify.gp import (
    Dataset,
    GpPosterior,
    JITTER_REL,
    RbfKernel,
    build_posterior,
    chol_with_jitter,
    fit_hyperparams,
    log_marginal_likelihood,
    predict,
    predict_batch,
    rbf_eval,
    rbf_matrix,
)


def dense_oracle(ds, kernel, query):
    """Literal dense-inverse posterior, sharing only the jitter constant."""
    K = rbf_matrix(kernel, ds.inputs, ds.inputs)
    A = K + (ds.noise_variance + JITTER_REL * kernel.variance) * np.eye(ds.n)
    A_inv = np.linalg.inv(A)
    k_vec = rbf_matrix(kernel, np.atleast_2d(query), ds.inputs)[0]
    mean = k_vec @ A_inv @ ds.outputs
    var = rbf_eval(kernel, query, query) - k_vec @ A_inv @ k_vec
    return mean, var


def random_dataset(rng, n, d, noise=1e-4):
    X = rng.random((n, d))
    y = np.sin(3 * X.sum(axis=1)) + 0.1 * rng.standard_normal(n)
    return Dataset(X, y, noise_variance=noise)


class TestRbfKernel:
    def test_zero_distance_gives_signal_variance(self):
        k = RbfKernel(2.5, [0.3, 0.7])
        e = np.array([0.4, 0.9])
        assert rbf_eval(k, e, e) == pytest.approx(2.5)

    def test_unit_distance_scalar_value(self):
        k = RbfKernel(1.0, [1.0])
        assert rbf_eval(k, [0.0], [1.0]) == pytest.approx(math.exp(-0.5))

    def test_vanishes_at_long_range(self):
        k = RbfKernel(1.0, [0.1])
        assert rbf_eval(k, [0.0], [100.0]) < 1e-12

    def test_dimension_mismatch_raises(self):
        k = RbfKernel(1.0, [1.0, 1.0])
        with pytest.raises(InvalidInputError):
            rbf_eval(k, [0.0], [0.0, 1.0])

    def test_negative_lengthscale_rejected(self):
        with pytest.raises(InvalidInputError):
            RbfKernel(1.0, [-1.0])

    def test_gram_symmetry_is_exact(self, rng):
        k = RbfKernel(1.3, [0.2, 0.5, 0.9])
        X = rng.random((25, 3))
        K = rbf_matrix(k, X, X)
        assert np.max(np.abs(K - K.T)) == 0.0


class TestPosterior:
    def test_noise_free_interpolation(self):
        ds = Dataset([[0.3, 0.4]], [1.7], noise_variance=0.0)
        k = RbfKernel(1.0, [0.5, 0.5])
        post = build_posterior(ds, k)
        mean, var = predict(post, [0.3, 0.4])
        assert mean == pytest.approx(1.7, abs=1e-7)
        assert var <= 10 * JITTER_REL * k.variance

    def test_far_point_recovers_prior(self, rng):
        ds = random_dataset(rng, 8, 2)
        k = RbfKernel(1.9, [0.1, 0.1])
        post = build_posterior(ds, k)
        mean, var = predict(post, [50.0, -50.0])
        assert mean == pytest.approx(0.0, abs=1e-10)
        assert var == pytest.approx(1.9, rel=1e-9)

    def test_matches_dense_oracle_fixed_instance(self):
        rng = np.random.default_rng(42)
        ds = random_dataset(rng, 12, 3)
        k = RbfKernel(1.4, [0.3, 0.6, 0.9])
        post = build_posterior(ds, k)
        for query in rng.random((10, 3)):
            mean, var = predict(post, query)
            mean_o, var_o = dense_oracle(ds, k, query)
            assert abs(mean - mean_o) < 1e-8
            assert abs(var - max(var_o, 0.0)) < 1e-8

    def test_variance_never_exceeds_prior(self, rng):
        ds = random_dataset(rng, 15, 2)
        k = RbfKernel(0.8, [0.4, 0.4])
        post = build_posterior(ds, k)
        _, variances = predict_batch(post, rng.random((200, 2)))
        assert np.all(variances <= k.variance + 1e-8)

    def test_adding_observation_never_raises_variance(self, rng):
        k = RbfKernel(1.0, [0.3, 0.3])
        ds = random_dataset(rng, 10, 2)
        post = build_posterior(ds, k)
        extra_x = rng.random(2)
        extra_y = 0.3
        grown = Dataset(
            np.vstack([ds.inputs, extra_x]),
            np.append(ds.outputs, extra_y),
            noise_variance=ds.noise_variance,
        )
        post2 = build_posterior(grown, k)
        queries = rng.random((100, 2))
        _, v1 = predict_batch(post, queries)
        _, v2 = predict_batch(post2, queries)
        assert np.all(v2 <= v1 + 1e-8)

    def test_joint_diag_matches_marginals(self, rng):
        ds = random_dataset(rng, 9, 2)
        k = RbfKernel(1.0, [0.5, 0.5])
        post = build_posterior(ds, k)
        pts = rng.random((6, 2))
        mean, cov = post.joint(pts)
        means_b, vars_b = predict_batch(post, pts)
        np.testing.assert_allclose(mean, means_b, atol=1e-12)
        np.testing.assert_allclose(np.maximum(np.diag(cov), 0.0), vars_b, atol=1e-12)

    def test_acts_as_single_level_posterior(self, rng):
        ds = random_dataset(rng, 5, 1)
        post = build_posterior(ds, RbfKernel(1.0, [0.3]))
        assert post.q == 1
        assert post.predictive_noise(1) == ds.noise_variance


class TestCholJitter:
    def test_non_psd_matrix_fails_with_context(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
        with pytest.raises(NumericFailureError, match="my context"):
            chol_with_jitter(bad, scale=1.0, context="my context")

    def test_duplicate_rows_survive_via_jitter(self):
        ds = Dataset([[0.5], [0.5]], [1.0, 1.0], noise_variance=0.0)
        post = build_posterior(ds, RbfKernel(1.0, [0.3]))
        mean, _ = predict(post, [0.5])
        assert mean == pytest.approx(1.0, abs=1e-6)


class TestLogMarginalLikelihood:
    def test_single_point_closed_form(self):
        ds = Dataset([[0.0]], [0.0], noise_variance=0.0)
        value = log_marginal_likelihood(ds, RbfKernel(1.0, [1.0]))
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-6)

    def test_scaling_outputs_decreases_evidence(self, rng):
        ds = random_dataset(rng, 10, 2, noise=1e-3)
        k = RbfKernel(1.0, [0.5, 0.5])
        scaled = Dataset(ds.inputs, 10.0 * ds.outputs, noise_variance=ds.noise_variance)
        assert log_marginal_likelihood(scaled, k) < log_marginal_likelihood(ds, k)

    def test_permutation_invariance(self, rng):
        ds = random_dataset(rng, 12, 3)
        k = RbfKernel(1.2, [0.4, 0.4, 0.4])
        perm = rng.permutation(ds.n)
        shuffled = Dataset(ds.inputs[perm], ds.outputs[perm], noise_variance=ds.noise_variance)
        assert abs(log_marginal_likelihood(ds, k) - log_marginal_likelihood(shuffled, k)) < 1e-10


class TestFitHyperparams:
    def test_deterministic_given_seed(self, rng):
        ds = random_dataset(rng, 14, 2)
        k1, n1 = fit_hyperparams(ds, restarts=2, seed=9)
        k2, n2 = fit_hyperparams(ds, restarts=2, seed=9)
        assert np.array_equal(k1.lengthscales, k2.lengthscales)
        assert k1.variance == k2.variance and n1 == n2

    def test_improves_over_default_kernel(self, rng):
        ds = random_dataset(rng, 18, 2, noise=1e-4)
        default = RbfKernel(1.0, [0.3, 0.3])
        fitted, noise = fit_hyperparams(ds, restarts=3, seed=0)
        fitted_ds = Dataset(ds.inputs, ds.outputs, noise_variance=noise)
        assert log_marginal_likelihood(fitted_ds, fitted) >= log_marginal_likelihood(ds, default)

    def test_restarts_must_be_positive(self, rng):
        with pytest.raises(InvalidInputError):
            fit_hyperparams(random_dataset(rng, 5, 1), restarts=0)


@given(st.integers(0, 2**31 - 1))
def test_dense_oracle_agreement_random(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(2, 20)), int(rng.integers(1, 6))
    ds = random_dataset(rng, n, d, noise=10 ** rng.uniform(-6, -2))
    k = RbfKernel(10 ** rng.uniform(-1, 1), rng.uniform(0.2, 2.0, d))
    post = build_posterior(ds, k)
    query = rng.random(d)
    mean, var = predict(post, query)
    mean_o, var_o = dense_oracle(ds, k, query)
    assert abs(mean - mean_o) < 1e-8
    assert abs(var - max(var_o, 0.0)) < 1e-8
