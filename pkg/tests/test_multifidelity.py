import numpy as np
import pytest

from mffalsify.envs.space import UncertaintySpace
from mffalsify.errors import InvalidInputError
from mffalsify.gp import Dataset, RbfKernel, build_posterior, predict, rbf_eval
from mffalsify.multifidelity import (
    ArParams,
    MfDataset,
    build_mf_posterior,
    fit_ar_params,
    joint_gram,
    make_nested_design,
    mf_cov,
    mf_cov_matrix,
    mf_predict,
)


def two_level_params(eta=2.0, gap_var=0.5):
    return ArParams(
        eta=[eta],
        base_kernel=RbfKernel(1.0, [0.3]),
        gap_kernels=(RbfKernel(gap_var, [0.25]),),
    )


def nested_dataset(rng, f_low, f_high, n_low=10, n_high=5, noise=1e-6, d=1):
    space = UncertaintySpace(lows=np.zeros(d), highs=np.ones(d))
    designs = make_nested_design(space, [n_low, n_high], seed=int(rng.integers(2**16)))
    y_low = np.array([f_low(x) for x in designs[0]])
    y_high = np.array([f_high(x) for x in designs[1]])
    return MfDataset(
        [
            Dataset(designs[0], y_low, noise_variance=noise),
            Dataset(designs[1], y_high, noise_variance=noise),
        ]
    )


class TestMfCov:
    def test_same_level_two_block(self):
        p = two_level_params(eta=1.7, gap_var=0.4)
        e, e2 = np.array([0.2]), np.array([0.6])
        expected = 1.7**2 * rbf_eval(p.base_kernel, e, e2) + rbf_eval(p.gap_kernels[0], e, e2)
        assert mf_cov(p, e, 2, e2, 2) == pytest.approx(expected, rel=1e-12)

    def test_cross_level_block(self):
        p = two_level_params(eta=1.7)
        e, e2 = np.array([0.2]), np.array([0.6])
        expected = 1.7 * rbf_eval(p.base_kernel, e, e2)
        assert mf_cov(p, e, 1, e2, 2) == pytest.approx(expected, rel=1e-12)

    def test_degenerate_identity_collapses_levels(self):
        p = two_level_params(eta=1.0, gap_var=0.0)
        e, e2 = np.array([0.15]), np.array([0.75])
        k11 = rbf_eval(p.base_kernel, e, e2)
        assert mf_cov(p, e, 1, e2, 2) == pytest.approx(k11, rel=1e-12)
        assert mf_cov(p, e, 2, e2, 2) == pytest.approx(k11, rel=1e-12)
        assert mf_cov(p, e, 1, e2, 1) == pytest.approx(k11, rel=1e-12)

    def test_symmetric_in_extended_inputs(self, rng):
        p = ArParams(
            eta=[1.3, -0.7],
            base_kernel=RbfKernel(1.0, [0.4, 0.4]),
            gap_kernels=(RbfKernel(0.3, [0.3, 0.3]), RbfKernel(0.2, [0.5, 0.5])),
        )
        for _ in range(25):
            e, e2 = rng.random(2), rng.random(2)
            i, j = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            assert mf_cov(p, e, i, e2, j) == mf_cov(p, e2, j, e, i)

    def test_index_out_of_range(self):
        p = two_level_params()
        with pytest.raises(InvalidInputError):
            mf_cov(p, np.array([0.1]), 3, np.array([0.2]), 1)

    def test_three_level_cross_product_of_etas(self):
        p = ArParams(
            eta=[1.5, 0.5],
            base_kernel=RbfKernel(1.0, [0.3]),
            gap_kernels=(RbfKernel(0.4, [0.3]), RbfKernel(0.2, [0.3])),
        )
        e, e2 = np.array([0.2]), np.array([0.5])
        assert mf_cov(p, e, 1, e2, 3) == pytest.approx(
            1.5 * 0.5 * rbf_eval(p.base_kernel, e, e2), rel=1e-12
        )


class TestMfPosterior:
    def test_interpolates_observed_points_noise_free(self, rng):
        ds = nested_dataset(
            rng,
            lambda x: np.sin(6 * x[0]),
            lambda x: 2 * np.sin(6 * x[0]) + 0.3,
            n_low=7,
            n_high=3,
            noise=0.0,
        )
        post = build_mf_posterior(ds, two_level_params())
        for level in (1, 2):
            data = ds.levels[level - 1]
            for x, y in zip(data.inputs, data.outputs):
                mean, _ = mf_predict(post, x, level)
                assert mean == pytest.approx(y, abs=1e-6)

    def test_eta_zero_top_level_ignores_low_data(self, rng):
        ds = nested_dataset(rng, lambda x: np.sin(6 * x[0]), lambda x: np.cos(4 * x[0]))
        params = ArParams(
            eta=[0.0],
            base_kernel=RbfKernel(1.0, [0.3]),
            gap_kernels=(RbfKernel(0.8, [0.35]),),
        )
        post = build_mf_posterior(ds, params)
        single = build_posterior(ds.levels[1], params.gap_kernels[0], jitter=post.jitter)
        for x in np.linspace(0, 1, 17):
            mf_mean, mf_var = mf_predict(post, [x], 2)
            s_mean, s_var = predict(single, [x])
            assert abs(mf_mean - s_mean) < 1e-8
            assert abs(mf_var - s_var) < 1e-8

    def test_collapse_matches_pooled_single_gp(self, rng):
        f = lambda x: np.sin(5 * x[0]) + 0.2 * x[0]
        ds = nested_dataset(rng, f, f, noise=1e-6)
        params = two_level_params(eta=1.0, gap_var=0.0)
        post = build_mf_posterior(ds, params)
        pooled = Dataset(
            np.vstack([ds.levels[0].inputs, ds.levels[1].inputs]),
            np.concatenate([ds.levels[0].outputs, ds.levels[1].outputs]),
            noise_variance=1e-6,
        )
        single = build_posterior(pooled, params.base_kernel, jitter=post.jitter)
        for x in np.linspace(0.05, 0.95, 13):
            s_mean, s_var = predict(single, [x])
            for level in (1, 2):
                mean, var = mf_predict(post, [x], level)
                assert abs(mean - s_mean) < 1e-8
                assert abs(var - s_var) < 1e-8

    def test_joint_gram_psd_random_designs(self, rng):
        space2 = UncertaintySpace(lows=[0, 0], highs=[1, 1])
        for trial in range(20):
            q = int(rng.integers(2, 4))
            eta = rng.uniform(-2, 2, q - 1)
            params = ArParams(
                eta=eta,
                base_kernel=RbfKernel(float(rng.uniform(0.2, 2)), rng.uniform(0.2, 1.5, 2)),
                gap_kernels=tuple(
                    RbfKernel(float(rng.uniform(0.0, 1)), rng.uniform(0.2, 1.5, 2))
                    for _ in range(q - 1)
                ),
            )
            sizes = sorted(rng.integers(2, 9, q))[::-1]
            designs = make_nested_design(space2, sizes, seed=trial)
            xs = np.vstack(designs)
            fids = np.concatenate([np.full(len(d), i + 1) for i, d in enumerate(designs)])
            gram = joint_gram(params, xs, fids)
            min_eig = float(np.linalg.eigvalsh(gram).min())
            assert min_eig > -1e-8

    def test_conditioning_on_high_fidelity_reduces_top_variance(self, rng):
        f_low = lambda x: np.sin(6 * x[0])
        f_high = lambda x: 2 * np.sin(6 * x[0]) + 0.3 * x[0]
        base = nested_dataset(rng, f_low, f_high, n_low=8, n_high=2)
        params = two_level_params()
        post_small = build_mf_posterior(base, params)
        extra_x = np.array([[0.42], [0.77]])
        grown = MfDataset(
            [
                base.levels[0],
                Dataset(
                    np.vstack([base.levels[1].inputs, extra_x]),
                    np.append(base.levels[1].outputs, [f_high(x) for x in extra_x]),
                    noise_variance=base.levels[1].noise_variance,
                ),
            ]
        )
        post_big = build_mf_posterior(grown, params)
        for x in extra_x:
            _, v_small = mf_predict(post_small, x, 2)
            _, v_big = mf_predict(post_big, x, 2)
            assert v_big <= v_small + 1e-8

    def test_block_structure_matches_mf_cov_matrix(self, rng):
        params = two_level_params(eta=1.4, gap_var=0.6)
        a, b = rng.random((4, 1)), rng.random((3, 1))
        block = mf_cov_matrix(params, a, 1, b, 2)
        for i in range(4):
            for j in range(3):
                assert block[i, j] == pytest.approx(mf_cov(params, a[i], 1, b[j], 2), rel=1e-12)


class TestFitArParams:
    def test_recovers_doubling_factor(self, rng):
        f1 = lambda x: np.sin(5.5 * x[0]) + 0.4 * x[0]
        gen = np.random.default_rng(3)
        ds = nested_dataset(
            gen,
            lambda x: f1(x) + 1e-3 * gen.standard_normal(),
            lambda x: 2.0 * f1(x) + 1e-3 * gen.standard_normal(),
            n_low=14,
            n_high=8,
            noise=1e-4,
        )
        fit = fit_ar_params(ds, restarts=2, seed=1)
        assert 1.8 <= fit.params.eta[0] <= 2.2

    def test_identical_levels_give_unit_eta_and_small_gap(self):
        f = lambda x: np.sin(5 * x[0]) + 0.3
        gen = np.random.default_rng(11)
        ds = nested_dataset(gen, f, f, n_low=14, n_high=8, noise=1e-4)
        fit = fit_ar_params(ds, restarts=2, seed=2)
        assert 0.9 <= fit.params.eta[0] <= 1.1
        assert fit.params.gap_kernels[0].variance < 0.1 * fit.params.base_kernel.variance

    def test_single_level_rejected(self):
        with pytest.raises(InvalidInputError):
            MfDataset([Dataset([[0.0]], [1.0])])

    def test_deterministic_given_seed(self, rng):
        ds = nested_dataset(rng, lambda x: np.sin(4 * x[0]), lambda x: np.sin(4 * x[0]) + 0.2)
        f1 = fit_ar_params(ds, restarts=2, seed=5)
        f2 = fit_ar_params(ds, restarts=2, seed=5)
        assert np.array_equal(f1.params.eta, f2.params.eta)
        assert f1.noise_variance == f2.noise_variance


class TestNestedDesign:
    def setup_method(self):
        self.space = UncertaintySpace(lows=[0, -1], highs=[1, 1])

    def test_sizes_and_nesting(self):
        designs = make_nested_design(self.space, [12, 6, 3], seed=0)
        assert [len(d) for d in designs] == [12, 6, 3]
        lower = {tuple(row) for row in designs[0]}
        mid = {tuple(row) for row in designs[1]}
        assert {tuple(row) for row in designs[1]} <= lower
        assert {tuple(row) for row in designs[2]} <= mid

    def test_equal_sizes_give_identical_sets(self):
        designs = make_nested_design(self.space, [5, 5], seed=3)
        assert np.array_equal(designs[0], designs[1])

    def test_same_seed_reproduces(self):
        a = make_nested_design(self.space, [8, 4], seed=7)
        b = make_nested_design(self.space, [8, 4], seed=7)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_non_monotone_sizes_rejected(self):
        with pytest.raises(InvalidInputError):
            make_nested_design(self.space, [4, 6], seed=0)

    def test_points_inside_space(self):
        designs = make_nested_design(self.space, [30, 10], seed=1)
        for d in designs:
            assert all(self.space.contains(p) for p in d)

    def test_mf_dataset_nesting_check(self, rng):
        ds = nested_dataset(rng, lambda x: x[0], lambda x: 2 * x[0])
        assert ds.is_nested()
        broken = MfDataset(
            [ds.levels[0], Dataset([[0.123456]], [1.0], noise_variance=1e-6)]
        )
        assert not broken.is_nested()
