"""GP core: kernels, conditioning, entropy, marginal likelihood."""

import math

import numpy as np
import pytest

from hipe.errors import NumericalError
from hipe.gp import (
    Dataset,
    HyperSample,
    fantasy_variance,
    gaussian_entropy,
    kernel_matrix,
    log_marginal_likelihood,
    posterior,
)

from reference import (
    gram_ref,
    kernel_ref,
    log_marginal_ref,
    matern52_ref,
    posterior_ref,
)


def _hyper(rng, dim):
    return HyperSample(
        lengthscales=rng.uniform(0.1, 1.5, dim),
        noise_var=rng.uniform(1e-3, 0.5),
        signal_var=rng.uniform(0.3, 2.0),
        mean_const=rng.normal(0, 0.5),
    )


class TestKernelMatrix:
    def test_single_point_unit_signal(self):
        h = HyperSample([1.0, 1.0], 0.1, 1.0)
        x = np.array([[0.3, 0.7]])
        assert kernel_matrix(x, None, h)[0, 0] == 1.0

    def test_unit_distance_value(self):
        # independently coded scalar Matern-5/2 evaluation
        h = HyperSample([1.0], 0.1, 1.0)
        K = kernel_matrix(np.array([[0.0]]), np.array([[1.0]]), h)
        expected = matern52_ref([0.0], [1.0], [1.0], 1.0)
        assert K[0, 0] == pytest.approx(expected, abs=1e-12)
        assert K[0, 0] == pytest.approx(0.5239941088, abs=1e-9)

    def test_huge_lengthscale_drops_coordinate(self):
        h = HyperSample([0.3, 1e12], 0.1, 1.3)
        a = np.array([[0.2, 0.1]])
        b1 = np.array([[0.6, 0.9]])
        b2 = np.array([[0.6, 0.2]])
        k1 = kernel_matrix(a, b1, h)[0, 0]
        k2 = kernel_matrix(a, b2, h)[0, 0]
        assert k1 == pytest.approx(k2, abs=1e-12)

    def test_dimension_permutation_invariance(self):
        rng = np.random.default_rng(3)
        A = rng.uniform(size=(4, 3))
        ls = np.array([0.2, 0.7, 1.1])
        perm = np.array([2, 0, 1])
        h = HyperSample(ls, 0.1, 1.0)
        hp = HyperSample(ls[perm], 0.1, 1.0)
        K = kernel_matrix(A, None, h)
        Kp = kernel_matrix(A[:, perm], None, hp)
        np.testing.assert_allclose(K, Kp, atol=1e-14)

    def test_rbf_profile(self):
        h = HyperSample([0.5], 0.1, 2.0)
        K = kernel_matrix(np.array([[0.0]]), np.array([[0.5]]), h, kind="rbf")
        assert K[0, 0] == pytest.approx(2.0 * math.exp(-0.5 * 1.0), rel=1e-12)

    def test_non_finite_rejected(self):
        h = HyperSample([1.0], 0.1, 1.0)
        with pytest.raises(ValueError):
            kernel_matrix(np.array([[np.nan]]), None, h)
        with pytest.raises(ValueError):
            HyperSample([np.inf], 0.1, 1.0)
        with pytest.raises(ValueError):
            HyperSample([1.0], 0.1, -1.0)


class TestPosterior:
    def test_empty_data_prior(self):
        h = HyperSample([0.4, 0.4], 0.01, 1.2, mean_const=0.0)
        q = np.array([[0.1, 0.9], [0.5, 0.5]])
        post = posterior(Dataset.empty(2), h, q)
        np.testing.assert_array_equal(post.mean, np.zeros(2))
        np.testing.assert_allclose(post.covariance, kernel_matrix(q, None, h), atol=0)

    def test_interpolation_limit(self):
        h = HyperSample([0.5], noise_var=0.0, signal_var=1.0, mean_const=0.3)
        data = Dataset(np.array([[0.4]]), np.array([2.0]))
        post = posterior(data, h, np.array([[0.4]]))
        assert post.mean[0] == pytest.approx(2.0, abs=1e-5)
        assert post.variances[0] < 1e-6

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n, m, dim = 5, 3, int(rng.integers(1, 4))
            h = _hyper(rng, dim)
            X = rng.uniform(size=(n, dim))
            y = rng.normal(size=n)
            q = rng.uniform(size=(m, dim))
            post = posterior(Dataset(X, y), h, q)
            mean_ref, cov_ref = posterior_ref(
                X, y, q, h.lengthscales, h.signal_var, h.noise_var, h.mean_const
            )
            np.testing.assert_allclose(post.mean, mean_ref, atol=1e-8)
            np.testing.assert_allclose(post.covariance, cov_ref, atol=1e-8)

    def test_covariance_outcome_independent(self):
        rng = np.random.default_rng(4)
        h = _hyper(rng, 2)
        X = rng.uniform(size=(6, 2))
        q = rng.uniform(size=(4, 2))
        cov_a = posterior(Dataset(X, rng.normal(size=6)), h, q).covariance
        cov_b = posterior(Dataset(X, rng.normal(size=6) * 100), h, q).covariance
        np.testing.assert_array_equal(cov_a, cov_b)

    def test_include_noise_shifts_diagonal_exactly(self):
        rng = np.random.default_rng(5)
        h = _hyper(rng, 2)
        X = rng.uniform(size=(5, 2))
        data = Dataset(X, rng.normal(size=5))
        q = rng.uniform(size=(3, 2))
        latent = posterior(data, h, q, include_noise=False)
        noisy = posterior(data, h, q, include_noise=True)
        np.testing.assert_array_equal(
            noisy.covariance, latent.covariance + h.noise_var * np.eye(3)
        )


class TestFantasyVariance:
    def test_conditioning_on_the_point_itself(self):
        h = HyperSample([0.5, 0.5], noise_var=0.0, signal_var=1.0)
        x = np.array([[0.3, 0.6]])
        var = fantasy_variance(Dataset.empty(2), h, batch=x, test=x)
        assert var[0] < 1e-6

    def test_decorrelation_limit(self):
        h = HyperSample([0.01, 0.01], noise_var=0.05, signal_var=1.7)
        batch = np.array([[0.95, 0.95]])
        test = np.array([[0.05, 0.05], [0.2, 0.1]])
        var = fantasy_variance(Dataset.empty(2), h, batch, test)
        np.testing.assert_allclose(var, 1.7, atol=1e-6)

    def test_matches_augmented_dense_solve(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            dim = int(rng.integers(1, 4))
            h = _hyper(rng, dim)
            X = rng.uniform(size=(4, dim))
            y = rng.normal(size=4)
            batch = rng.uniform(size=(3, dim))
            test = rng.uniform(size=(5, dim))
            var = fantasy_variance(Dataset(X, y), h, batch, test)
            # oracle: condition on the full augmented input set via dense inverse
            aug = np.vstack([X, batch])
            G_inv = np.linalg.inv(gram_ref(aug, h.lengthscales, h.signal_var, h.noise_var))
            k_at = kernel_ref(aug, test, h.lengthscales, h.signal_var)
            var_ref = h.signal_var - np.einsum("at,ab,bt->t", k_at, G_inv, k_at)
            np.testing.assert_allclose(var, var_ref, atol=1e-7)

    def test_never_exceeds_data_posterior_variance(self):
        rng = np.random.default_rng(22)
        h = _hyper(rng, 2)
        X = rng.uniform(size=(5, 2))
        data = Dataset(X, rng.normal(size=5))
        test = rng.uniform(size=(6, 2))
        batch = rng.uniform(size=(2, 2))
        before = posterior(data, h, test).variances
        after = fantasy_variance(data, h, batch, test)
        assert np.all(after <= before + 1e-10)

    def test_monotone_in_batch(self):
        rng = np.random.default_rng(23)
        h = _hyper(rng, 2)
        data = Dataset(rng.uniform(size=(3, 2)), rng.normal(size=3))
        test = rng.uniform(size=(8, 2))
        batch = rng.uniform(size=(2, 2))
        extra = np.vstack([batch, rng.uniform(size=(1, 2))])
        v_small = fantasy_variance(data, h, batch, test)
        v_big = fantasy_variance(data, h, extra, test)
        assert np.all(v_big <= v_small + 1e-10)


class TestGaussianEntropy:
    def test_scalar_unit(self):
        assert gaussian_entropy(np.array([[1.0]])) == pytest.approx(1.418939, abs=1e-6)

    def test_identity_additivity(self):
        assert gaussian_entropy(np.eye(2)) == pytest.approx(2.837877, abs=1e-6)

    def test_correlated_bivariate_vs_mc(self):
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        value = gaussian_entropy(cov)
        # Monte Carlo entropy estimate as the oracle
        rng = np.random.default_rng(7)
        L = np.linalg.cholesky(cov)
        samples = rng.standard_normal((200_000, 2)) @ L.T
        solve = np.linalg.solve(cov, samples.T)
        logdens = (
            -0.5 * np.sum(samples.T * solve, axis=0)
            - 0.5 * np.log((2 * np.pi) ** 2 * np.linalg.det(cov))
        )
        mc = -logdens.mean()
        assert value == pytest.approx(mc, rel=0.01)
        assert value == pytest.approx(2.694036, abs=1e-5)

    def test_block_diagonal_additive(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(3, 3))
        A = A @ A.T + 3 * np.eye(3)
        B = rng.normal(size=(2, 2))
        B = B @ B.T + 3 * np.eye(2)
        block = np.zeros((5, 5))
        block[:3, :3] = A
        block[3:, 3:] = B
        assert gaussian_entropy(block) == pytest.approx(
            gaussian_entropy(A) + gaussian_entropy(B), abs=1e-12
        )

    def test_indefinite_rejected(self):
        with pytest.raises(NumericalError):
            gaussian_entropy(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestLogMarginalLikelihood:
    def test_standard_normal_density_at_mean(self):
        # one observation equal to the prior mean with unit total variance
        h = HyperSample([1.0], noise_var=0.5, signal_var=0.5, mean_const=1.3)
        data = Dataset(np.array([[0.2]]), np.array([1.3]))
        value = log_marginal_likelihood(data, h)
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-6)

    def test_matches_naive_dense(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            dim = int(rng.integers(1, 4))
            h = _hyper(rng, dim)
            X = rng.uniform(size=(4, dim))
            y = rng.normal(size=4)
            ours = log_marginal_likelihood(Dataset(X, y), h)
            ref = log_marginal_ref(X, y, h.lengthscales, h.signal_var, h.noise_var, h.mean_const)
            assert ours == pytest.approx(ref, abs=1e-8)

    def test_consistent_scaling_identity(self):
        # scaling (y - c) by s and the Gram by s^2 changes the value by -n*log(s)
        rng = np.random.default_rng(14)
        X = rng.uniform(size=(5, 2))
        y = rng.normal(size=5)
        h = HyperSample([0.4, 0.8], 0.05, 1.0, mean_const=0.2)
        s = 3.0
        h_scaled = HyperSample(
            h.lengthscales, h.noise_var * s**2, h.signal_var * s**2, mean_const=0.0
        )
        base = log_marginal_likelihood(Dataset(X, y), h)
        scaled = log_marginal_likelihood(Dataset(X, (y - 0.2) * s), h_scaled)
        assert scaled == pytest.approx(base - 5 * math.log(s), abs=1e-9)

    def test_requires_data(self):
        h = HyperSample([1.0], 0.1, 1.0)
        with pytest.raises(ValueError):
            log_marginal_likelihood(Dataset.empty(1), h)


class TestDataset:
    def test_empty_is_legal(self):
        ds = Dataset.empty(3)
        assert ds.n == 0 and ds.dim == 3

    def test_rejects_out_of_cube(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[1.2]]), np.array([0.0]))

    def test_noise_floor_applied(self):
        h = HyperSample([1.0], noise_var=0.0, signal_var=1.0)
        assert h.noise_var == 1e-10
