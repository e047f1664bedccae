"""Multi-start batch optimizer."""

import numpy as np
import pytest
from scipy.stats import qmc

from hipe.gp import Dataset, HyperSample
from hipe.inference import HyperEnsemble
from hipe.acquisition import make_acquisition, make_context
from hipe.optimize import OptimizerConfig, finite_diff_grad, optimize_batch, raw_candidates


def center_objective(batches):
    return -np.sum((batches - 0.5) ** 2, axis=(1, 2))


class TestOptimizeBatch:
    def test_separable_concave_converges_to_center(self):
        batch, value = optimize_batch(
            center_objective, 2, 3, OptimizerConfig(restarts=2, raw_samples=32, seed=0)
        )
        np.testing.assert_allclose(batch, 0.5, atol=1e-4)
        assert value > -1e-7

    def test_strict_improvement_over_raws_with_corner_warm_starts(self):
        def objective(batches):
            return -np.sum((batches - 0.25) ** 2, axis=(1, 2))

        q, dim = 2, 2
        corners = [np.zeros((q, dim)), np.ones((q, dim))]
        cfg = OptimizerConfig(restarts=2, raw_samples=16, seed=3)
        batch, value = optimize_batch(objective, q, dim, cfg, warm_starts=corners)
        raws = raw_candidates(q, dim, 16, 3)
        assert value > objective(raws).max()
        np.testing.assert_allclose(batch, 0.25, atol=1e-4)

    def test_monotone_improvement_exact(self):
        rng = np.random.default_rng(7)
        for trial in range(25):
            target = rng.uniform(size=(2, 2))
            weights = rng.uniform(0.5, 2.0, size=(2, 2))

            def objective(batches):
                return -np.sum(weights * (batches - target) ** 2, axis=(1, 2))

            cfg = OptimizerConfig(restarts=2, raw_samples=24, max_iters=20, seed=trial)
            _, value = optimize_batch(objective, 2, 2, cfg)
            assert value >= objective(raw_candidates(2, 2, 24, trial)).max()

    def test_no_row_symmetry_assumed(self):
        targets = np.array([[0.2, 0.8], [0.7, 0.3]])

        def objective(batches):
            return -np.sum((batches - targets) ** 2, axis=(1, 2))

        batch, _ = optimize_batch(
            objective, 2, 2, OptimizerConfig(restarts=2, raw_samples=32, seed=1)
        )
        np.testing.assert_allclose(batch, targets, atol=1e-4)

    def test_reproducible(self):
        cfg = OptimizerConfig(restarts=2, raw_samples=16, seed=5)
        a, va = optimize_batch(center_objective, 2, 2, cfg)
        b, vb = optimize_batch(center_objective, 2, 2, cfg)
        np.testing.assert_array_equal(a, b)
        assert va == vb

    def test_iterates_stay_in_box(self):
        seen = []

        def objective(batches):
            seen.append(batches.copy())
            return np.sum(batches, axis=(1, 2))  # pushes to the corner

        batch, _ = optimize_batch(
            objective, 1, 2, OptimizerConfig(restarts=1, raw_samples=8, seed=0)
        )
        for stack in seen:
            assert stack.min() >= 0.0 and stack.max() <= 1.0
        np.testing.assert_allclose(batch, 1.0, atol=1e-6)

    def test_paper_default_settings(self):
        cfg = OptimizerConfig()
        assert cfg.restarts == 4
        assert cfg.raw_samples == 384

    def test_acquisition_error_reports_restart(self):
        calls = {"n": 0}

        def flaky(batches):
            calls["n"] += 1
            if calls["n"] > 1:
                raise ValueError("bad context")
            return np.zeros(batches.shape[0])

        with pytest.raises(ValueError, match=r"\[restart 0\]"):
            optimize_batch(flaky, 1, 1, OptimizerConfig(restarts=1, raw_samples=4, seed=0))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(restarts=0)
        with pytest.raises(ValueError):
            OptimizerConfig(restarts=8, raw_samples=4)


class TestRawCandidates:
    def test_shape_and_determinism(self):
        raws = raw_candidates(3, 2, 5, 9)
        assert raws.shape == (5, 3, 2)
        np.testing.assert_array_equal(raws, raw_candidates(3, 2, 5, 9))
        assert raws.min() >= 0.0 and raws.max() <= 1.0

    def test_beats_uniform_on_median_discrepancy(self):
        q, dim, n = 2, 3, 64
        sob, uni = [], []
        for seed in range(50):
            sob.append(qmc.discrepancy(raw_candidates(q, dim, n, seed).reshape(n, q * dim)))
            uni.append(
                qmc.discrepancy(np.random.default_rng(seed).uniform(size=(n, q * dim)))
            )
        assert np.median(sob) < np.median(uni)


class TestFiniteDifferences:
    def test_matches_analytic_gradient_on_quadratic(self):
        target = np.array([0.3, 0.6, 0.1, 0.9])

        def objective(batches):
            flat = batches.reshape(batches.shape[0], -1)
            return -np.sum((flat - target) ** 2, axis=1)

        x = np.array([0.5, 0.5, 0.5, 0.5])
        grad = finite_diff_grad(objective, x, 2, 2, 1e-5)
        np.testing.assert_allclose(grad, -2 * (x - target), atol=1e-8)

    def test_boundary_uses_clipped_one_sided_steps(self):
        def objective(batches):
            return np.sum(batches, axis=(1, 2))

        x = np.array([0.0, 1.0])
        grad = finite_diff_grad(objective, x, 1, 2, 1e-5)
        np.testing.assert_allclose(grad, 1.0, atol=1e-9)

    def test_step_size_consistency_on_real_acquisition(self):
        rng = np.random.default_rng(17)
        h1 = HyperSample([0.3, 0.7], 0.05, 1.0, 0.0)
        h2 = HyperSample([0.8, 0.2], 0.15, 1.0, 0.2)
        data = Dataset(rng.uniform(size=(4, 2)), rng.normal(size=4))
        ctx = make_context(
            HyperEnsemble((h1, h2), "posterior", {}), data, rng.uniform(size=(16, 2)),
            q=2, n_draws=64, seed=0, beta=1.0,
        )
        acq = make_acquisition("hipe", ctx)
        for _ in range(5):
            x = rng.uniform(0.05, 0.95, size=4)
            g1 = finite_diff_grad(acq.values, x, 2, 2, 1e-5)
            g2 = finite_diff_grad(acq.values, x, 2, 2, 2e-5)
            rel = np.linalg.norm(g1 - g2) / max(np.linalg.norm(g1), 1e-12)
            assert rel <= 1e-4
