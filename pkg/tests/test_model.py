"""Fully Bayesian GP estimator: sklearn interface, standardization, prediction."""

import numpy as np
import pytest
from scipy.stats import norm
from sklearn.base import clone

from hipe.gp import Dataset
from hipe.model import FullyBayesianGP


def _fast_model(**kw):
    defaults = dict(burn_in=24, draws=48, thin=8, random_state=0)
    defaults.update(kw)
    return FullyBayesianGP(**defaults)


class TestSklearnInterface:
    def test_get_set_params_roundtrip(self):
        model = _fast_model(lengthscale_log_base=0.5)
        params = model.get_params()
        assert params["lengthscale_log_base"] == 0.5
        cloned = clone(model)
        assert cloned.get_params() == params

    def test_fit_returns_self_and_sets_attributes(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(10, 2))
        y = np.sin(6 * X[:, 0]) + 0.05 * rng.standard_normal(10)
        model = _fast_model()
        assert model.fit(X, y) is model
        assert model.ensemble_.m == 6
        assert model.n_features_in_ == 2
        assert isinstance(model.dataset_, Dataset)

    def test_predict_before_fit_raises(self):
        with pytest.raises(RuntimeError):
            _fast_model().predict(np.array([[0.5, 0.5]]))

    def test_score_available(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(16, 1))
        y = 2.0 * X[:, 0] + 0.01 * rng.standard_normal(16)
        model = _fast_model().fit(X, y)
        assert model.score(X, y) > 0.8


class TestStandardization:
    def test_outputs_mapped_back_to_original_units(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(20, 1))
        y = 50.0 + 10.0 * np.sin(5 * X[:, 0])
        model = _fast_model().fit(X, y)
        pred = model.predict(X)
        assert np.abs(pred - y).max() < 2.0
        assert abs(model.y_mean_ - y.mean()) < 1e-12
        assert abs(model.y_scale_ - y.std()) < 1e-12

    def test_no_standardization_below_two_points(self):
        model = _fast_model().fit(np.array([[0.5]]), np.array([7.0]))
        assert model.y_mean_ == 0.0 and model.y_scale_ == 1.0

    def test_constant_outcomes_use_unit_scale(self):
        model = _fast_model().fit(np.array([[0.2], [0.8]]), np.array([3.0, 3.0]))
        assert model.y_scale_ == 1.0 and model.y_mean_ == 3.0

    def test_empty_fit_gives_prior_ensemble(self):
        model = _fast_model().fit(np.empty((0, 3)), np.empty(0))
        assert model.ensemble_.source == "prior"
        mean, std = model.predict(np.full((1, 3), 0.5), return_std=True)
        assert np.isfinite(mean[0]) and std[0] > 0.5


class TestPredictiveComponents:
    def test_shapes_and_noise_flag(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(size=(8, 2))
        y = rng.normal(size=8)
        model = _fast_model().fit(X, y)
        q = rng.uniform(size=(5, 2))
        means, var_lat = model.predictive_components(q)
        _, var_noisy = model.predictive_components(q, include_noise=True)
        assert means.shape == (6, 5)
        expected_shift = np.broadcast_to(
            np.array([h.noise_var for h in model.ensemble_.samples])[:, None]
            * model.y_scale_ ** 2,
            (6, 5),
        )
        np.testing.assert_allclose(var_noisy - var_lat, expected_shift, rtol=1e-10)

    def test_mixture_moments(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(size=(6, 1))
        y = rng.normal(size=6)
        model = _fast_model().fit(X, y)
        q = rng.uniform(size=(3, 1))
        mean, std = model.predict(q, return_std=True)
        means, variances = model.predictive_components(q)
        np.testing.assert_allclose(mean, means.mean(axis=0), atol=1e-12)
        second = (variances + means**2).mean(axis=0)
        np.testing.assert_allclose(std, np.sqrt(second - mean**2), atol=1e-12)

    def test_mixture_density_consistency(self):
        # mixture NLL built from components matches a direct density evaluation
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(7, 1))
        y = rng.normal(size=7)
        model = _fast_model().fit(X, y)
        q = rng.uniform(size=(4, 1))
        f = rng.normal(size=4)
        means, variances = model.predictive_components(q)
        dens = np.array(
            [
                np.mean([norm.pdf(f[t], means[m, t], np.sqrt(variances[m, t]))
                         for m in range(means.shape[0])])
                for t in range(4)
            ]
        )
        assert np.all(dens > 0)

    def test_hyper_summary_structure(self):
        model = _fast_model().fit(np.empty((0, 2)), np.empty(0))
        summary = model.hyper_summary()
        assert summary["m"] == 6
        assert len(summary["lengthscales"]["0.5"]) == 2
        assert summary["noise_var"]["0.1"] <= summary["noise_var"]["0.9"]
