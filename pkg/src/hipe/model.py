"""Fully Bayesian GP surrogate with a scikit-learn estimator interface.

``fit`` standardizes the outcomes (the hyperpriors are calibrated for unit
scale), runs the hyperparameter MCMC, and stores the resulting ensemble;
``predict`` evaluates the equal-weight mixture predictive mapped back to the
original outcome units. The fitted attributes (``ensemble_``, ``dataset_``)
are what the acquisition machinery consumes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .gp import Dataset, factorize
from .inference import HyperPriorSpec, McmcSchedule, sample_ensemble
from .validation import check_outcomes, check_unit_cube


class FullyBayesianGP(BaseEstimator, RegressorMixin):
    """GP regressor whose hyperparameters are integrated out by MCMC.

    Parameters
    ----------
    kernel : {"matern52", "rbf"}
        Stationary ARD kernel family.
    lengthscale_log_base : float
        Base of the dimension-scaled log-normal lengthscale prior; the prior
        log-mean is ``lengthscale_log_base + log(D)/2``.
    signal_var : float or (logmean, logsd) tuple
        Fixed kernel variance (sensible for standardized outcomes) or a
        log-normal prior on it.
    burn_in, draws, thin : int
        MCMC schedule; the ensemble size is ``draws // thin``.
    standardize : bool
        Standardize outcomes to zero mean / unit variance when ``n >= 2``.
    random_state : int
        Seed for the sampler chain.
    """

    def __init__(
        self,
        kernel: str = "matern52",
        lengthscale_log_base: float = 0.75,
        lengthscale_logsd: float = 0.75,
        noise_sd_logmean: float = -5.5,
        noise_sd_logsd: float = 0.75,
        mean_prior_mean: float = 0.0,
        mean_prior_var: float = 0.25,
        signal_var: float | tuple[float, float] = 1.0,
        burn_in: int = 192,
        draws: int = 288,
        thin: int = 24,
        standardize: bool = True,
        random_state: int = 0,
    ):
        self.kernel = kernel
        self.lengthscale_log_base = lengthscale_log_base
        self.lengthscale_logsd = lengthscale_logsd
        self.noise_sd_logmean = noise_sd_logmean
        self.noise_sd_logsd = noise_sd_logsd
        self.mean_prior_mean = mean_prior_mean
        self.mean_prior_var = mean_prior_var
        self.signal_var = signal_var
        self.burn_in = burn_in
        self.draws = draws
        self.thin = thin
        self.standardize = standardize
        self.random_state = random_state

    def fit(self, X, y):
        X = check_unit_cube(X, name="X")
        y = check_outcomes(y, X.shape[0])
        if X.shape[1] < 1:
            raise ValueError("X must have at least one column")
        self.n_features_in_ = X.shape[1]
        if self.standardize and X.shape[0] >= 2:
            self.y_mean_ = float(np.mean(y))
            scale = float(np.std(y))
            self.y_scale_ = scale if scale > 0.0 else 1.0
        else:
            self.y_mean_ = 0.0
            self.y_scale_ = 1.0
        y_std = (y - self.y_mean_) / self.y_scale_
        self.dataset_ = Dataset(X, y_std)
        self.prior_spec_ = HyperPriorSpec.for_dim(
            X.shape[1],
            log_base=self.lengthscale_log_base,
            lengthscale_logsd=self.lengthscale_logsd,
            noise_sd_logmean=self.noise_sd_logmean,
            noise_sd_logsd=self.noise_sd_logsd,
            mean_prior_mean=self.mean_prior_mean,
            mean_prior_var=self.mean_prior_var,
            signal_var=self.signal_var,
        )
        self.ensemble_ = sample_ensemble(
            self.dataset_,
            self.prior_spec_,
            McmcSchedule(self.burn_in, self.draws, self.thin),
            seed=self.random_state,
            kernel=self.kernel,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "ensemble_"):
            raise RuntimeError("this FullyBayesianGP instance is not fitted yet")

    def predictive_components(self, X, include_noise: bool = False):
        """Per-ensemble-member predictive means and variances in original units.

        Returns arrays of shape ``(M, len(X))``.
        """
        self._check_fitted()
        X = check_unit_cube(X, dim=self.n_features_in_, name="X")
        means = np.empty((self.ensemble_.m, X.shape[0]))
        variances = np.empty_like(means)
        for i, hyper in enumerate(self.ensemble_.samples):
            factor = factorize(self.dataset_, hyper, self.kernel)
            cross = factor.cross_white(X)
            means[i] = factor.mean(X, cross)
            var = factor.latent_variance(X, cross)
            if include_noise:
                var = var + hyper.noise_var
            variances[i] = var
        means = self.y_mean_ + self.y_scale_ * means
        variances = self.y_scale_ ** 2 * variances
        return means, variances

    def predict(self, X, return_std: bool = False):
        """Mixture-mean prediction; optionally the mixture standard deviation."""
        means, variances = self.predictive_components(X)
        mean = means.mean(axis=0)
        if not return_std:
            return mean
        second_moment = (variances + means**2).mean(axis=0)
        std = np.sqrt(np.maximum(second_moment - mean**2, 0.0))
        return mean, std

    def lengthscale_quantiles(self, qs=(0.1, 0.5, 0.9)) -> np.ndarray:
        """Ensemble lengthscale quantiles, shape ``(len(qs), D)``."""
        self._check_fitted()
        ls = np.stack([h.lengthscales for h in self.ensemble_.samples])
        return np.quantile(ls, qs, axis=0)

    def hyper_summary(self) -> dict:
        """Quantile summary of the ensemble for run records."""
        self._check_fitted()
        ls = np.stack([h.lengthscales for h in self.ensemble_.samples])
        noise = np.array([h.noise_var for h in self.ensemble_.samples])
        mean_c = np.array([h.mean_const for h in self.ensemble_.samples])
        qs = (0.1, 0.5, 0.9)
        return {
            "lengthscales": {str(p): np.quantile(ls, p, axis=0).tolist() for p in qs},
            "noise_var": {str(p): float(np.quantile(noise, p)) for p in qs},
            "mean_const": {str(p): float(np.quantile(mean_c, p)) for p in qs},
            "m": self.ensemble_.m,
        }
