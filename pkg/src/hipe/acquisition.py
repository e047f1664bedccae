"""Acquisition objectives over candidate batches.

All objectives are deterministic sample-average approximations: a frozen
:class:`AcqContext` (hyperparameter ensemble, observed data, test points,
base normal draws) turns each acquisition into a pure, continuous function of
the ``q x D`` candidate batch, so a quasi-Newton optimizer can run on it.

Sign convention: larger is better for every objective here.

* ``bald``  -- mutual information between the batch observations and the
  hyperparameters: the entropy of the ensemble-mixture predictive minus the
  average per-sample Gaussian entropy. Estimated with stratified mixture
  samples; the per-sample conditional term is coupled to the same draws
  (self-density control variate), which cancels the leading Monte Carlo noise
  and makes the estimate exactly zero for a single-sample ensemble. The
  estimand is a Jensen gap and hence nonnegative, so residual noise is
  clamped at zero. A decoupled variant with the closed-form conditional term
  is available via ``conditional="closed"`` for estimator comparisons.
* ``epig``  -- negative average post-batch predictive entropy at the test
  points, per hyperparameter sample, in closed form (the pre-batch constant
  is dropped; it does not affect the argmax).
* ``nipv``  -- negative average post-batch latent variance at the test points.
* ``hipe``  -- ``epig + beta * bald`` on shared draws, where ``beta`` defaults
  to the batch-independent information gain about test-point predictions
  carried by the hyperparameters (``estimate_beta``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .gp import (
    Dataset,
    NOISE_FLOOR,
    PosteriorFactor,
    chol_gram_stack,
    factorize,
    gaussian_entropy_1d,
    kernel_profile,
    posterior,
)
from .inference import HyperEnsemble
from .validation import check_unit_cube

_LOG_2PI = math.log(2.0 * math.pi)
_CHUNK = 64

_ORACLE_MAX_Q = 2
_ORACLE_MAX_M = 4
_ORACLE_MAX_T = 32


def _self_sqdist(Xs: np.ndarray) -> np.ndarray:
    """Within-batch squared scaled distances for a stack ``(B, q, D)``."""
    sq = np.sum(Xs * Xs, axis=-1)
    d2 = sq[..., :, None] + sq[..., None, :] - 2.0 * Xs @ Xs.transpose(0, 2, 1)
    return np.maximum(d2, 0.0)


class AcqContext:
    """Immutable evaluation context for one batch optimization.

    Args:
        ensemble: hyperparameter ensemble approximating p(theta | D).
        data: observed dataset (may be empty).
        test_points: ``T x D`` draws from the test distribution p*.
        base_draws: frozen ``N x q`` standard-normal draws for the mixture
            entropy estimate; freezing them is what makes every acquisition
            value deterministic.
        beta: trade-off weight for ``hipe``; ``"auto"`` resolves lazily to
            :func:`estimate_beta` and is cached.
        noisy_entropy: include observation noise in test-point entropies
            (``epig`` and the beta weight). Batch observations are always
            modeled as noisy; the latent-variance objective ``nipv`` never
            adds noise.
    """

    def __init__(
        self,
        ensemble: HyperEnsemble,
        data: Dataset,
        test_points: np.ndarray,
        base_draws: np.ndarray,
        beta: float | str = "auto",
        noisy_entropy: bool = True,
        kernel: str = "matern52",
    ):
        if ensemble.m < 1:
            raise ValueError("ensemble must contain at least one sample")
        self.ensemble = ensemble
        self.data = data
        self.test_points = check_unit_cube(test_points, dim=data.dim, name="test_points")
        if self.test_points.shape[0] < 1:
            raise ValueError("test_points must contain at least one point")
        draws = np.array(base_draws, dtype=np.float64)
        if draws.ndim != 2 or draws.shape[0] < 1 or draws.shape[1] < 1:
            raise ValueError("base_draws must have shape (N, q)")
        draws.flags.writeable = False
        self.base_draws = draws
        if not (beta == "auto" or (np.isscalar(beta) and float(beta) >= 0.0)):
            raise ValueError("beta must be 'auto' or a nonnegative number")
        self.beta = beta
        self.noisy_entropy = bool(noisy_entropy)
        self.kernel = kernel

        samples = ensemble.samples
        self.factors: tuple[PosteriorFactor, ...] = tuple(
            factorize(data, h, kernel) for h in samples
        )
        # data-only predictive at the test points, one row per theta
        self._test_white = tuple(f.cross_white(self.test_points) for f in self.factors)
        self.test_mean = np.stack(
            [f.mean(self.test_points, w) for f, w in zip(self.factors, self._test_white)]
        )
        self.test_latent_var = np.stack(
            [
                f.latent_variance(self.test_points, w)
                for f, w in zip(self.factors, self._test_white)
            ]
        )
        # per-theta scaled test coordinates, reused by every batch evaluation
        self._test_scaled = tuple(self.test_points / h.lengthscales for h in samples)
        self._test_sq = tuple(np.sum(t * t, axis=1) for t in self._test_scaled)
        n = self.base_draws.shape[0]
        per = math.ceil(n / ensemble.m)
        self.component_of_draw = np.repeat(np.arange(ensemble.m), per)[:n]

    @property
    def m(self) -> int:
        return self.ensemble.m

    @property
    def q(self) -> int:
        return self.base_draws.shape[1]

    @property
    def n_draws(self) -> int:
        return self.base_draws.shape[0]

    @property
    def noise_vars(self) -> np.ndarray:
        return np.array([h.noise_var for h in self.ensemble.samples])

    def test_entropy_var(self) -> np.ndarray:
        """Per-theta variance entering test-point entropies, shape ``(M, T)``."""
        var = self.test_latent_var
        if self.noisy_entropy:
            var = var + self.noise_vars[:, None]
        return np.maximum(var, NOISE_FLOOR)

    @cached_property
    def resolved_beta(self) -> float:
        if self.beta == "auto":
            return estimate_beta(self)
        return float(self.beta)


def make_context(
    ensemble: HyperEnsemble,
    data: Dataset,
    test_points: np.ndarray,
    q: int,
    n_draws: int = 128,
    seed: int = 0,
    beta: float | str = "auto",
    noisy_entropy: bool = True,
    kernel: str = "matern52",
) -> AcqContext:
    """Build a context with seeded standard-normal base draws of shape (n_draws, q)."""
    draws = np.random.default_rng(seed).standard_normal((n_draws, q))
    return AcqContext(ensemble, data, test_points, draws, beta, noisy_entropy, kernel)


def _check_batches(ctx: AcqContext, batches: np.ndarray) -> np.ndarray:
    arr = np.asarray(batches, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != ctx.q or arr.shape[2] != ctx.data.dim:
        raise ValueError(
            f"batches must have shape (B, {ctx.q}, {ctx.data.dim}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("batches contain non-finite values")
    if arr.size and (arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12):
        raise ValueError("batch coordinates outside [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def _evaluate(
    ctx: AcqContext,
    batches: np.ndarray,
    need_bald: bool,
    need_epig: bool,
    need_nipv: bool,
    conditional: str = "sampled",
) -> dict[str, np.ndarray]:
    """Shared chunked evaluator; returns requested objectives per batch."""
    batches = _check_batches(ctx, batches)
    n_batches, q, _ = batches.shape
    m_ens = ctx.m
    out: dict[str, np.ndarray] = {}
    if need_bald:
        out["bald"] = np.empty(n_batches)
    if need_epig:
        out["epig"] = np.empty(n_batches)
    if need_nipv:
        out["nipv"] = np.empty(n_batches)

    eps = ctx.base_draws
    comp = ctx.component_of_draw

    for start in range(0, n_batches, _CHUNK):
        chunk = batches[start : start + _CHUNK]
        nb = chunk.shape[0]
        if need_bald:
            mu_all = np.empty((nb, m_ens, q))
            chol_all = np.empty((nb, m_ens, q, q))
            logdet_all = np.empty((nb, m_ens))
        if need_epig:
            epig_acc = np.zeros(nb)
        if need_nipv:
            nipv_acc = np.zeros(nb)

        for m, (hyper, factor) in enumerate(zip(ctx.ensemble.samples, ctx.factors)):
            Xs = chunk / hyper.lengthscales
            K_bb = kernel_profile(_self_sqdist(Xs), ctx.kernel, hyper.signal_var)
            flat = chunk.reshape(nb * q, -1)
            V = factor.cross_white(flat)                    # (n, nb*q)
            S = K_bb + hyper.noise_var * np.eye(q)
            if factor.n:
                Vt = np.ascontiguousarray(V.T).reshape(nb, q, -1)
                S = S - Vt @ Vt.transpose(0, 2, 1)
            L = chol_gram_stack(S, hyper.signal_var)
            if need_bald:
                mu_all[:, m] = hyper.mean_const + (
                    (V.T @ factor.white).reshape(nb, q) if factor.n else 0.0
                )
                chol_all[:, m] = L
                logdet_all[:, m] = np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
            if need_epig or need_nipv:
                bsq = np.sum(Xs * Xs, axis=-1)
                d2 = np.maximum(
                    bsq[..., None] + ctx._test_sq[m][None, None, :]
                    - 2.0 * Xs @ ctx._test_scaled[m].T,
                    0.0,
                )
                k_bt = kernel_profile(d2, ctx.kernel, hyper.signal_var)
                if factor.n:
                    k_bt = k_bt - (V.T @ ctx._test_white[m]).reshape(nb, q, -1)
                U = np.linalg.solve(L, k_bt)
                fantasy = np.maximum(
                    ctx.test_latent_var[m][None, :] - np.sum(U * U, axis=1), 0.0
                )
                if need_nipv:
                    nipv_acc += fantasy.mean(axis=1)
                if need_epig:
                    var = fantasy + hyper.noise_var if ctx.noisy_entropy else fantasy
                    epig_acc += gaussian_entropy_1d(var).mean(axis=1)

        if need_epig:
            out["epig"][start : start + nb] = -epig_acc / m_ens
        if need_nipv:
            out["nipv"][start : start + nb] = -nipv_acc / m_ens
        if need_bald:
            n_draws = eps.shape[0]
            samples = np.empty((nb, n_draws, q))
            for m in range(m_ens):
                idx = np.nonzero(comp == m)[0]
                if idx.size:
                    samples[:, idx] = mu_all[:, m, None, :] + np.matmul(
                        eps[idx], chol_all[:, m].transpose(0, 2, 1)
                    )
            logdens = np.empty((nb, m_ens, n_draws))
            for m in range(m_ens):
                diff = (samples - mu_all[:, m, None, :]).transpose(0, 2, 1)
                zsol = np.linalg.solve(chol_all[:, m], diff)
                quad = np.sum(zsol * zsol, axis=1)
                logdens[:, m] = (
                    -0.5 * quad - 0.5 * q * _LOG_2PI - logdet_all[:, m, None]
                )
            log_mix = logsumexp(logdens, axis=1) - math.log(m_ens)
            if conditional == "sampled":
                log_self = logdens[:, comp, np.arange(n_draws)]
                cond_term = log_self.mean(axis=1)
            elif conditional == "closed":
                # decoupled variant: closed-form average Gaussian entropy
                ent = 0.5 * q * (_LOG_2PI + 1.0) + logdet_all
                cond_term = -ent.mean(axis=1)
            else:
                raise ValueError("conditional must be 'sampled' or 'closed'")
            # the estimand (a Jensen gap) is nonnegative; clamp the Monte
            # Carlo noise so near-zero disagreement cannot go negative
            out["bald"][start : start + nb] = np.maximum(
                cond_term - log_mix.mean(axis=1), 0.0
            )
    return out


def bald(ctx: AcqContext, batch: np.ndarray, conditional: str = "sampled") -> float:
    """Disagreement objective: mixture entropy of the batch observations minus
    the ensemble-average conditional entropy."""
    return float(_evaluate(ctx, batch, True, False, False, conditional)["bald"][0])


def epig(ctx: AcqContext, batch: np.ndarray) -> float:
    """Negative expected post-batch predictive entropy over the test points."""
    return float(_evaluate(ctx, batch, False, True, False)["epig"][0])


def nipv(ctx: AcqContext, batch: np.ndarray) -> float:
    """Negative expected post-batch latent variance over the test points."""
    return float(_evaluate(ctx, batch, False, False, True)["nipv"][0])


def hipe(ctx: AcqContext, batch: np.ndarray) -> float:
    """``epig + beta * bald`` on shared frozen draws."""
    res = _evaluate(ctx, batch, True, True, False)
    return float(res["epig"][0] + ctx.resolved_beta * res["bald"][0])


def estimate_beta(ctx: AcqContext) -> float:
    """Batch-independent gain: how much hyperparameter knowledge reduces
    test-point predictive entropy.

    Per test point the exact 1-D mixture entropy (adaptive quadrature over the
    equal-weight Gaussian mixture across the ensemble) minus the average
    component entropy; averaged over test points and clamped at zero.
    """
    if ctx.m == 1:
        return 0.0
    means = ctx.test_mean
    variances = ctx.test_entropy_var()
    sds = np.sqrt(variances)
    lo = float(np.min(means - 9.0 * sds))
    hi = float(np.max(means + 9.0 * sds))

    def neg_p_log_p(y: float) -> np.ndarray:
        z = (y - means) / sds
        dens = np.exp(-0.5 * z * z) / (sds * math.sqrt(2.0 * math.pi))
        p = dens.mean(axis=0)
        return np.where(p > 0.0, -p * np.log(np.maximum(p, 1e-300)), 0.0)

    mix_entropy, _ = quad_vec(neg_p_log_p, lo, hi, epsabs=1e-8, epsrel=1e-8, norm="max")
    avg_component_entropy = gaussian_entropy_1d(variances).mean(axis=0)
    return max(float(np.mean(mix_entropy - avg_component_entropy)), 0.0)


@dataclass(frozen=True)
class BatchAcquisition:
    """Callable wrapper exposing vectorized evaluation for the optimizer."""

    kind: str
    ctx: AcqContext

    def values(self, batches: np.ndarray) -> np.ndarray:
        if self.kind == "hipe":
            res = _evaluate(self.ctx, batches, True, True, False)
            return res["epig"] + self.ctx.resolved_beta * res["bald"]
        need = {"bald": (True, False, False), "epig": (False, True, False), "nipv": (False, False, True)}
        flags = need[self.kind]
        return _evaluate(self.ctx, batches, *flags)[self.kind]

    def __call__(self, batch: np.ndarray) -> float:
        return float(self.values(np.asarray(batch)[None])[0])


ACQUISITIONS = ("bald", "epig", "nipv", "hipe")


def make_acquisition(kind: str, ctx: AcqContext) -> BatchAcquisition:
    if kind not in ACQUISITIONS:
        raise ValueError(f"unknown acquisition {kind!r}; expected one of {ACQUISITIONS}")
    if kind == "hipe":
        ctx.resolved_beta  # resolve eagerly so optimization timing excludes surprises
    return BatchAcquisition(kind, ctx)


def joint_eig_oracle(
    ctx: AcqContext,
    batch: np.ndarray,
    n_outer: int = 256,
    n_inner: int = 256,
    seed: int = 0,
) -> float:
    """Nested Monte Carlo reference for the expected joint information gain
    over (test prediction, hyperparameters) acquired by a batch.

    Outer loop: sample a hyperparameter index and a batch outcome vector from
    its predictive; reweight the ensemble by Bayes' rule. Inner loop: estimate
    the joint (discrete x Gaussian) entropy at each test point before and
    after that conditioning by sampling from it and averaging negative log
    densities. Deliberately brute force, for small test instances only; use a
    fixed ``seed`` across candidates for common-random-number comparisons.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch.reshape(1, -1)
    if batch.shape[0] == 0:
        return 0.0
    q = batch.shape[0]
    m_ens = ctx.m
    n_test = ctx.test_points.shape[0]
    if q > _ORACLE_MAX_Q or m_ens > _ORACLE_MAX_M or n_test > _ORACLE_MAX_T:
        raise ValueError(
            f"oracle instance too large: q={q} (<= {_ORACLE_MAX_Q}), "
            f"M={m_ens} (<= {_ORACLE_MAX_M}), T={n_test} (<= {_ORACLE_MAX_T})"
        )

    rows = np.vstack([batch, ctx.test_points])
    mu_b = np.empty((m_ens, q))
    cov_bb = np.empty((m_ens, q, q))
    cross = np.empty((m_ens, q, n_test))
    mu_t = np.empty((m_ens, n_test))
    var_t_lat = np.empty((m_ens, n_test))
    noise = ctx.noise_vars
    for m, hyper in enumerate(ctx.ensemble.samples):
        post = posterior(ctx.data, hyper, rows, include_noise=False, kernel=ctx.kernel)
        mu_b[m] = post.mean[:q]
        mu_t[m] = post.mean[q:]
        cov_bb[m] = post.covariance[:q, :q] + hyper.noise_var * np.eye(q)
        cross[m] = post.covariance[:q, q:]
        var_t_lat[m] = np.maximum(np.diagonal(post.covariance)[q:], 0.0)

    chol_b = chol_gram_stack(cov_bb, 1.0)
    logdet_b = np.sum(np.log(np.diagonal(chol_b, axis1=1, axis2=2)), axis=1)

    def entropy_noise(latent):
        v = latent + noise[:, None] if ctx.noisy_entropy else latent
        return np.maximum(v, NOISE_FLOOR)

    var_t_before = entropy_noise(var_t_lat)

    # conditional of the test prediction given the batch outcomes, per theta
    solve = np.linalg.solve(cov_bb, cross)                      # (M, q, T)
    var_t_after = entropy_noise(
        np.maximum(var_t_lat - np.einsum("mqt,mqt->mt", cross, solve), 0.0)
    )

    rng = np.random.default_rng(seed)
    comp_outer = rng.integers(0, m_ens, n_outer)
    eps_outer = rng.standard_normal((n_outer, q))
    y_batch = mu_b[comp_outer] + np.einsum("oik,ok->oi", chol_b[comp_outer], eps_outer)

    diff = y_batch[:, None, :] - mu_b[None, :, :]               # (O, M, q)
    zs = np.linalg.solve(chol_b[None], diff[..., None])[..., 0]
    log_like = -0.5 * np.sum(zs * zs, axis=2) - 0.5 * q * _LOG_2PI - logdet_b[None, :]
    log_w = log_like - logsumexp(log_like, axis=1, keepdims=True)
    weights = np.exp(log_w)

    # posterior conditional means depend on the sampled batch outcomes
    shift = np.einsum("omq,mqt->omt", diff, solve)              # (O, M, T)
    mean_after = mu_t[None, :, :] + shift

    u_inner = rng.random((n_outer, n_test, n_inner))
    z_inner = rng.standard_normal((n_outer, n_test, n_inner))

    cum_w = np.cumsum(weights, axis=1)
    comp_after = np.sum(
        u_inner[..., None] > cum_w[:, None, None, :], axis=-1
    ).clip(max=m_ens - 1)                                        # (O, T, J)

    t_idx = np.arange(n_test)[None, :, None]
    o_idx = np.arange(n_outer)[:, None, None]
    mean_sel = mean_after[o_idx, comp_after, t_idx]
    var_sel = var_t_after[comp_after, t_idx]
    y_star = mean_sel + np.sqrt(var_sel) * z_inner
    log_joint = (
        log_w[o_idx, comp_after]
        - 0.5 * (y_star - mean_sel) ** 2 / var_sel
        - 0.5 * np.log(2.0 * np.pi * var_sel)
    )
    entropy_after = -log_joint.mean(axis=2)                      # (O, T)

    comp_before = np.sum(
        u_inner[..., None] > (np.arange(1, m_ens + 1) / m_ens)[None, None, None, :],
        axis=-1,
    ).clip(max=m_ens - 1)
    mean_sel = mu_t[comp_before, t_idx]
    var_sel = var_t_before[comp_before, t_idx]
    y_star = mean_sel + np.sqrt(var_sel) * z_inner
    log_joint = (
        -math.log(m_ens)
        - 0.5 * (y_star - mean_sel) ** 2 / var_sel
        - 0.5 * np.log(2.0 * np.pi * var_sel)
    )
    entropy_before = -log_joint.mean(axis=2).mean(axis=0)        # (T,)

    return float(np.mean(entropy_before - entropy_after.mean(axis=0)))
