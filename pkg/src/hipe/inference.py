"""Hyperpriors and MCMC over GP hyperparameters.

The sampler produces the fully Bayesian hyperparameter ensemble consumed by
every acquisition function. The contract is "M approximately independent
draws from p(theta | D)"; the algorithm behind it is coordinate-wise slice
sampling (stepping out + shrinkage) in unconstrained space, which needs no
step-size tuning and mixes well on the handful of smooth, unimodal-ish
marginals involved here.

Parameterization: lengthscales and the noise standard deviation carry
log-normal priors and are sampled as logs; the constant mean is sampled
directly; the signal variance is fixed (unit, for standardized outcomes) by
default but can carry a log-normal prior instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InferenceError
from .gp import Dataset, HyperSample, log_marginal_likelihood
from .validation import check_positive

_MAX_STEPOUT = 64
_MAX_SHRINK = 200


@dataclass(frozen=True)
class HyperPriorSpec:
    """Hyperprior configuration.

    ``lengthscale_logmean`` already includes the dimension scaling; use
    :meth:`for_dim` to build it as ``log_base + log(D)/2``. The noise prior is
    parameterized on the standard deviation. ``signal_var`` is either a fixed
    value (float) or a ``(logmean, logsd)`` pair for a log-normal prior on the
    signal variance.
    """

    lengthscale_logmean: float
    lengthscale_logsd: float = 0.75
    noise_sd_logmean: float = -5.5
    noise_sd_logsd: float = 0.75
    mean_prior_mean: float = 0.0
    mean_prior_var: float = 0.25
    signal_var: float | tuple[float, float] = 1.0

    def __post_init__(self):
        check_positive(self.lengthscale_logsd, "lengthscale_logsd")
        check_positive(self.noise_sd_logsd, "noise_sd_logsd")
        check_positive(self.mean_prior_var, "mean_prior_var")
        if self.signal_is_sampled:
            check_positive(float(self.signal_var[1]), "signal_var logsd")
        else:
            check_positive(float(self.signal_var), "signal_var")

    @property
    def signal_is_sampled(self) -> bool:
        return isinstance(self.signal_var, tuple)

    @classmethod
    def for_dim(cls, dim: int, log_base: float = 0.75, **overrides) -> "HyperPriorSpec":
        """Default spec for a ``dim``-dimensional input space."""
        if dim < 1:
            raise ValueError("dim must be >= 1")
        return cls(lengthscale_logmean=log_base + 0.5 * math.log(dim), **overrides)


@dataclass(frozen=True)
class McmcSchedule:
    burn_in: int = 192
    draws: int = 288
    thin: int = 24

    def __post_init__(self):
        if self.burn_in < 0 or self.draws < 1 or self.thin < 1:
            raise ValueError("schedule counts must be positive (burn_in may be 0)")
        if self.draws % self.thin != 0:
            raise ValueError(
                f"draws ({self.draws}) must be a multiple of thin ({self.thin})"
            )

    @property
    def retained(self) -> int:
        return self.draws // self.thin


@dataclass(frozen=True)
class HyperEnsemble:
    """M hyperparameter draws plus chain diagnostics."""

    samples: tuple[HyperSample, ...]
    source: str
    diagnostics: dict

    @property
    def m(self) -> int:
        return len(self.samples)

    @property
    def dim(self) -> int:
        return self.samples[0].dim


def _lognormal_logpdf(x: float, logmean: float, logsd: float) -> float:
    if x <= 0.0:
        return -np.inf
    z = (math.log(x) - logmean) / logsd
    return -math.log(x * logsd) - 0.5 * math.log(2.0 * math.pi) - 0.5 * z * z


def _normal_logpdf(x: float, mean: float, sd: float) -> float:
    z = (x - mean) / sd
    return -math.log(sd) - 0.5 * math.log(2.0 * math.pi) - 0.5 * z * z


def log_prior(hyper: HyperSample, spec: HyperPriorSpec) -> float:
    """Log prior density of one hyperparameter sample, natural parameterization.

    Log-normal terms are evaluated at the natural values (Jacobian included),
    so this is a proper density over (lengthscales, noise_sd, mean_const) and,
    when sampled, signal_var.
    """
    lp = sum(
        _lognormal_logpdf(ls, spec.lengthscale_logmean, spec.lengthscale_logsd)
        for ls in hyper.lengthscales
    )
    lp += _lognormal_logpdf(
        math.sqrt(hyper.noise_var), spec.noise_sd_logmean, spec.noise_sd_logsd
    )
    lp += _normal_logpdf(
        hyper.mean_const, spec.mean_prior_mean, math.sqrt(spec.mean_prior_var)
    )
    if spec.signal_is_sampled:
        logmean, logsd = spec.signal_var
        lp += _lognormal_logpdf(hyper.signal_var, logmean, logsd)
    return lp


def _hyper_from_unconstrained(z: np.ndarray, dim: int, spec: HyperPriorSpec) -> HyperSample:
    with np.errstate(over="ignore"):
        lengthscales = np.exp(z[:dim])
    noise_var = math.exp(2.0 * z[dim])
    mean_const = z[dim + 1]
    signal_var = math.exp(z[dim + 2]) if spec.signal_is_sampled else float(spec.signal_var)
    return HyperSample(lengthscales, noise_var, signal_var, mean_const)


def _log_posterior_unconstrained(
    z: np.ndarray, data: Dataset, spec: HyperPriorSpec, kernel: str
) -> float:
    """Reference implementation of the unconstrained-space log posterior.

    The sampler uses the fused :func:`_make_logpost` closure; this composed
    form (prior + Jacobian + marginal likelihood through the public GP ops)
    is kept as the definition the fast path is tested against.
    """
    dim = data.dim
    try:
        hyper = _hyper_from_unconstrained(z, dim, spec)
    except (ValueError, OverflowError):
        return -np.inf
    lp = log_prior(hyper, spec)
    # change of variables: log-transformed coordinates pick up their Jacobians
    lp += float(np.sum(z[:dim])) + z[dim]
    if spec.signal_is_sampled:
        lp += z[dim + 2]
    if data.n >= 1:
        lp += log_marginal_likelihood(data, hyper, kernel)
    return lp if np.isfinite(lp) else -np.inf


def _make_logpost(data: Dataset, spec: HyperPriorSpec, kernel: str):
    """Build a fast unconstrained log-posterior evaluator.

    Mathematically identical to :func:`_log_posterior_unconstrained`; written
    as one fused closure because the slice sampler evaluates it tens of
    thousands of times per fit.
    """
    from .gp import BASE_JITTER, MAX_JITTER, NOISE_FLOOR

    dim = data.dim
    n_par = dim + 2 + (1 if spec.signal_is_sampled else 0)
    prior_mean = np.empty(n_par)
    prior_sd = np.empty(n_par)
    prior_mean[:dim] = spec.lengthscale_logmean
    prior_sd[:dim] = spec.lengthscale_logsd
    prior_mean[dim] = spec.noise_sd_logmean
    prior_sd[dim] = spec.noise_sd_logsd
    prior_mean[dim + 1] = spec.mean_prior_mean
    prior_sd[dim + 1] = math.sqrt(spec.mean_prior_var)
    if spec.signal_is_sampled:
        prior_mean[dim + 2] = spec.signal_var[0]
        prior_sd[dim + 2] = spec.signal_var[1]
    prior_const = -float(np.sum(np.log(prior_sd))) - 0.5 * n_par * math.log(2 * math.pi)

    X = data.points
    y = data.outcomes
    n = data.n
    sqrt5 = math.sqrt(5.0)
    log2pi = math.log(2.0 * math.pi)

    def logpost(z: np.ndarray) -> float:
        resid = (z - prior_mean) / prior_sd
        lp = prior_const - 0.5 * float(resid @ resid)
        if n == 0:
            return lp
        with np.errstate(over="ignore"):
            ls = np.exp(z[:dim])
            noise_var = max(math.exp(2.0 * z[dim]) if z[dim] < 300 else np.inf, NOISE_FLOOR)
            signal_var = math.exp(z[dim + 2]) if spec.signal_is_sampled else float(spec.signal_var)
        if not (np.all(np.isfinite(ls)) and np.isfinite(noise_var) and np.isfinite(signal_var)):
            return -np.inf
        Xs = X / ls
        sq = np.sum(Xs * Xs, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (Xs @ Xs.T)
        np.maximum(d2, 0.0, out=d2)
        if kernel == "matern52":
            r = np.sqrt(d2)
            K = signal_var * (1.0 + sqrt5 * r + (5.0 / 3.0) * d2) * np.exp(-sqrt5 * r)
        else:
            K = signal_var * np.exp(-0.5 * d2)
        K = 0.5 * (K + K.T)
        jitter = BASE_JITTER
        while True:
            G = K.copy()
            G.flat[:: n + 1] += noise_var + jitter * signal_var
            try:
                L = np.linalg.cholesky(G)
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > MAX_JITTER * (1.0 + 1e-12):
                    return -np.inf
        w = solve_triangular(L, y - z[dim + 1], lower=True, check_finite=False)
        ll = -0.5 * float(w @ w) - float(np.sum(np.log(np.diagonal(L)))) - 0.5 * n * log2pi
        value = lp + ll
        return value if np.isfinite(value) else -np.inf

    return logpost


def sample_ensemble(
    data: Dataset,
    spec: HyperPriorSpec,
    schedule: McmcSchedule = McmcSchedule(),
    seed: int = 0,
    kernel: str = "matern52",
) -> HyperEnsemble:
    """Draw a hyperparameter ensemble from p(theta) * p(y | X, theta).

    With empty data the chain targets the prior. Deterministic given
    ``(data, spec, schedule, seed)``: the whole chain runs off one
    ``numpy.random.default_rng(seed)`` stream.
    """
    dim = data.dim
    n_par = dim + 2 + (1 if spec.signal_is_sampled else 0)
    z = np.empty(n_par)
    z[:dim] = spec.lengthscale_logmean
    z[dim] = spec.noise_sd_logmean
    z[dim + 1] = spec.mean_prior_mean
    widths = np.empty(n_par)
    widths[:dim] = spec.lengthscale_logsd
    widths[dim] = spec.noise_sd_logsd
    widths[dim + 1] = math.sqrt(spec.mean_prior_var)
    if spec.signal_is_sampled:
        z[dim + 2] = spec.signal_var[0]
        widths[dim + 2] = spec.signal_var[1]

    rng = np.random.default_rng(seed)
    stats = {"logpost_evals": 0, "shrink_steps": 0, "nonfinite_evals": 0, "updates": 0}
    fast_logpost = _make_logpost(data, spec, kernel)

    def logpost(vec: np.ndarray) -> float:
        stats["logpost_evals"] += 1
        value = fast_logpost(vec)
        if not np.isfinite(value):
            stats["nonfinite_evals"] += 1
        return value

    cur_lp = logpost(z)
    if not np.isfinite(cur_lp):
        raise InferenceError(
            f"log posterior is non-finite at the chain start (z={z.tolist()})"
        )

    def coordinate_eval(i: int, value: float) -> float:
        old = z[i]
        z[i] = value
        lp = logpost(z)
        z[i] = old
        return lp

    def slice_update(i: int, cur_lp: float) -> float:
        log_y = cur_lp - rng.exponential()
        w = widths[i]
        left = z[i] - w * rng.uniform()
        right = left + w
        for _ in range(_MAX_STEPOUT):
            if coordinate_eval(i, left) <= log_y:
                break
            left -= w
        for _ in range(_MAX_STEPOUT):
            if coordinate_eval(i, right) <= log_y:
                break
            right += w
        for k in range(_MAX_SHRINK):
            proposal = rng.uniform(left, right)
            lp = coordinate_eval(i, proposal)
            if lp > log_y:
                stats["shrink_steps"] += k
                stats["updates"] += 1
                z[i] = proposal
                return lp
            if proposal < z[i]:
                left = proposal
            else:
                right = proposal
        raise InferenceError(
            f"slice sampler failed to find an acceptable point for coordinate {i} "
            f"(nonfinite evals so far: {stats['nonfinite_evals']})"
        )

    retained: list[HyperSample] = []
    total_sweeps = schedule.burn_in + schedule.draws
    for sweep in range(total_sweeps):
        for i in range(n_par):
            cur_lp = slice_update(i, cur_lp)
        t = sweep - schedule.burn_in
        if t >= 0 and (t + 1) % schedule.thin == 0:
            try:
                retained.append(_hyper_from_unconstrained(z, dim, spec))
            except (ValueError, OverflowError) as exc:
                raise InferenceError(
                    f"retained sample at sweep {sweep} is not representable: {exc}"
                ) from exc

    diagnostics = {
        "logpost_evals": stats["logpost_evals"],
        "nonfinite_evals": stats["nonfinite_evals"],
        "mean_shrink_steps": stats["shrink_steps"] / max(stats["updates"], 1),
        "final_logpost": cur_lp,
    }
    return HyperEnsemble(
        samples=tuple(retained),
        source="prior" if data.n == 0 else "posterior",
        diagnostics=diagnostics,
    )
