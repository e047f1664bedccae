"""Exact Gaussian-process regression primitives.

Everything downstream (acquisition functions, the batch optimizer, model
metrics) is built on the small set of operations here: ARD kernels, posterior
conditioning, outcome-free fantasy conditioning, Gaussian entropy, and the
log marginal likelihood. All functions are pure and thread-safe.

Numerical conventions:

* Gram matrices always receive a diagonal jitter of ``1e-8 * signal_var``,
  escalated tenfold up to ``1e-4 * signal_var`` before a
  :class:`~hipe.errors.NumericalError` is raised. Near-duplicate batch rows
  are expected in normal operation (disagreement-seeking acquisitions propose
  them deliberately), so robustness matters more than a bit-exact Gram.
* Observation noise variances are floored at :data:`NOISE_FLOOR` to keep
  predictive entropies finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericalError
from .validation import as_float_array, check_unit_cube

NOISE_FLOOR = 1e-10
BASE_JITTER = 1e-8
MAX_JITTER = 1e-4

_SQRT5 = np.sqrt(5.0)

KERNELS = ("matern52", "rbf")


@dataclass(frozen=True)
class HyperSample:
    """One draw of GP hyperparameters.

    Attributes:
        lengthscales: per-dimension ARD lengthscales, unit-cube units.
        noise_var: observation noise variance (floored at ``NOISE_FLOOR``).
        signal_var: kernel signal variance.
        mean_const: constant prior mean.
    """

    lengthscales: np.ndarray
    noise_var: float
    signal_var: float
    mean_const: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=np.float64)).copy()
        if ls.ndim != 1 or ls.size < 1:
            raise ValueError("lengthscales must be a 1-D vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0.0):
            raise ValueError("lengthscales must be strictly positive and finite")
        ls.flags.writeable = False
        object.__setattr__(self, "lengthscales", ls)
        nv = float(self.noise_var)
        if not np.isfinite(nv) or nv < 0.0:
            raise ValueError(f"noise_var must be finite and nonnegative, got {nv}")
        object.__setattr__(self, "noise_var", max(nv, NOISE_FLOOR))
        sv = float(self.signal_var)
        if not np.isfinite(sv) or sv <= 0.0:
            raise ValueError(f"signal_var must be positive and finite, got {sv}")
        object.__setattr__(self, "signal_var", sv)
        if not np.isfinite(float(self.mean_const)):
            raise ValueError("mean_const must be finite")
        object.__setattr__(self, "mean_const", float(self.mean_const))

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Observed inputs in the unit cube plus noisy scalar outcomes.

    An empty dataset (``n == 0``) is legal: the prior case must be handled by
    every consumer, since acquisition optimization is well posed before any
    observation exists.
    """

    points: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        pts = check_unit_cube(np.asarray(self.points, dtype=np.float64), name="points")
        y = as_float_array(self.outcomes, "outcomes").reshape(-1)
        if y.shape[0] != pts.shape[0]:
            raise ValueError(
                f"outcomes length {y.shape[0]} does not match {pts.shape[0]} points"
            )
        pts = pts.copy()
        y = y.copy()
        pts.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "outcomes", y)

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.empty((0, dim)), np.empty(0))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def extend(self, points: np.ndarray, outcomes: np.ndarray) -> "Dataset":
        return Dataset(
            np.vstack([self.points, np.atleast_2d(points)]),
            np.concatenate([self.outcomes, np.atleast_1d(outcomes)]),
        )


@dataclass(frozen=True)
class PosteriorGaussian:
    """A finite-dimensional Gaussian predictive: mean vector and covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    @property
    def variances(self) -> np.ndarray:
        return np.maximum(np.diagonal(self.covariance), 0.0)


def scaled_sqdist(A: np.ndarray, B: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    """Squared ARD-scaled distances, broadcasting over leading axes of ``A``.

    ``A`` has shape ``(..., r, D)``, ``B`` shape ``(s, D)``; the result has
    shape ``(..., r, s)``. Clipped at zero to guard against roundoff.
    """
    As = A / lengthscales
    Bs = B / lengthscales
    d2 = (
        np.sum(As * As, axis=-1)[..., :, None]
        + np.sum(Bs * Bs, axis=-1)[None, :]
        - 2.0 * As @ Bs.T
    )
    return np.maximum(d2, 0.0)


def kernel_profile(sqdist: np.ndarray, kind: str, signal_var: float) -> np.ndarray:
    """Evaluate the stationary kernel profile on squared scaled distances."""
    if kind == "matern52":
        r = np.sqrt(sqdist)
        return signal_var * (1.0 + _SQRT5 * r + (5.0 / 3.0) * sqdist) * np.exp(-_SQRT5 * r)
    if kind == "rbf":
        return signal_var * np.exp(-0.5 * sqdist)
    raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNELS}")


def kernel_matrix(
    A: np.ndarray,
    B: np.ndarray | None,
    hyper: HyperSample,
    kind: str = "matern52",
) -> np.ndarray:
    """Cross-covariance matrix between two point sets.

    Entry ``(i, j)`` is ``signal_var * kappa(r_ij)`` where ``r_ij`` is the
    ARD-scaled Euclidean distance between ``A[i]`` and ``B[j]`` and ``kappa``
    the Matern-5/2 (default) or squared-exponential profile. Pass ``B=None``
    (or the same object as ``A``) for the exactly-symmetrized self-kernel.
    """
    A = check_unit_cube(A, name="A")
    self_kernel = B is None or B is A
    B_arr = A if self_kernel else check_unit_cube(B, name="B")
    if A.shape[1] != B_arr.shape[1]:
        raise ValueError("A and B must share the input dimension")
    if hyper.dim != A.shape[1]:
        raise ValueError(
            f"hyper has {hyper.dim} lengthscales but points have dim {A.shape[1]}"
        )
    K = kernel_profile(scaled_sqdist(A, B_arr, hyper.lengthscales), kind, hyper.signal_var)
    if self_kernel:
        K = 0.5 * (K + K.T)
    return K


def chol_gram(mat: np.ndarray, scale: float) -> np.ndarray:
    """Cholesky factor of a Gram matrix under the escalating-jitter policy."""
    n = mat.shape[-1]
    eye = np.eye(n)
    jitter = BASE_JITTER
    while jitter <= MAX_JITTER * (1.0 + 1e-12):
        try:
            return np.linalg.cholesky(mat + (jitter * scale) * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"Gram matrix of size {n} not factorizable after jitter escalation to "
        f"{MAX_JITTER * scale:.3e} (scale {scale:.3e})"
    )


def chol_gram_stack(mats: np.ndarray, scale: float) -> np.ndarray:
    """Stacked variant of :func:`chol_gram` for ``(..., n, n)`` Gram matrices.

    The fast path factorizes the whole stack at base jitter; on failure each
    matrix falls back to its own escalation ladder so one ill-conditioned
    member cannot perturb the others (evaluation results must not depend on
    how calls are batched).
    """
    eye = np.eye(mats.shape[-1])
    try:
        return np.linalg.cholesky(mats + (BASE_JITTER * scale) * eye)
    except np.linalg.LinAlgError:
        pass
    flat = mats.reshape(-1, mats.shape[-2], mats.shape[-1])
    out = np.empty_like(flat)
    for i in range(flat.shape[0]):
        out[i] = chol_gram(flat[i], scale)
    return out.reshape(mats.shape)


@dataclass(frozen=True)
class PosteriorFactor:
    """Cached Cholesky factorization of one (data, hyper) conditioning.

    Holds everything needed to answer posterior queries without touching the
    training Gram again: the lower factor ``L`` of ``K + noise_var*I`` and the
    whitened residual ``L^{-1} (y - c)``. For an empty dataset both are empty
    and queries reduce to the prior.
    """

    hyper: HyperSample
    kernel: str
    train: np.ndarray
    chol: np.ndarray
    white: np.ndarray

    @property
    def n(self) -> int:
        return self.train.shape[0]

    def cross_white(self, query: np.ndarray) -> np.ndarray:
        """``L^{-1} K(train, query)`` with shape ``(n, m)``."""
        if self.n == 0:
            return np.empty((0, query.shape[0]))
        k = kernel_profile(
            scaled_sqdist(self.train, query, self.hyper.lengthscales),
            self.kernel,
            self.hyper.signal_var,
        )
        return solve_triangular(self.chol, k, lower=True, check_finite=False)

    def mean(self, query: np.ndarray, cross_white: np.ndarray | None = None) -> np.ndarray:
        if self.n == 0:
            return np.full(query.shape[0], self.hyper.mean_const)
        V = self.cross_white(query) if cross_white is None else cross_white
        return self.hyper.mean_const + V.T @ self.white

    def latent_variance(
        self, query: np.ndarray, cross_white: np.ndarray | None = None
    ) -> np.ndarray:
        prior = np.full(query.shape[0], self.hyper.signal_var)
        if self.n == 0:
            return prior
        V = self.cross_white(query) if cross_white is None else cross_white
        return np.maximum(prior - np.sum(V * V, axis=0), 0.0)


def factorize(data: Dataset, hyper: HyperSample, kernel: str = "matern52") -> PosteriorFactor:
    """Factorize the training conditioning for repeated posterior queries."""
    if data.n == 0:
        empty = np.empty((0, 0))
        return PosteriorFactor(hyper, kernel, data.points, empty, np.empty(0))
    K = kernel_matrix(data.points, None, hyper, kernel)
    gram = K + hyper.noise_var * np.eye(data.n)
    L = chol_gram(gram, hyper.signal_var)
    white = solve_triangular(
        L, data.outcomes - hyper.mean_const, lower=True, check_finite=False
    )
    return PosteriorFactor(hyper, kernel, data.points, L, white)


def posterior(
    data: Dataset,
    hyper: HyperSample,
    query: np.ndarray,
    include_noise: bool = False,
    kernel: str = "matern52",
) -> PosteriorGaussian:
    """Joint GP posterior at the query points.

    With empty data this is the prior ``N(c*1, K_qq)``. The covariance never
    depends on the observed outcome values, only on the input locations.
    ``include_noise=True`` adds ``noise_var`` to the diagonal.
    """
    query = check_unit_cube(query, name="query")
    if query.shape[0] < 1:
        raise ValueError("query must contain at least one point")
    factor = factorize(data, hyper, kernel)
    K_qq = kernel_matrix(query, None, hyper, kernel)
    if factor.n == 0:
        mean = np.full(query.shape[0], hyper.mean_const)
        cov = K_qq.copy()
    else:
        V = factor.cross_white(query)
        mean = factor.mean(query, V)
        cov = K_qq - V.T @ V
        cov = 0.5 * (cov + cov.T)
    if include_noise:
        cov = cov + hyper.noise_var * np.eye(query.shape[0])
    return PosteriorGaussian(mean, cov)


def fantasy_variance(
    data: Dataset,
    hyper: HyperSample,
    batch: np.ndarray,
    test: np.ndarray,
    kernel: str = "matern52",
) -> np.ndarray:
    """Latent posterior variance at test points after also observing ``batch``.

    The conditioning treats the batch rows as future noisy observations; no
    outcome values are needed because the Gaussian posterior covariance is
    outcome-independent. Computed via the Schur complement of the training
    block so the training factorization is reused.
    """
    batch = check_unit_cube(batch, name="batch")
    test = check_unit_cube(test, name="test")
    if batch.shape[0] < 1:
        raise ValueError("batch must contain at least one point")
    factor = factorize(data, hyper, kernel)
    V_b = factor.cross_white(batch)
    K_bb = kernel_matrix(batch, None, hyper, kernel)
    S = K_bb + hyper.noise_var * np.eye(batch.shape[0]) - V_b.T @ V_b
    L_s = chol_gram(S, hyper.signal_var)
    k_bt = kernel_profile(
        scaled_sqdist(batch, test, hyper.lengthscales), kernel, hyper.signal_var
    )
    W = factor.cross_white(test)
    resid = k_bt - V_b.T @ W if factor.n else k_bt
    U = solve_triangular(L_s, resid, lower=True, check_finite=False)
    return np.maximum(factor.latent_variance(test, W) - np.sum(U * U, axis=0), 0.0)


def gaussian_entropy(cov: np.ndarray) -> float:
    """Differential entropy (nats) of a multivariate normal with covariance ``cov``.

    Tries the plain Cholesky first so well-conditioned inputs (and identities
    like block-diagonal additivity) are exact; jitter escalation relative to
    the largest diagonal entry only kicks in on failure.
    """
    cov = as_float_array(cov, "cov")
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"cov must be square, got shape {cov.shape}")
    m = cov.shape[0]
    scale = max(float(np.max(np.diagonal(cov))), np.finfo(float).tiny)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        L = None
    if L is None:
        jitter = 1e-12
        while jitter <= MAX_JITTER * (1.0 + 1e-12):
            try:
                L = np.linalg.cholesky(cov + (jitter * scale) * np.eye(m))
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
        if L is None:
            raise NumericalError(
                f"covariance of size {m} is not positive definite after jitter escalation"
            )
    return 0.5 * m * np.log(2.0 * np.pi * np.e) + float(np.sum(np.log(np.diagonal(L))))


def gaussian_entropy_1d(variance) -> np.ndarray:
    """Vectorized scalar-Gaussian entropy; variances floored at ``NOISE_FLOOR``."""
    v = np.maximum(np.asarray(variance, dtype=np.float64), NOISE_FLOOR)
    return 0.5 * np.log(2.0 * np.pi * np.e * v)


def log_marginal_likelihood(
    data: Dataset, hyper: HyperSample, kernel: str = "matern52"
) -> float:
    """``log N(y; c*1, K + noise_var*I)`` for a nonempty dataset."""
    if data.n < 1:
        raise ValueError("log marginal likelihood requires at least one observation")
    factor = factorize(data, hyper, kernel)
    logdet_half = float(np.sum(np.log(np.diagonal(factor.chol))))
    quad = float(factor.white @ factor.white)
    return -0.5 * quad - logdet_half - 0.5 * data.n * np.log(2.0 * np.pi)
