"""Non-model-based initialization designs.

Scrambled Sobol, Latin hypercube, a pairwise-distance-shaped LHS variant, and
plain i.i.d. uniform sampling. All generators are pure functions of their
request and return a ``q x D`` array in the unit cube; center injection
replaces the first row with the cube midpoint so every method is compared at
equal batch size.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc
from scipy.stats import qmc

MAX_SOBOL_DIM = 64


@dataclass(frozen=True)
class DesignRequest:
    q: int
    dim: int
    seed: int = 0
    include_center: bool = False
    beta_shape: tuple[float, float] = (2.0, 5.0)
    swap_iters: int = 2000

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if not 1 <= self.dim <= MAX_SOBOL_DIM:
            raise ValueError(f"dim must be in [1, {MAX_SOBOL_DIM}], got {self.dim}")
        a, b = self.beta_shape
        if a <= 0 or b <= 0:
            raise ValueError("beta_shape parameters must be positive")
        if self.swap_iters < 0:
            raise ValueError("swap_iters must be >= 0")


def sobol_stream(dim: int, n: int, seed: int | None, scramble: bool = True) -> np.ndarray:
    """First ``n`` points of a (scrambled) Sobol sequence in ``[0,1]^dim``.

    The unscrambled base sequence skips the all-zeros origin point, which is a
    degenerate design input; scrambled streams are used as generated. The
    design-level dimension bound lives on :class:`DesignRequest`; this stream
    also serves the optimizer's joint ``q*D`` space, which may be larger.
    """
    engine = qmc.Sobol(d=dim, scramble=scramble, seed=seed)
    with warnings.catch_warnings():
        # non-power-of-two draw counts are fine for our use as raw candidates
        warnings.simplefilter("ignore", UserWarning)
        if scramble:
            return engine.random(n)
        return engine.random(n + 1)[1:]


def _inject_center(points: np.ndarray, include_center: bool) -> np.ndarray:
    if include_center:
        points = points.copy()
        points[0] = 0.5
    return points


def sobol_design(req: DesignRequest, scramble: bool = True) -> np.ndarray:
    pts = sobol_stream(req.dim, req.q, req.seed, scramble=scramble)
    return _inject_center(pts, req.include_center)


def random_design(req: DesignRequest) -> np.ndarray:
    rng = np.random.default_rng(req.seed)
    return _inject_center(rng.uniform(size=(req.q, req.dim)), req.include_center)


def _lhs_points(q: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = np.empty((q, dim))
    for d in range(dim):
        perm = rng.permutation(q)
        pts[:, d] = (perm + rng.uniform(size=q)) / q
    return pts


def lhs_design(req: DesignRequest) -> np.ndarray:
    """Latin hypercube: one point per axis-aligned bin, uniform within-bin jitter."""
    return _inject_center(_lhs_points(req.q, req.dim, req.seed), req.include_center)


def _pairwise_ks(points: np.ndarray, shape: tuple[float, float]) -> float:
    """One-sample KS distance between normalized pairwise distances and a Beta CDF."""
    q, dim = points.shape
    diffs = points[:, None, :] - points[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=-1))[np.triu_indices(q, k=1)]
    dists = np.sort(dists) / np.sqrt(dim)
    cdf = betainc(shape[0], shape[1], np.clip(dists, 0.0, 1.0))
    n = dists.size
    grid = np.arange(1, n + 1) / n
    return float(np.max(np.maximum(np.abs(grid - cdf), np.abs(grid - 1.0 / n - cdf))))


def lhs_beta_design(req: DesignRequest) -> np.ndarray:
    """LHS whose pairwise-distance distribution is pushed toward a Beta target.

    Starts from :func:`lhs_design` and runs a seeded within-column swap search
    (swapping two rows' coordinates in one column preserves the per-dimension
    stratification) accepting only moves that reduce the KS distance to the
    target Beta CDF, for a fixed iteration budget.
    """
    pts = _lhs_points(req.q, req.dim, req.seed)
    if req.q >= 3 and req.swap_iters > 0:
        rng = np.random.default_rng([req.seed, 0x1b5])
        ks = _pairwise_ks(pts, req.beta_shape)
        for _ in range(req.swap_iters):
            d = int(rng.integers(req.dim))
            i, j = rng.choice(req.q, size=2, replace=False)
            pts[[i, j], d] = pts[[j, i], d]
            ks_new = _pairwise_ks(pts, req.beta_shape)
            if ks_new < ks:
                ks = ks_new
            else:
                pts[[i, j], d] = pts[[j, i], d]
    return _inject_center(pts, req.include_center)


DESIGNS = {
    "sobol": sobol_design,
    "random": random_design,
    "lhs": lhs_design,
    "lhs-beta": lhs_beta_design,
}
