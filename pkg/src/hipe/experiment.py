"""Seeded active-learning and two-shot BO runs, metrics, and persistence.

A run is deterministic given its config and seed: every random stream is
derived from ``(seed, stage, batch)`` through :func:`derive_seed`, wall-times
are kept out of the CSV, and floats are serialized with shortest round-trip
``repr``. One ``runs.csv`` (long format) plus one ``run_<seed>.json`` record
per seed are written per experiment; both carry ``schema_version``.
"""

from __future__ import annotations

import json
import time
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from scipy.stats import rankdata

from .acquisition import ACQUISITIONS, make_acquisition, make_context
from .benchmarks import get_benchmark
from .designs import DESIGNS, DesignRequest
from .errors import ConfigError
from .gp import chol_gram, chol_gram_stack, factorize, kernel_matrix, kernel_profile, scaled_sqdist
from .model import FullyBayesianGP
from .optimize import OptimizerConfig, optimize_batch

SCHEMA_VERSION = 1
CSV_COLUMNS = ("seed", "algo", "benchmark", "batch_index", "metric", "value")
METRIC_ORDER = ("rmse", "nll", "inferred_value", "in_sample_best")
METRIC_HIGHER_IS_BETTER = {
    "rmse": False,
    "nll": False,
    "inferred_value": True,
    "in_sample_best": True,
}

ALGOS = tuple(DESIGNS) + ACQUISITIONS

# stage tags for the documented seed-splitting scheme
_STAGE_MCMC = 1
_STAGE_DESIGN = 2
_STAGE_CTX_TEST = 3
_STAGE_CTX_DRAWS = 4
_STAGE_OPT = 5
_STAGE_NOISE = 6
_STAGE_TESTSET = 7
_STAGE_INFER = 8
_STAGE_BO = 9


def derive_seed(*keys: int) -> int:
    """Child seed for stage ``keys`` — the documented rng splitting function."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0] >> 1)


def _benchmark_tag(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


_CONFIG_DEFAULTS: dict = {
    "benchmark": None,
    "algo": None,
    "mode": "al",
    "q": None,
    "batches": None,
    "seeds": (0,),
    "t_points": 1024,
    "n_draws": 128,
    "beta": "auto",
    "noisy_entropy": True,
    "kernel": "matern52",
    "lengthscale_log_base": 0.75,
    "mcmc_burn_in": 192,
    "mcmc_draws": 288,
    "mcmc_thin": 24,
    "opt_restarts": 4,
    "opt_raw_samples": 384,
    "opt_max_iters": 50,
    "opt_grad_tol": 1e-6,
    "test_set_size": 2048,
    "nll_variant": "latent",
    "compute_inference": True,
    "bo_n_draws": 64,
    "bo_smoothing": 1e-3,
    "bo_incumbent_sigma": 0.05,
    "bo_gaussian_raws": 384,
    "out_dir": "results",
}


def parse_seeds(value) -> tuple[int, ...]:
    """Accept a list of ints, a single int, or a ``"0..19"`` range string."""
    if isinstance(value, str):
        if ".." in value:
            lo, hi = value.split("..", 1)
            seeds = tuple(range(int(lo), int(hi) + 1))
        else:
            seeds = tuple(int(tok) for tok in value.split(",") if tok != "")
    elif isinstance(value, (int, np.integer)):
        seeds = (int(value),)
    else:
        seeds = tuple(int(s) for s in value)
    if not seeds:
        raise ConfigError("seeds must be nonempty")
    return seeds


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; see ``_CONFIG_DEFAULTS`` for the keys."""

    benchmark: str
    algo: str
    mode: str = "al"
    q: int = 16
    batches: int = 4
    seeds: tuple[int, ...] = (0,)
    t_points: int = 1024
    n_draws: int = 128
    beta: float | str = "auto"
    noisy_entropy: bool = True
    kernel: str = "matern52"
    lengthscale_log_base: float = 0.75
    mcmc_burn_in: int = 192
    mcmc_draws: int = 288
    mcmc_thin: int = 24
    opt_restarts: int = 4
    opt_raw_samples: int = 384
    opt_max_iters: int = 50
    opt_grad_tol: float = 1e-6
    test_set_size: int = 2048
    nll_variant: str = "latent"
    compute_inference: bool = True
    bo_n_draws: int = 64
    bo_smoothing: float = 1e-3
    bo_incumbent_sigma: float = 0.05
    bo_gaussian_raws: int = 384
    out_dir: str = "results"

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; expected one of {ALGOS}")
        if self.mode not in ("al", "bo"):
            raise ConfigError(f"mode must be 'al' or 'bo', got {self.mode!r}")
        if self.batches < 1 or self.q < 1:
            raise ConfigError("q and batches must be >= 1")
        if self.mode == "bo" and self.batches < 2:
            raise ConfigError("bo mode needs at least 2 batches (init + BO stage)")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        for key in ("t_points", "n_draws", "test_set_size", "bo_n_draws"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.nll_variant not in ("latent", "noisy"):
            raise ConfigError("nll_variant must be 'latent' or 'noisy'")
        if self.beta != "auto":
            try:
                beta = float(self.beta)
            except (TypeError, ValueError):
                raise ConfigError("beta must be 'auto' or a number") from None
            if beta < 0:
                raise ConfigError("beta must be nonnegative")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        unknown = sorted(set(raw) - set(_CONFIG_DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged = dict(_CONFIG_DEFAULTS)
        merged.update(raw)
        for key in ("benchmark", "algo"):
            if merged[key] is None:
                raise ConfigError(f"config key {key!r} is required")
        mode = merged.get("mode", "al")
        if merged["q"] is None:
            merged["q"] = 24 if mode == "bo" else 16
        if merged["batches"] is None:
            merged["batches"] = 2 if mode == "bo" else 4
        merged["seeds"] = parse_seeds(merged["seeds"])
        return cls(**merged)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {}
        for key in _CONFIG_DEFAULTS:
            value = getattr(self, key)
            out[key] = list(value) if isinstance(value, tuple) else value
        return out

    def optimizer_config(self, seed: int) -> OptimizerConfig:
        return OptimizerConfig(
            restarts=self.opt_restarts,
            raw_samples=self.opt_raw_samples,
            max_iters=self.opt_max_iters,
            grad_tol=self.opt_grad_tol,
            seed=seed,
        )


@dataclass
class RunRecord:
    schema_version: int
    seed: int
    algo: str
    benchmark: str
    mode: str
    config: dict
    status: str = "ok"
    error: str | None = None
    batches: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "algo": self.algo,
            "benchmark": self.benchmark,
            "mode": self.mode,
            "config": self.config,
            "status": self.status,
            "error": self.error,
            "batches": self.batches,
            "timings": self.timings,
        }


def evaluate_model(model: FullyBayesianGP, X_test, f_true, variant: str = "latent") -> dict:
    """RMSE of the mixture mean and mixture NLL against noiseless targets.

    ``variant`` picks the predictive variance entering the NLL: ``"latent"``
    (default; the targets are noiseless) or ``"noisy"``.
    """
    f_true = np.asarray(f_true, dtype=np.float64)
    means, variances = model.predictive_components(X_test, include_noise=variant == "noisy")
    rmse = float(np.sqrt(np.mean((means.mean(axis=0) - f_true) ** 2)))
    floor = 1e-12
    if np.any(variances < floor):
        warnings.warn("degenerate predictive variance clamped for NLL", RuntimeWarning)
        variances = np.maximum(variances, floor)
    log_comp = (
        -0.5 * (f_true[None, :] - means) ** 2 / variances
        - 0.5 * np.log(2.0 * np.pi * variances)
    )
    log_mix = logsumexp(log_comp, axis=0) - np.log(means.shape[0])
    return {"rmse": rmse, "nll": float(-np.mean(log_mix))}


def _posterior_mean_objective(model: FullyBayesianGP):
    factors = [factorize(model.dataset_, h, model.kernel) for h in model.ensemble_.samples]

    def values(batches: np.ndarray) -> np.ndarray:
        pts = np.clip(batches[:, 0, :], 0.0, 1.0)
        total = np.zeros(pts.shape[0])
        for factor in factors:
            total += factor.mean(pts)
        return total / len(factors)

    return values


def inferred_maximizer(model: FullyBayesianGP, opt_cfg: OptimizerConfig) -> np.ndarray:
    """Argmax of the ensemble-averaged posterior mean; ties break to the center."""
    dim = model.n_features_in_
    values = _posterior_mean_objective(model)
    best, best_val = optimize_batch(values, 1, dim, opt_cfg)
    center = np.full((1, 1, dim), 0.5)
    if best_val - float(values(center)[0]) <= 1e-12:
        return center[0, 0]
    return best[0]


class ImprovementUtility:
    """Smoothed Monte Carlo noisy-improvement utility for the BO stage.

    Per hyperparameter sample, frozen joint draws of the latent function over
    (candidate batch, observed inputs) yield the batch max minus the sampled
    incumbent max; softplus smoothing (temperature in standardized units)
    keeps the objective differentiable, log-of-mean aggregation stabilizes the
    scale, and the average over the ensemble integrates out hyperparameters.
    """

    def __init__(self, model: FullyBayesianGP, q: int, n_draws: int = 64,
                 seed: int = 0, smoothing: float = 1e-3):
        data = model.dataset_
        if data.n < 1:
            raise ValueError("the BO-stage utility needs at least one observation")
        self.kernel = model.kernel
        self.smoothing = float(smoothing)
        self.q = q
        self.obs = data.points
        n = data.n
        rng = np.random.default_rng(seed)
        self.eps_batch = rng.standard_normal((n_draws, q))
        self.eps_obs = rng.standard_normal((n_draws, n))

        self.samples = model.ensemble_.samples
        self.factors = [factorize(data, h, self.kernel) for h in self.samples]
        self.obs_white = []     # L_D^{-1} K(D, obs) per theta
        self.chol_obs = []      # chol of latent cov at observed points
        self.incumbent = np.empty((len(self.samples), n_draws))
        for i, (hyper, factor) in enumerate(zip(self.samples, self.factors)):
            V = factor.cross_white(self.obs)
            cov = kernel_matrix(self.obs, None, hyper, self.kernel) - V.T @ V
            L = chol_gram(cov, hyper.signal_var)
            mu = factor.mean(self.obs, V)
            f_obs = mu[None, :] + self.eps_obs @ L.T
            self.obs_white.append(V)
            self.chol_obs.append(L)
            self.incumbent[i] = f_obs.max(axis=1)

    def values(self, batches: np.ndarray) -> np.ndarray:
        batches = np.clip(np.asarray(batches, dtype=np.float64), 0.0, 1.0)
        n_b, q, _ = batches.shape
        tau = self.smoothing
        out = np.zeros(n_b)
        chunk_size = 64
        for start in range(0, n_b, chunk_size):
            chunk = batches[start : start + chunk_size]
            nb = chunk.shape[0]
            util = np.zeros((len(self.samples), nb))
            for i, (hyper, factor) in enumerate(zip(self.samples, self.factors)):
                ls = hyper.lengthscales
                flat = chunk.reshape(nb * q, -1)
                V_b = factor.cross_white(flat)              # (n, nb*q)
                Xs = chunk / ls
                sq = np.sum(Xs * Xs, axis=-1)
                d2 = np.maximum(
                    sq[:, :, None] + sq[:, None, :] - 2.0 * Xs @ Xs.transpose(0, 2, 1), 0.0
                )
                S_bb = kernel_profile(d2, self.kernel, hyper.signal_var)
                if factor.n:
                    Vt = np.ascontiguousarray(V_b.T).reshape(nb, q, -1)
                    S_bb = S_bb - Vt @ Vt.transpose(0, 2, 1)
                cross = kernel_profile(
                    scaled_sqdist(chunk, self.obs, ls), self.kernel, hyper.signal_var
                )
                if factor.n:
                    cross = cross - (V_b.T @ self.obs_white[i]).reshape(nb, q, -1)
                n_obs = self.obs.shape[0]
                G = solve_triangular(
                    self.chol_obs[i],
                    cross.transpose(2, 0, 1).reshape(n_obs, nb * q),
                    lower=True,
                    check_finite=False,
                )                                           # (n_obs, nb*q)
                Gt = np.ascontiguousarray(G.T).reshape(nb, q, n_obs)
                cond_cov = S_bb - Gt @ Gt.transpose(0, 2, 1)
                L_cond = chol_gram_stack(cond_cov, hyper.signal_var)
                mu_b = hyper.mean_const + (
                    (V_b.T @ factor.white).reshape(nb, q) if factor.n else 0.0
                )
                f_batch = (
                    mu_b[:, None, :]
                    + (self.eps_obs @ G).reshape(-1, nb, q).transpose(1, 0, 2)
                    + np.matmul(self.eps_batch, L_cond.transpose(0, 2, 1))
                )
                improvement = f_batch.max(axis=2) - self.incumbent[i][None, :]
                log_sp = np.log(tau) + _log_softplus(improvement / tau)
                util[i] = logsumexp(log_sp, axis=1) - np.log(log_sp.shape[1])
            out[start : start + nb] = util.mean(axis=0)
        return out

    def __call__(self, batch: np.ndarray) -> float:
        return float(self.values(np.asarray(batch)[None])[0])


def _log_softplus(u: np.ndarray) -> np.ndarray:
    """log(log(1 + exp(u))) computed stably for large |u|."""
    out = np.empty_like(u)
    hi = u > 30.0
    lo = u < -30.0
    mid = ~(hi | lo)
    out[hi] = np.log(u[hi])
    out[lo] = u[lo]
    out[mid] = np.log(np.log1p(np.exp(u[mid])))
    return out


def _incumbent_point(model: FullyBayesianGP) -> np.ndarray:
    obs = model.dataset_.points
    mean = model.predict(obs)
    return obs[int(np.argmax(mean))]


def _fit_model(cfg: ExperimentConfig, X, y, seed: int, batch_index: int) -> FullyBayesianGP:
    model = FullyBayesianGP(
        kernel=cfg.kernel,
        lengthscale_log_base=cfg.lengthscale_log_base,
        burn_in=cfg.mcmc_burn_in,
        draws=cfg.mcmc_draws,
        thin=cfg.mcmc_thin,
        random_state=derive_seed(seed, _STAGE_MCMC, batch_index),
    )
    return model.fit(X, y)


def _select_acquisition_batch(
    cfg: ExperimentConfig, model: FullyBayesianGP, seed: int, batch_index: int, dim: int
) -> np.ndarray:
    test_points = np.random.default_rng(
        derive_seed(seed, _STAGE_CTX_TEST, batch_index)
    ).uniform(size=(cfg.t_points, dim))
    ctx = make_context(
        model.ensemble_,
        model.dataset_,
        test_points,
        q=cfg.q,
        n_draws=cfg.n_draws,
        seed=derive_seed(seed, _STAGE_CTX_DRAWS, batch_index),
        beta=cfg.beta,
        noisy_entropy=cfg.noisy_entropy,
        kernel=cfg.kernel,
    )
    acq = make_acquisition(cfg.algo, ctx)
    batch, _ = optimize_batch(
        acq.values, cfg.q, dim, cfg.optimizer_config(derive_seed(seed, _STAGE_OPT, batch_index))
    )
    return batch


def _select_bo_batch(
    cfg: ExperimentConfig, model: FullyBayesianGP, seed: int, batch_index: int, dim: int
) -> np.ndarray:
    utility = ImprovementUtility(
        model,
        q=cfg.q,
        n_draws=cfg.bo_n_draws,
        seed=derive_seed(seed, _STAGE_BO, batch_index),
        smoothing=cfg.bo_smoothing,
    )
    incumbent = _incumbent_point(model)
    rng = np.random.default_rng(derive_seed(seed, _STAGE_BO, batch_index, 1))
    perturbed = np.clip(
        incumbent[None, None, :]
        + cfg.bo_incumbent_sigma * rng.standard_normal((cfg.bo_gaussian_raws, cfg.q, dim)),
        0.0,
        1.0,
    )
    batch, _ = optimize_batch(
        utility.values,
        cfg.q,
        dim,
        cfg.optimizer_config(derive_seed(seed, _STAGE_OPT, batch_index)),
        warm_starts=list(perturbed),
    )
    return batch


def _run_seed(cfg: ExperimentConfig, seed: int) -> RunRecord:
    bench = get_benchmark(cfg.benchmark)
    dim = bench.total_dim
    record = RunRecord(
        schema_version=SCHEMA_VERSION,
        seed=seed,
        algo=cfg.algo,
        benchmark=cfg.benchmark,
        mode=cfg.mode,
        config=cfg.to_dict(),
    )
    timings = {"fit_initial": 0.0, "acq_opt": 0.0, "fit_bo": 0.0, "bo_opt": 0.0}

    test_rng = np.random.default_rng(
        derive_seed(seed, _STAGE_TESTSET, _benchmark_tag(cfg.benchmark))
    )
    X_test = test_rng.uniform(size=(cfg.test_set_size, dim))
    f_test = bench.true_value(X_test)

    X = np.empty((0, dim))
    y = np.empty(0)
    model: FullyBayesianGP | None = None

    for b in range(cfg.batches):
        selector = cfg.algo
        if cfg.mode == "bo" and b >= 1:
            selector = "_bo_utility"

        if selector in ACQUISITIONS and model is None:
            t0 = time.perf_counter()
            model = _fit_model(cfg, X, y, seed, b)
            timings["fit_initial"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        if selector == "_bo_utility":
            design = _select_bo_batch(cfg, model, seed, b, dim)
            timings["bo_opt"] += time.perf_counter() - t0
        elif selector in ACQUISITIONS:
            design = _select_acquisition_batch(cfg, model, seed, b, dim)
            timings["acq_opt"] += time.perf_counter() - t0
        else:
            req = DesignRequest(
                q=cfg.q,
                dim=dim,
                seed=derive_seed(seed, _STAGE_DESIGN, b),
                include_center=b == 0,
            )
            design = DESIGNS[selector](req)
            timings["acq_opt"] += time.perf_counter() - t0

        outcomes = bench.evaluate(design, np.random.default_rng(derive_seed(seed, _STAGE_NOISE, b)))
        X = np.vstack([X, design])
        y = np.concatenate([y, outcomes])

        t0 = time.perf_counter()
        model = _fit_model(cfg, X, y, seed, b + 1)
        timings["fit_bo"] += time.perf_counter() - t0

        metrics = evaluate_model(model, X_test, f_test, variant=cfg.nll_variant)
        if cfg.compute_inference:
            point = inferred_maximizer(
                model,
                OptimizerConfig(
                    restarts=cfg.opt_restarts,
                    raw_samples=cfg.opt_raw_samples,
                    max_iters=cfg.opt_max_iters,
                    grad_tol=cfg.opt_grad_tol,
                    seed=derive_seed(seed, _STAGE_INFER, b),
                ),
            )
            metrics["inferred_value"] = float(bench.true_value(point[None])[0])
        best_obs = X[int(np.argmax(y))]
        metrics["in_sample_best"] = float(bench.true_value(best_obs[None])[0])

        record.batches.append(
            {
                "index": b,
                "design": design.tolist(),
                "metrics": metrics,
                "ensemble": model.hyper_summary(),
            }
        )

    record.timings = timings
    return record


def run_active_learning(cfg: ExperimentConfig, seed: int) -> RunRecord:
    """One seeded active-learning run: the selection algo picks every batch."""
    if cfg.mode != "al":
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "mode": "al"})
    return _run_seed(cfg, seed)


def run_two_shot(cfg: ExperimentConfig, seed: int) -> RunRecord:
    """One seeded BO run: batch one by the initialization algo, later batches
    by the smoothed noisy-improvement utility."""
    if cfg.mode != "bo":
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "mode": "bo"})
    return _run_seed(cfg, seed)


def run_experiment(cfg: ExperimentConfig) -> tuple[list[RunRecord], int]:
    """Run all seeds with per-seed failure isolation; returns (records, n_failed)."""
    records: list[RunRecord] = []
    n_failed = 0
    for seed in cfg.seeds:
        try:
            records.append(_run_seed(cfg, seed))
        except Exception as exc:  # noqa: BLE001 - seed isolation is the contract
            n_failed += 1
            records.append(
                RunRecord(
                    schema_version=SCHEMA_VERSION,
                    seed=seed,
                    algo=cfg.algo,
                    benchmark=cfg.benchmark,
                    mode=cfg.mode,
                    config=cfg.to_dict(),
                    status="failed",
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return records, n_failed


def write_outputs(records: Sequence[RunRecord], out_dir: str | Path) -> Path:
    """Write ``runs.csv`` plus one ``run_<seed>.json`` per record.

    Always rewrites ``runs.csv`` so repeated identical invocations are
    byte-identical; point different algorithms at different output dirs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "runs.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            if rec.status != "ok":
                continue
            for batch in rec.batches:
                for metric in METRIC_ORDER:
                    if metric not in batch["metrics"]:
                        continue
                    value = repr(float(batch["metrics"][metric]))
                    fh.write(
                        f"{rec.seed},{rec.algo},{rec.benchmark},{batch['index']},{metric},{value}\n"
                    )
    for rec in records:
        path = out / f"run_{rec.seed}.json"
        path.write_text(
            json.dumps(rec.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return csv_path


def compute_rankings(
    rows: Sequence[Mapping], higher_is_better: bool
) -> dict[str, dict[int, float]]:
    """Fractional mean ranks per algo per batch.

    ``rows`` carry one metric's values with keys ``benchmark, seed,
    batch_index, algo, value``. Within each (benchmark, seed, batch) cell the
    algorithms are ranked (1 = best, ties share the mean rank); cells missing
    any algorithm are excluded with a warning.
    """
    algos = sorted({r["algo"] for r in rows})
    cells: dict[tuple, dict[str, float]] = {}
    for r in rows:
        key = (r["benchmark"], r["seed"], r["batch_index"])
        cells.setdefault(key, {})[r["algo"]] = float(r["value"])
    sums: dict[str, dict[int, list[float]]] = {a: {} for a in algos}
    for key, by_algo in sorted(cells.items()):
        if set(by_algo) != set(algos):
            warnings.warn(f"ranking cell {key} is missing algorithms; excluded", RuntimeWarning)
            continue
        values = np.array([by_algo[a] for a in algos])
        ranks = rankdata(-values if higher_is_better else values, method="average")
        batch = key[2]
        for a, rk in zip(algos, ranks):
            sums[a].setdefault(batch, []).append(float(rk))
    return {
        a: {b: float(np.mean(v)) for b, v in sorted(per_batch.items())}
        for a, per_batch in sums.items()
    }
