"""Experiment orchestration: config, metrics, inference point, BO utility,
rankings, persistence, determinism."""

import json

import numpy as np
import pytest
from scipy.stats import norm

from hipe.designs import DesignRequest, sobol_design
from hipe.errors import ConfigError
from hipe.gp import Dataset, HyperSample
from hipe.inference import HyperEnsemble
from hipe.model import FullyBayesianGP
from hipe.optimize import OptimizerConfig
from hipe.experiment import (
    _STAGE_DESIGN,
    ExperimentConfig,
    ImprovementUtility,
    RunRecord,
    compute_rankings,
    derive_seed,
    evaluate_model,
    inferred_maximizer,
    parse_seeds,
    run_active_learning,
    run_experiment,
    run_two_shot,
    write_outputs,
)

FAST = dict(
    t_points=32,
    n_draws=16,
    mcmc_burn_in=16,
    mcmc_draws=16,
    mcmc_thin=8,
    opt_restarts=1,
    opt_raw_samples=8,
    opt_max_iters=5,
    test_set_size=64,
    bo_n_draws=16,
    bo_gaussian_raws=8,
)


def make_cfg(**kw):
    raw = dict(benchmark="hartmann6", algo="sobol", q=3, batches=1, seeds=[0], **FAST)
    raw.update(kw)
    return ExperimentConfig.from_dict(raw)


def constant_model(dim=2, mean_const=0.0):
    """A fitted-looking model that predicts ``mean_const`` with prior variance."""
    model = FullyBayesianGP()
    model.n_features_in_ = dim
    model.y_mean_ = 0.0
    model.y_scale_ = 1.0
    model.dataset_ = Dataset.empty(dim)
    hyper = HyperSample(np.full(dim, 2.0), 0.01, 1.0, mean_const)
    model.ensemble_ = HyperEnsemble((hyper,), "prior", {})
    return model


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys: typo_key"):
            ExperimentConfig.from_dict({"benchmark": "hartmann6", "algo": "sobol", "typo_key": 1})

    def test_required_keys(self):
        with pytest.raises(ConfigError, match="required"):
            ExperimentConfig.from_dict({"algo": "sobol"})

    def test_seed_parsing_forms(self):
        assert parse_seeds("0..3") == (0, 1, 2, 3)
        assert parse_seeds("4,7") == (4, 7)
        assert parse_seeds(5) == (5,)
        assert parse_seeds([1, 2]) == (1, 2)
        with pytest.raises(ConfigError):
            parse_seeds([])

    def test_mode_defaults_match_study_settings(self):
        al = ExperimentConfig.from_dict({"benchmark": "hartmann6", "algo": "hipe"})
        assert (al.q, al.batches) == (16, 4)
        bo = ExperimentConfig.from_dict(
            {"benchmark": "hartmann6", "algo": "hipe", "mode": "bo"}
        )
        assert (bo.q, bo.batches) == (24, 2)

    def test_small_batch_ablation_expressible(self):
        cfg = ExperimentConfig.from_dict(
            {"benchmark": "hartmann6", "algo": "hipe", "mode": "bo", "q": 8, "batches": 5}
        )
        assert (cfg.q, cfg.batches) == (8, 5)

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            make_cfg(algo="gradient-descent")
        with pytest.raises(ConfigError):
            make_cfg(mode="bo", batches=1)
        with pytest.raises(ConfigError):
            make_cfg(beta=-2.0)
        with pytest.raises(ConfigError):
            make_cfg(nll_variant="profile")


class TestEvaluateModel:
    def test_constant_prediction_rmse_is_target_sd(self):
        model = constant_model()
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(500, 2))
        f = rng.normal(size=500)
        f -= f.mean()
        metrics = evaluate_model(model, X, f)
        assert metrics["rmse"] == pytest.approx(f.std(), abs=1e-9)

    def test_nll_matches_direct_mixture_density(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(10, 1))
        y = rng.normal(size=10)
        model = FullyBayesianGP(burn_in=16, draws=16, thin=8, random_state=0).fit(X, y)
        Xt = rng.uniform(size=(6, 1))
        f = rng.normal(size=6)
        metrics = evaluate_model(model, Xt, f)
        means, variances = model.predictive_components(Xt)
        dens = np.mean(norm.pdf(f[None, :], means, np.sqrt(variances)), axis=0)
        assert metrics["nll"] == pytest.approx(-np.mean(np.log(dens)), abs=1e-10)

    def test_interpolation_limit_small_rmse(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(40, 1))
        f = np.sin(4 * X[:, 0])
        model = FullyBayesianGP(burn_in=32, draws=32, thin=8, random_state=1).fit(X, f)
        metrics = evaluate_model(model, X, f)
        assert metrics["rmse"] < 1e-3


class TestInferredMaximizer:
    def test_constant_posterior_returns_center(self):
        model = constant_model(dim=2)
        point = inferred_maximizer(model, OptimizerConfig(restarts=1, raw_samples=8, seed=0))
        np.testing.assert_array_equal(point, [0.5, 0.5])

    def test_single_high_observation_attracts_maximizer(self):
        model = FullyBayesianGP(burn_in=24, draws=24, thin=8, random_state=3)
        X = np.array([[0.3, 0.7]])
        model.fit(X, np.array([5.0]))
        point = inferred_maximizer(model, OptimizerConfig(restarts=2, raw_samples=32, seed=0))
        median_ls = np.median(
            [h.lengthscales for h in model.ensemble_.samples], axis=0
        )
        assert np.linalg.norm(point - X[0]) < 2 * np.linalg.norm(median_ls)

    def test_quadratic_bump_recovered(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(size=(20, 1))
        true_argmax = 0.62
        f = -(X[:, 0] - true_argmax) ** 2
        model = FullyBayesianGP(burn_in=48, draws=48, thin=8, random_state=5).fit(X, f)
        point = inferred_maximizer(model, OptimizerConfig(restarts=4, raw_samples=64, seed=1))
        # dense-grid oracle for the true argmax of the target
        grid = np.linspace(0, 1, 2001)
        oracle = grid[np.argmax(-((grid - true_argmax) ** 2))]
        assert abs(point[0] - oracle) < 0.02


class TestImprovementUtility:
    def test_dominated_batch_scores_far_below_promising_batch(self):
        rng = np.random.default_rng(6)
        X = np.vstack([rng.uniform(0.0, 0.4, size=(8, 1)), [[0.9]]])
        y = np.concatenate([np.zeros(8), [3.0]])  # clear max near 0.9
        model = FullyBayesianGP(burn_in=24, draws=48, thin=8, random_state=7).fit(X, y)
        util = ImprovementUtility(model, q=2, n_draws=64, seed=0)
        bad = np.array([[0.1], [0.2]])       # well-observed, low mean
        good = np.array([[0.85], [0.95]])    # near the observed max
        assert util(good) > util(bad) + 3.0

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(size=(5, 2))
        model = FullyBayesianGP(burn_in=16, draws=16, thin=8, random_state=0).fit(
            X, rng.normal(size=5)
        )
        util = ImprovementUtility(model, q=2, n_draws=32, seed=1)
        batch = rng.uniform(size=(2, 2))
        assert util(batch) == util(batch)

    def test_requires_observations(self):
        model = FullyBayesianGP(burn_in=16, draws=16, thin=8).fit(
            np.empty((0, 2)), np.empty(0)
        )
        with pytest.raises(ValueError):
            ImprovementUtility(model, q=2)


class TestRunRecords:
    def test_single_sobol_batch_passthrough(self):
        cfg = make_cfg(algo="sobol", batches=1)
        rec = run_active_learning(cfg, seed=3)
        expected = sobol_design(
            DesignRequest(q=3, dim=6, seed=derive_seed(3, _STAGE_DESIGN, 0), include_center=True)
        )
        np.testing.assert_array_equal(np.array(rec.batches[0]["design"]), expected)
        assert rec.status == "ok"
        assert set(rec.batches[0]["metrics"]) == {
            "rmse", "nll", "inferred_value", "in_sample_best",
        }

    def test_deterministic_apart_from_timings(self):
        cfg = make_cfg(algo="nipv", batches=2, q=2)
        a = run_active_learning(cfg, seed=1).to_dict()
        b = run_active_learning(cfg, seed=1).to_dict()
        a.pop("timings")
        b.pop("timings")
        assert a == b

    def test_two_shot_has_bo_phase_timing(self):
        cfg = make_cfg(mode="bo", algo="random", batches=2, q=2)
        rec = run_two_shot(cfg, seed=0)
        assert rec.timings["bo_opt"] > 0.0
        assert rec.timings["fit_initial"] == 0.0  # design methods need no prior fit
        assert len(rec.batches) == 2

    def test_acquisition_records_initial_fit(self):
        cfg = make_cfg(algo="nipv", batches=1, q=2)
        rec = run_active_learning(cfg, seed=0)
        assert rec.timings["fit_initial"] > 0.0
        assert rec.timings["bo_opt"] == 0.0
        assert set(rec.timings) == {"fit_initial", "acq_opt", "fit_bo", "bo_opt"}

    def test_failure_isolation(self, monkeypatch):
        import hipe.experiment as exp

        original = exp._fit_model

        def flaky(cfg, X, y, seed, batch_index):
            if seed == 1:
                raise RuntimeError("chain exploded")
            return original(cfg, X, y, seed, batch_index)

        monkeypatch.setattr(exp, "_fit_model", flaky)
        cfg = make_cfg(algo="sobol", seeds=[0, 1, 2])
        records, n_failed = run_experiment(cfg)
        assert n_failed == 1
        assert [r.status for r in records] == ["ok", "failed", "ok"]
        assert "chain exploded" in records[1].error
        assert records[0].batches and not records[1].batches


class TestOutputs:
    def test_csv_schema_and_json_records(self, tmp_path):
        cfg = make_cfg(seeds=[0, 1], out_dir=str(tmp_path))
        records, _ = run_experiment(cfg)
        csv_path = write_outputs(records, tmp_path)
        lines = csv_path.read_text(encoding="utf-8").split("\n")
        assert lines[0] == "seed,algo,benchmark,batch_index,metric,value"
        assert len([l for l in lines[1:] if l]) == 2 * 4  # 2 seeds x 4 metrics
        payload = json.loads((tmp_path / "run_0.json").read_text())
        assert payload["schema_version"] == 1
        assert payload["status"] == "ok"
        assert set(payload["timings"]) == {"fit_initial", "acq_opt", "fit_bo", "bo_opt"}

    def test_rewrites_are_byte_identical(self, tmp_path):
        cfg = make_cfg(seeds=[0])
        records, _ = run_experiment(cfg)
        p1 = write_outputs(records, tmp_path / "a")
        records2, _ = run_experiment(cfg)
        p2 = write_outputs(records2, tmp_path / "b")
        assert p1.read_bytes() == p2.read_bytes()

    def test_failed_seed_not_in_csv_but_in_json(self, tmp_path):
        rec = RunRecord(
            schema_version=1, seed=9, algo="sobol", benchmark="hartmann6",
            mode="al", config={}, status="failed", error="boom",
        )
        csv_path = write_outputs([rec], tmp_path)
        assert csv_path.read_text().strip() == "seed,algo,benchmark,batch_index,metric,value"
        assert json.loads((tmp_path / "run_9.json").read_text())["error"] == "boom"


class TestComputeRankings:
    def test_dominant_algo_gets_rank_one(self):
        rows = []
        for seed in range(3):
            rows.append(dict(benchmark="b", seed=seed, batch_index=0, algo="A", value=1.0))
            rows.append(dict(benchmark="b", seed=seed, batch_index=0, algo="B", value=2.0))
        ranks = compute_rankings(rows, higher_is_better=False)
        assert ranks["A"][0] == 1.0
        assert ranks["B"][0] == 2.0

    def test_all_equal_share_mid_rank(self):
        rows = [
            dict(benchmark="b", seed=0, batch_index=0, algo=a, value=5.0)
            for a in ("A", "B", "C")
        ]
        ranks = compute_rankings(rows, higher_is_better=True)
        assert all(ranks[a][0] == 2.0 for a in ("A", "B", "C"))

    def test_fractional_ranking_matches_hand_computation(self):
        # 2 benchmarks x 2 seeds, 3 algos, higher is better
        table = {
            ("b1", 0): {"A": 3.0, "B": 2.0, "C": 1.0},   # ranks A1 B2 C3
            ("b1", 1): {"A": 2.0, "B": 2.0, "C": 1.0},   # ranks A1.5 B1.5 C3
            ("b2", 0): {"A": 1.0, "B": 5.0, "C": 5.0},   # ranks A3 B1.5 C1.5
            ("b2", 1): {"A": 1.0, "B": 1.0, "C": 1.0},   # all tie at 2
        }
        rows = [
            dict(benchmark=bench, seed=seed, batch_index=0, algo=algo, value=v)
            for (bench, seed), cell in table.items()
            for algo, v in cell.items()
        ]
        ranks = compute_rankings(rows, higher_is_better=True)
        assert ranks["A"][0] == pytest.approx((1 + 1.5 + 3 + 2) / 4)
        assert ranks["B"][0] == pytest.approx((2 + 1.5 + 1.5 + 2) / 4)
        assert ranks["C"][0] == pytest.approx((3 + 3 + 1.5 + 2) / 4)

    def test_missing_cell_excluded_with_warning(self):
        rows = [
            dict(benchmark="b", seed=0, batch_index=0, algo="A", value=1.0),
            dict(benchmark="b", seed=0, batch_index=0, algo="B", value=2.0),
            dict(benchmark="b", seed=1, batch_index=0, algo="A", value=1.0),
        ]
        with pytest.warns(RuntimeWarning, match="missing"):
            ranks = compute_rankings(rows, higher_is_better=False)
        assert ranks["A"][0] == 1.0
