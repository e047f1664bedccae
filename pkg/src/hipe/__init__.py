"""Information-theoretic initialization for few-shot, large-batch Bayesian optimization.

The package couples a fully Bayesian Gaussian-process surrogate (slice-sampled
hyperparameter ensembles) with acquisition functions that jointly target
predictive-uncertainty reduction and hyperparameter learning, plus the
space-filling baselines, synthetic benchmarks, and a seeded experiment harness
for active-learning and two-shot Bayesian-optimization studies.
"""

from .gp import (
    Dataset,
    HyperSample,
    PosteriorGaussian,
    fantasy_variance,
    gaussian_entropy,
    kernel_matrix,
    log_marginal_likelihood,
    posterior,
)
from .inference import HyperEnsemble, HyperPriorSpec, McmcSchedule, log_prior, sample_ensemble
from .model import FullyBayesianGP
from .acquisition import (
    AcqContext,
    bald,
    epig,
    estimate_beta,
    hipe,
    joint_eig_oracle,
    make_acquisition,
    make_context,
    nipv,
)
from .designs import (
    DesignRequest,
    lhs_beta_design,
    lhs_design,
    random_design,
    sobol_design,
)
from .optimize import OptimizerConfig, optimize_batch, raw_candidates
from .benchmarks import Benchmark, get_benchmark, registry

__version__ = "0.1.0"

__all__ = [
    "AcqContext",
    "Benchmark",
    "Dataset",
    "DesignRequest",
    "FullyBayesianGP",
    "HyperEnsemble",
    "HyperPriorSpec",
    "HyperSample",
    "McmcSchedule",
    "OptimizerConfig",
    "PosteriorGaussian",
    "bald",
    "epig",
    "estimate_beta",
    "fantasy_variance",
    "gaussian_entropy",
    "get_benchmark",
    "hipe",
    "joint_eig_oracle",
    "kernel_matrix",
    "lhs_beta_design",
    "lhs_design",
    "log_marginal_likelihood",
    "log_prior",
    "make_acquisition",
    "make_context",
    "nipv",
    "optimize_batch",
    "posterior",
    "random_design",
    "raw_candidates",
    "registry",
    "sample_ensemble",
    "sobol_design",
]
