"""Cost-aware Bayesian variable selection for logistic regression."""

__version__ = "0.1.0"

from .dataset import Dataset, DatasetError, SyntheticSpec, load_dataset, synthesize, write_dataset
from .diagnostics import cv_log_score_exact, cv_log_score_mcmc, deviance, posterior_deviance
from .evidence import ModelScore, Scorer, log_posterior_odds, posterior_odds, score
from .model_space import ModelIndicator, parse_notation
from .oracle import PosteriorTable, enumerate_posterior, quadrature_log_marginal
from .priors import CostPriorSpec, log_model_prior
from .samplers import SamplerConfig, run_sampler, sample_coefficients, two_stage_search

__all__ = [
    "CostPriorSpec",
    "Dataset",
    "DatasetError",
    "ModelIndicator",
    "ModelScore",
    "PosteriorTable",
    "SamplerConfig",
    "Scorer",
    "SyntheticSpec",
    "cv_log_score_exact",
    "cv_log_score_mcmc",
    "deviance",
    "enumerate_posterior",
    "load_dataset",
    "log_model_prior",
    "log_posterior_odds",
    "parse_notation",
    "posterior_deviance",
    "posterior_odds",
    "quadrature_log_marginal",
    "run_sampler",
    "sample_coefficients",
    "score",
    "synthesize",
    "two_stage_search",
    "write_dataset",
]
