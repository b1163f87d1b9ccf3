"""Fit and predictive diagnostics: deviance and cross-validation log scores."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import glm
from .dataset import Dataset
from .model_space import ModelIndicator
from .samplers import CoefficientDraws, sample_coefficients

log = logging.getLogger(__name__)

EXACT_LOO_MAX_N = 500
DENSITY_FLOOR = 1e-300
GH_NODES = 64


def deviance(gamma: ModelIndicator, beta, d: Dataset) -> float:
    """``-2`` times the log-likelihood."""
    return -2.0 * glm.log_likelihood(gamma, beta, d)


def _pointwise_loglik(Xg, y, B, chunk=2048) -> np.ndarray:
    """Log-likelihood contributions, shape ``(draws, n)``."""
    out = np.empty((B.shape[0], Xg.shape[0]))
    sign = 1.0 - 2.0 * y
    for s in range(0, B.shape[0], chunk):
        out[s:s + chunk] = -np.logaddexp(0.0, sign * (B[s:s + chunk] @ Xg.T))
    return out


@dataclass
class DevianceSummary:
    gamma: ModelIndicator
    minimum: float
    median: float
    mean: float
    maximum: float
    size: int
    mle_deviance: float
    settings: dict = field(default_factory=dict)


def posterior_deviance(
    gamma: ModelIndicator,
    d: Dataset,
    draws: int = 10_000,
    seed: int | None = 0,
    *,
    burn_in: int = 2_000,
    thin: int = 1,
    samples: CoefficientDraws | None = None,
) -> DevianceSummary:
    """Summaries of the deviance over within-model posterior draws."""
    samples = samples or sample_coefficients(gamma, d, draws, burn_in=burn_in, thin=thin, seed=seed)
    dev = -2.0 * _pointwise_loglik(d.design(gamma), d.y, samples.beta).sum(axis=1)
    fit = glm.mle(gamma, d)
    mle_dev = -2.0 * fit.objective if fit.converged else math.nan
    return DevianceSummary(
        gamma=gamma,
        minimum=float(dev.min()),
        median=float(np.median(dev)),
        mean=float(dev.mean()),
        maximum=float(dev.max()),
        size=int(dev.size),
        mle_deviance=mle_dev,
        settings={
            "draws": samples.beta.shape[0],
            "burn_in": samples.burn_in,
            "thin": samples.thin,
            "seed": samples.seed,
            "acceptance_rate": samples.acceptance_rate,
        },
    )


def cv_log_score_exact(gamma: ModelIndicator, d: Dataset) -> float:
    """Leave-one-out log score from ``n`` posterior-mode refits.

    For each ``i`` the posterior without observation ``i`` (prior unchanged)
    is approximated by a Gaussian at its mode, and the predictive probability
    of ``y_i`` is integrated over the implied normal on the linear predictor
    with 64-node Gauss-Hermite quadrature.
    """
    if d.n > EXACT_LOO_MAX_N:
        raise ValueError(f"exact leave-one-out limited to n <= {EXACT_LOO_MAX_N}, got n={d.n}")
    Xg = d.design(gamma)
    G = glm.gram(Xg)
    nodes, weights = np.polynomial.hermite.hermgauss(GH_NODES)
    log_w = np.log(weights) - 0.5 * math.log(math.pi)
    mask = np.ones(d.n)
    logs = np.empty(d.n)
    for i in range(d.n):
        mask[i] = 0.0
        fit = glm.fit_posterior_mode(Xg, d.y, G, d.n, weights=mask)
        mask[i] = 1.0
        if not fit.converged:
            raise np.linalg.LinAlgError(f"leave-one-out refit {i} did not converge")
        x = Xg[i]
        m = float(x @ fit.beta)
        v = float(x @ np.linalg.solve(fit.neg_hessian, x))
        eta = m + math.sqrt(2.0 * v) * nodes
        ll = -np.logaddexp(0.0, (1.0 - 2.0 * d.y[i]) * eta)
        logs[i] = logsumexp(ll + log_w)
    return math.fsum(logs) / d.n


@dataclass
class LogScoreEstimate:
    value: float
    jackknife_se: float
    n_floored: int
    unreliable: bool
    draws: int

    def __float__(self) -> float:
        return self.value


def cv_log_score_from_draws(gamma: ModelIndicator, d: Dataset, beta_draws, batches: int = 20) -> LogScoreEstimate:
    """Inverse-density (harmonic mean) log score from posterior coefficient draws.

    Per-observation densities are floored at 1e-300; an observation whose
    every draw was floored marks the estimate unreliable. The standard error
    is a delete-one-batch jackknife over ``batches`` contiguous draw blocks.
    """
    B = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    T = B.shape[0]
    lf = _pointwise_loglik(d.design(gamma), d.y, B)
    floor = math.log(DENSITY_FLOOR)
    floored = lf < floor
    n_floored = int(floored.sum())
    unreliable = bool(floored.all(axis=0).any())
    if n_floored:
        log.warning("%d predictive densities floored at %g", n_floored, DENSITY_FLOOR)
    neg = -np.maximum(lf, floor)  # log of 1/f
    per_obs = logsumexp(neg, axis=0) - math.log(T)
    value = -math.fsum(per_obs) / d.n

    se = math.nan
    nb = min(batches, T)
    if nb >= 2:
        shift = neg.max(axis=0)
        scaled = np.exp(neg - shift)
        edges = np.linspace(0, T, nb + 1).astype(int)
        sums = np.array([scaled[a:b].sum(axis=0) for a, b in zip(edges[:-1], edges[1:])])
        total = sums.sum(axis=0)
        sizes = np.diff(edges)
        loo = np.array([
            -np.sum(shift + np.log((total - sums[b]) / (T - sizes[b]))) / d.n for b in range(nb)
        ])
        se = math.sqrt((nb - 1) / nb * np.sum((loo - loo.mean()) ** 2))
    return LogScoreEstimate(value, se, n_floored, unreliable, T)


def cv_log_score_mcmc(
    gamma: ModelIndicator,
    d: Dataset,
    draws: int = 10_000,
    seed: int | None = 0,
    *,
    burn_in: int = 2_000,
    thin: int = 1,
    samples: CoefficientDraws | None = None,
) -> LogScoreEstimate:
    """Log score estimated from a single within-model posterior run."""
    samples = samples or sample_coefficients(gamma, d, draws, burn_in=burn_in, thin=thin, seed=seed)
    return cv_log_score_from_draws(gamma, d, samples.beta)
