"""Logistic-regression likelihood, unit-information prior and Newton fits.

The coefficient prior for model ``gamma`` is ``N(0, 4n (X_g' X_g)^{-1})``, the
unit-information prior evaluated at success probability 1/2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.special import expit

from .dataset import Dataset
from .model_space import ModelIndicator, dimension

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
MAX_ITER = 50
MAX_HALVINGS = 30
STEP_TOL = 1e-6
DIVERGENCE_BOUND = 30.0
LOG_2PI = math.log(2.0 * math.pi)


class RankDeficientError(np.linalg.LinAlgError):
    """The model's design matrix does not have full column rank."""


@dataclass
class FitResult:
    beta: np.ndarray
    objective: float
    neg_hessian: np.ndarray
    iterations: int
    converged: bool
    kind: Literal["mle", "posterior_mode"]
    grad_norm: float = math.nan


# -- likelihood pieces on the linear predictor ------------------------------

def loglik_from_eta(eta: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Bernoulli-logit log-likelihood, ``sum y*eta - log(1 + exp(eta))``."""
    terms = np.logaddexp(0.0, (1.0 - 2.0 * y) * eta)
    if weights is not None:
        terms = terms * weights
    return -float(terms.sum())


def pointwise_loglik(eta: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, (1.0 - 2.0 * y) * eta)


def bernoulli_weights(eta: np.ndarray) -> np.ndarray:
    """``p (1 - p)`` without cancellation in the tails."""
    return expit(eta) * expit(-eta)


def _check_beta(gamma: ModelIndicator, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (dimension(gamma),):
        raise ValueError(f"coefficient vector of shape {beta.shape} for a model of dimension {dimension(gamma)}")
    return beta


def log_likelihood(gamma: ModelIndicator, beta, d: Dataset) -> float:
    beta = _check_beta(gamma, beta)
    return loglik_from_eta(d.design(gamma) @ beta, d.y)


# -- unit-information prior ---------------------------------------------------

def gram(Xg: np.ndarray) -> np.ndarray:
    """``X_g' X_g``; raises :class:`RankDeficientError` if singular."""
    if np.linalg.matrix_rank(Xg) < Xg.shape[1]:
        raise RankDeficientError(f"design matrix with {Xg.shape[1]} columns is rank deficient")
    return Xg.T @ Xg


def logdet_spd(A: np.ndarray) -> float:
    """Log-determinant of a symmetric positive definite matrix via Cholesky."""
    L = np.linalg.cholesky(A)
    return 2.0 * float(np.log(np.diag(L)).sum())


def prior_log_normalizer(G: np.ndarray, n: int) -> float:
    """Log normalizing constant of ``N(0, 4n G^{-1})`` (value of the log density at 0)."""
    k = G.shape[0]
    return -0.5 * k * (LOG_2PI + math.log(4.0 * n)) + 0.5 * logdet_spd(G)


def log_coefficient_prior(gamma: ModelIndicator, beta, d: Dataset) -> float:
    beta = _check_beta(gamma, beta)
    G = gram(d.design(gamma))
    return prior_log_normalizer(G, d.n) - float(beta @ G @ beta) / (8.0 * d.n)


# -- objectives ---------------------------------------------------------------

def log_posterior_kernel(gamma: ModelIndicator, beta, d: Dataset) -> float:
    """``h(beta)``: log-likelihood plus log coefficient prior."""
    return log_likelihood(gamma, beta, d) + log_coefficient_prior(gamma, beta, d)


def loglik_derivatives(Xg, y, beta, weights=None):
    eta = Xg @ beta
    value = loglik_from_eta(eta, y, weights)
    resid = y - expit(eta)
    w = bernoulli_weights(eta)
    if weights is not None:
        resid = resid * weights
        w = w * weights
    grad = Xg.T @ resid
    neg_hess = (Xg * w[:, None]).T @ Xg
    return value, grad, neg_hess


def posterior_derivatives(Xg, y, G, n, beta, weights=None):
    """Value, gradient and negative Hessian of ``h`` at ``beta``.

    ``weights`` masks likelihood terms only; the prior always uses the full
    ``G`` and ``n``.
    """
    value, grad, neg_hess = loglik_derivatives(Xg, y, beta, weights)
    Gb = G @ beta
    value += prior_log_normalizer(G, n) - float(beta @ Gb) / (8.0 * n)
    grad = grad - Gb / (4.0 * n)
    neg_hess = neg_hess + G / (4.0 * n)
    return value, grad, neg_hess


def posterior_gradient(gamma: ModelIndicator, beta, d: Dataset) -> np.ndarray:
    beta = _check_beta(gamma, beta)
    Xg = d.design(gamma)
    return posterior_derivatives(Xg, d.y, gram(Xg), d.n, beta)[1]


def posterior_neg_hessian(gamma: ModelIndicator, beta, d: Dataset) -> np.ndarray:
    beta = _check_beta(gamma, beta)
    Xg = d.design(gamma)
    return posterior_derivatives(Xg, d.y, gram(Xg), d.n, beta)[2]


# -- Newton -------------------------------------------------------------------

def newton_maximize(
    fgh: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    beta0: np.ndarray,
    *,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    max_halvings: int = MAX_HALVINGS,
    divergence_bound: float | None = None,
):
    """Damped Newton ascent; returns ``(beta, value, neg_hess, iters, converged, grad_norm)``.

    Converged means gradient max-norm below ``tol`` with a Newton step below
    ``STEP_TOL``. A step is halved until the objective increases.
    Non-convergence is reported when the iteration cap is hit, no halving
    improves the objective, or ``max|beta|`` exceeds ``divergence_bound``.
    """
    beta = np.array(beta0, dtype=float)
    value, grad, neg_hess = fgh(beta)
    for it in range(max_iter + 1):
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        try:
            step = np.linalg.solve(neg_hess, grad)
        except np.linalg.LinAlgError:
            break
        # A vanishing gradient alone is not enough: under separation the
        # likelihood flattens while the Newton step stays large.
        if gnorm < tol and (not step.size or np.max(np.abs(step)) < STEP_TOL):
            return beta, value, neg_hess, it, True, gnorm
        if it == max_iter:
            break
        # Near the optimum the increase can drop below rounding of the value;
        # a step within that slack is taken if it shrinks the gradient.
        slack = 1e-13 * max(1.0, abs(value))
        t = 1.0
        for _ in range(max_halvings + 1):
            cand = beta + t * step
            c_value, c_grad, c_hess = fgh(cand)
            if c_value > value:
                break
            if c_value >= value - slack and np.max(np.abs(c_grad)) < gnorm:
                break
            t *= 0.5
        else:
            break
        beta, value, grad, neg_hess = cand, c_value, c_grad, c_hess
        if divergence_bound is not None and np.max(np.abs(beta)) > divergence_bound:
            break
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    return beta, value, neg_hess, it, False, gnorm


def mle(gamma: ModelIndicator, d: Dataset) -> FitResult:
    """Maximum likelihood fit; ``converged=False`` under (quasi-)separation."""
    Xg = d.design(gamma)
    gram(Xg)
    beta, value, H, it, ok, gnorm = newton_maximize(
        lambda b: loglik_derivatives(Xg, d.y, b),
        np.zeros(Xg.shape[1]),
        divergence_bound=DIVERGENCE_BOUND,
    )
    if not ok:
        log.debug("MLE did not converge for model %s (max|beta|=%.3g)", gamma, np.max(np.abs(beta)))
    return FitResult(beta, value, H, it, ok, "mle", gnorm)


def fit_posterior_mode(Xg, y, G, n, weights=None) -> FitResult:
    beta, value, H, it, ok, gnorm = newton_maximize(
        lambda b: posterior_derivatives(Xg, y, G, n, b, weights),
        np.zeros(Xg.shape[1]),
    )
    return FitResult(beta, value, H, it, ok, "posterior_mode", gnorm)


def posterior_mode(gamma: ModelIndicator, d: Dataset) -> FitResult:
    """Mode of ``h``; the negative Hessian is ``X_g' diag(w + 1/(4n)) X_g``."""
    Xg = d.design(gamma)
    return fit_posterior_mode(Xg, d.y, gram(Xg), d.n)
