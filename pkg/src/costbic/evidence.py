"""Per-model evidence scores and posterior odds.

Scores are on the ``-2 log`` scale, so smaller is better and
``log PO_kl = -(score_k - score_l) / 2``. Two methods are provided:

``laplace``
    ``-2 loglik(mode) + phi(gamma) - 2 log f(gamma)`` with the full
    normalized cost prior.
``bic``
    ``-2 loglik(mle) + (1 + C_gamma / c0) log n``, the cost-adjusted BIC.
    With equal costs this is exactly classical BIC, ``d_gamma log n``.

Models whose design is rank deficient (or, for ``bic``, whose MLE diverges)
are excluded: their score is ``+inf`` and their posterior probability zero.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import glm
from .dataset import Dataset
from .glm import FitResult, RankDeficientError
from .model_space import ModelIndicator, dimension, total_cost
from .priors import CostPriorSpec, cost_penalty, log_model_prior

log = logging.getLogger(__name__)

Method = Literal["laplace", "bic"]
METHODS = ("laplace", "bic")


class NotConvergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelScore:
    model: ModelIndicator
    method: Method
    loglik: float
    phi: float | None
    log_prior: float
    score: float
    cost: float
    dimension: int
    excluded: bool = False
    reason: str = ""

    @property
    def log_evidence(self) -> float:
        """``-score / 2``: approximate log posterior up to a shared constant."""
        return -0.5 * self.score


def psi_matrix(gamma: ModelIndicator, fit: FitResult, d: Dataset) -> np.ndarray:
    """Posterior precision at the mode, ``X_g' diag{w_i + 1/(4n)} X_g``.

    This is the inverse of the Laplace covariance ``Psi_gamma``.
    """
    if fit.kind != "posterior_mode" or not fit.converged:
        raise NotConvergedError("psi_matrix needs a converged posterior-mode fit")
    Xg = d.design(gamma)
    eta = Xg @ fit.beta
    e = np.exp(-np.abs(eta))
    w = e / (1.0 + e) ** 2  # exp(eta) / (1 + exp(eta))^2, symmetric in eta
    return Xg.T @ ((w + 1.0 / (4.0 * d.n))[:, None] * Xg)


def phi(gamma: ModelIndicator, fit: FitResult, d: Dataset) -> float:
    """Laplace penalty ``phi(gamma)`` on ``-2`` times the log-likelihood at the mode."""
    Xg = d.design(gamma)
    G = glm.gram(Xg)
    precision = psi_matrix(gamma, fit, d)
    quad = float(fit.beta @ G @ fit.beta) / (4.0 * d.n)
    k = Xg.shape[1]
    return quad + k * math.log(4.0 * d.n) + glm.logdet_spd(precision) - glm.logdet_spd(G)


def laplace_log_marginal(gamma: ModelIndicator, d: Dataset, fit: FitResult | None = None) -> float:
    """Laplace approximation of ``log f(y | gamma)``: ``loglik(mode) - phi / 2``."""
    fit = fit or glm.posterior_mode(gamma, d)
    return glm.log_likelihood(gamma, fit.beta, d) - 0.5 * phi(gamma, fit, d)


def _excluded(gamma, method, spec, reason) -> ModelScore:
    log.warning("excluding model %s: %s", gamma, reason)
    return ModelScore(
        model=gamma,
        method=method,
        loglik=math.nan,
        phi=None,
        log_prior=log_model_prior(gamma, spec),
        score=math.inf,
        cost=total_cost(gamma, spec.costs),
        dimension=dimension(gamma),
        excluded=True,
        reason=reason,
    )


def score(gamma: ModelIndicator, d: Dataset, spec: CostPriorSpec, method: Method = "laplace") -> ModelScore:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    lp = log_model_prior(gamma, spec)
    try:
        if method == "laplace":
            fit = glm.posterior_mode(gamma, d)
            if not fit.converged:
                return _excluded(gamma, method, spec, "posterior mode did not converge")
            ll = glm.log_likelihood(gamma, fit.beta, d)
            ph = phi(gamma, fit, d)
            value = -2.0 * ll + ph - 2.0 * lp
        else:
            fit = glm.mle(gamma, d)
            if not fit.converged:
                return _excluded(gamma, method, spec, "maximum likelihood estimate diverged")
            ll = fit.objective
            ph = None
            value = -2.0 * ll + math.log(d.n) + cost_penalty(gamma, spec)
    except RankDeficientError:
        return _excluded(gamma, method, spec, "rank-deficient design")
    return ModelScore(
        model=gamma,
        method=method,
        loglik=ll,
        phi=ph,
        log_prior=lp,
        score=value,
        cost=total_cost(gamma, spec.costs),
        dimension=dimension(gamma),
    )


def log_odds_from_scores(score_k: float, score_l: float) -> float:
    """``log PO_kl``; ``+/-inf`` only when a model is excluded."""
    if math.isinf(score_k) and math.isinf(score_l):
        raise ValueError("both models are excluded; their odds are undefined")
    if math.isinf(score_k):
        return -math.inf
    if math.isinf(score_l):
        return math.inf
    return -0.5 * (score_k - score_l)


class Scorer:
    """Memoized :func:`score` for one dataset and prior.

    The cache is keyed by ``(m(gamma), method)``; values depend only on the
    key, so concurrent inserts are idempotent.
    """

    def __init__(self, d: Dataset, spec: CostPriorSpec):
        if spec.p != d.p:
            raise ValueError(f"prior over p={spec.p}, dataset has p={d.p}")
        self.d = d
        self.spec = spec
        self._cache: dict[tuple[int, str], ModelScore] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._cache)

    def score(self, gamma: ModelIndicator, method: Method = "laplace") -> ModelScore:
        key = (gamma.code, method)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = score(gamma, self.d, self.spec, method)
        with self._lock:
            return self._cache.setdefault(key, value)

    def score_code(self, code: int, method: Method = "laplace") -> float:
        hit = self._cache.get((code, method))
        if hit is not None:
            return hit.score
        return self.score(ModelIndicator(self.d.p, code), method).score

    def log_posterior_odds(self, gamma_k, gamma_l, method: Method = "laplace") -> float:
        return log_odds_from_scores(self.score(gamma_k, method).score, self.score(gamma_l, method).score)


def log_posterior_odds(gamma_k, gamma_l, d: Dataset, spec: CostPriorSpec, method: Method = "laplace") -> float:
    return log_odds_from_scores(score(gamma_k, d, spec, method).score, score(gamma_l, d, spec, method).score)


def posterior_odds(gamma_k, gamma_l, d: Dataset, spec: CostPriorSpec, method: Method = "laplace") -> float:
    """``PO_kl``, exponentiated from :func:`log_posterior_odds`.

    Use the log form to tell an excluded model (``+/-inf``) from overflow.
    """
    lo = log_posterior_odds(gamma_k, gamma_l, d, spec, method)
    return math.exp(lo) if lo < 709.0 else math.inf
