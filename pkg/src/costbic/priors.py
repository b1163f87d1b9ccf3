"""Cost-penalized prior on model space.

Each predictor enters independently with prior log-odds
``-(c_j / c0 - 1) * log(n) / 2`` where ``c0`` is the baseline (minimum) cost.
A predictor at the baseline cost therefore has inclusion probability 1/2, and
equal costs reduce the prior to the uniform distribution on models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .model_space import ModelIndicator

Mode = Literal["cost_benefit", "benefit_only"]
MODES = ("cost_benefit", "benefit_only")


@dataclass(frozen=True, eq=False)
class CostPriorSpec:
    """Costs, baseline cost and sample size defining the model prior.

    ``c0`` defaults to ``min(costs)``; it may be set lower (never higher), which
    keeps every extra penalty non-negative. In ``benefit_only`` mode every cost
    ratio is 1 regardless of the cost values.
    """

    costs: np.ndarray
    n: int
    mode: Mode = "cost_benefit"
    c0: float | None = None

    def __post_init__(self):
        costs = np.array(self.costs, dtype=float)
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if costs.ndim != 1 or np.any(~np.isfinite(costs)) or np.any(costs <= 0):
            raise ValueError("costs must be a vector of positive finite values")
        floor = float(costs.min()) if costs.size else math.inf
        c0 = floor if self.c0 is None else float(self.c0)
        if not math.isfinite(c0):
            c0 = 1.0  # no predictors; the baseline never enters
        if c0 <= 0 or c0 > floor:
            raise ValueError(f"baseline cost c0={c0} must satisfy 0 < c0 <= min cost {floor}")
        object.__setattr__(self, "c0", c0)

    @classmethod
    def from_dataset(cls, d, mode: Mode = "cost_benefit", c0: float | None = None):
        return cls(costs=d.costs, n=d.n, mode=mode, c0=c0)

    @property
    def p(self) -> int:
        return self.costs.size

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def ratios(self) -> np.ndarray:
        """Effective cost ratios ``c_j / c0`` (all ones in benefit-only mode)."""
        if self.mode == "benefit_only":
            return np.ones(self.p)
        return self.costs / self.c0

    def restrict(self, indices: Sequence[int]) -> "CostPriorSpec":
        """Prior over a subset of predictors, keeping the same baseline cost."""
        idx = [j - 1 for j in indices]
        return CostPriorSpec(costs=self.costs[idx], n=self.n, mode=self.mode, c0=self.c0)

    def to_dict(self) -> dict:
        return {
            "costs": [float(c) for c in self.costs],
            "n": int(self.n),
            "mode": self.mode,
            "c0": float(self.c0),
        }


def _check(gamma: ModelIndicator, spec: CostPriorSpec) -> None:
    if gamma.p != spec.p:
        raise ValueError(f"model over p={gamma.p}, prior over p={spec.p}")


def inclusion_log_odds(spec: CostPriorSpec) -> np.ndarray:
    """Per-variable prior log-odds of inclusion, ``-(kappa_j - 1) log(n) / 2``."""
    return -0.5 * (spec.ratios - 1.0) * spec.log_n


def inclusion_probabilities(spec: CostPriorSpec) -> np.ndarray:
    a = inclusion_log_odds(spec)
    return np.exp(a - np.logaddexp(0.0, a))


def log_model_prior(gamma: ModelIndicator, spec: CostPriorSpec) -> float:
    """Normalized log prior probability of ``gamma``.

    Sum over predictors of ``gamma_j * a_j - log(1 + exp(a_j))`` with
    ``a_j`` the inclusion log-odds. The intercept contributes nothing.
    """
    _check(gamma, spec)
    a = inclusion_log_odds(spec)
    return float(np.dot(gamma.bits, a) - np.logaddexp(0.0, a).sum())


def log_prior_odds(gamma_k: ModelIndicator, gamma_l: ModelIndicator, spec: CostPriorSpec) -> float:
    """``log f(gamma_k) - log f(gamma_l)``; normalizing terms cancel exactly."""
    _check(gamma_k, spec)
    _check(gamma_l, spec)
    delta = gamma_k.bits.astype(float) - gamma_l.bits
    return float(np.dot(delta, inclusion_log_odds(spec)))


def extra_penalty_xi(gamma_k: ModelIndicator, gamma_l: ModelIndicator, spec: CostPriorSpec) -> float:
    """Penalty the prior adds to ``-2 log B_kl``: ``[(C_k - C_l)/c0 - (d_k - d_l)] log n``."""
    return -2.0 * log_prior_odds(gamma_k, gamma_l, spec)


def cost_penalty(gamma: ModelIndicator, spec: CostPriorSpec) -> float:
    """Cost-adjusted BIC penalty ``C_gamma / c0 * log n`` (intercept excluded)."""
    _check(gamma, spec)
    return float(np.dot(gamma.bits, spec.ratios)) * spec.log_n


def omega_penalty(gamma_k: ModelIndicator, gamma_l: ModelIndicator, spec: CostPriorSpec) -> float:
    """Total penalty on the log-likelihood ratio, ``(C_k - C_l) / c0 * log n``.

    Equals the BIC dimension penalty ``(d_k - d_l) log n`` plus
    :func:`extra_penalty_xi`.
    """
    return cost_penalty(gamma_k, spec) - cost_penalty(gamma_l, spec)
