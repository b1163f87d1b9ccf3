"""Ground truth for small problems: exhaustive enumeration and quadrature."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from . import glm
from .dataset import Dataset
from .evidence import Method, ModelScore, Scorer
from .model_space import MAX_ENUMERATION_P, ModelIndicator
from .priors import CostPriorSpec


@dataclass(frozen=True)
class TableRow:
    model: ModelIndicator
    score: float
    probability: float
    cost: float
    dimension: int
    excluded: bool = False


@dataclass
class PosteriorTable:
    """Normalized posterior over an enumerated model set, most probable first."""

    rows: list[TableRow]
    method: str
    log_normalizer: float
    names: tuple[str, ...] = ()
    costs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def p(self) -> int:
        return self.rows[0].model.p

    def __len__(self) -> int:
        return len(self.rows)

    def probabilities(self) -> dict[int, float]:
        return {r.model.code: r.probability for r in self.rows}

    def probability_of(self, gamma: ModelIndicator) -> float:
        return self.probabilities().get(gamma.code, 0.0)

    @property
    def best(self) -> TableRow:
        return self.rows[0]

    def top(self, k: int) -> list[TableRow]:
        return self.rows[:k]

    def notation(self, gamma: ModelIndicator) -> str:
        return gamma.notation(self.names or None)

    def to_csv(self, fh=None) -> str:
        """Write ``model,dim,cost,score,prob,cum_prob`` rows (17 significant digits)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "dim", "cost", "score", "prob", "cum_prob", "excluded"])
        cum = 0.0
        for r in self.rows:
            cum += r.probability
            w.writerow([
                self.notation(r.model), r.dimension, f"{r.cost:.17g}", f"{r.score:.17g}",
                f"{r.probability:.17g}", f"{cum:.17g}", int(r.excluded),
            ])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def table_from_scores(scores: Sequence[ModelScore], method: str, names=(), costs=None) -> PosteriorTable:
    """Normalize ``-score/2`` with a max-shifted log-sum-exp."""
    scores = sorted(scores, key=lambda s: s.model.code)
    log_w = np.array([-0.5 * s.score for s in scores])
    finite = np.isfinite(log_w)
    if not finite.any():
        raise ValueError("every model is excluded")
    log_z = float(logsumexp(log_w[finite]))
    probs = np.where(finite, np.exp(log_w - log_z), 0.0)
    rows = [
        TableRow(s.model, s.score, float(pr), s.cost, s.dimension, s.excluded)
        for s, pr in zip(scores, probs)
    ]
    rows.sort(key=lambda r: (-r.probability, r.model.code))
    return PosteriorTable(
        rows=rows,
        method=method,
        log_normalizer=log_z,
        names=tuple(names),
        costs=np.zeros(0) if costs is None else np.asarray(costs, dtype=float),
    )


def enumerate_posterior(
    d: Dataset,
    spec: CostPriorSpec,
    method: Method = "laplace",
    *,
    scorer: Scorer | None = None,
    workers: int = 1,
) -> PosteriorTable:
    """Score all ``2**p`` models and normalize.

    The result does not depend on ``workers``: rows are reduced in encoding
    order before normalization.
    """
    if d.p > MAX_ENUMERATION_P:
        raise ValueError(f"enumeration limited to p <= {MAX_ENUMERATION_P}, got p={d.p}")
    scorer = scorer or Scorer(d, spec)
    codes = range(1 << d.p)

    def run(chunk):
        return [scorer.score(ModelIndicator(d.p, c), method) for c in chunk]

    if workers > 1:
        step = math.ceil(len(codes) / workers)
        chunks = [codes[i:i + step] for i in range(0, len(codes), step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = [s for part in pool.map(run, chunks) for s in part]
    else:
        scores = run(codes)
    return table_from_scores(scores, method, d.names, d.costs)


def marginal_inclusion_from_table(t: PosteriorTable) -> np.ndarray:
    """``P(gamma_j = 1 | y)`` for each predictor."""
    out = np.zeros(t.p)
    for r in t.rows:
        if r.probability:
            out += r.probability * r.model.bits
    return np.clip(out, 0.0, 1.0)


# -- quadrature -------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    nodes: int


def _grid_log_integral(log_f, center, chol, nodes, half_width, chunk=8192) -> float:
    """Trapezoid rule for ``log int exp(log_f(b)) db`` on ``b = center + chol @ z``."""
    k = center.size
    z = np.linspace(-half_width, half_width, nodes)
    h = z[1] - z[0]
    w1 = np.full(nodes, h)
    w1[[0, -1]] *= 0.5
    log_w1 = np.log(w1)
    grids = np.meshgrid(*([z] * k), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    W = sum(np.meshgrid(*([log_w1] * k), indexing="ij")).ravel()
    parts = []
    for start in range(0, Z.shape[0], chunk):
        B = center + Z[start:start + chunk] @ chol.T
        parts.append(logsumexp(log_f(B) + W[start:start + chunk]))
    logdet_jac = float(np.log(np.abs(np.diag(chol))).sum())
    return float(logsumexp(parts)) + logdet_jac


def quadrature_log_marginal(
    gamma: ModelIndicator,
    d: Dataset,
    *,
    nodes: int = 201,
    half_width: float = 8.0,
    tol: float = 1e-4,
    max_nodes: int = 1601,
    loglik_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    center: np.ndarray | None = None,
    covariance: np.ndarray | None = None,
) -> QuadratureResult:
    """``log f(y | gamma)`` by tensor-grid quadrature of ``exp(h(beta))``.

    The grid is laid out in the coordinates that whiten the Laplace
    approximation (``beta = mode + chol(Psi) z``), spanning ``half_width``
    standard deviations per axis. The pitch is halved until the result moves
    by less than ``tol``; the last change is returned as the error estimate.

    ``loglik_fn`` maps an ``(m, d_gamma)`` array of coefficient vectors to
    log-likelihood values and replaces the logistic likelihood (a test hook);
    ``center`` and ``covariance`` then locate the grid.
    """
    Xg = d.design(gamma)
    k = Xg.shape[1]
    if k > 3:
        raise ValueError(f"quadrature supports models of dimension <= 3, got {k}")
    G = glm.gram(Xg)
    log_norm = glm.prior_log_normalizer(G, d.n)

    if center is None or covariance is None:
        fit = glm.posterior_mode(gamma, d)
        if not fit.converged:
            raise np.linalg.LinAlgError("posterior mode did not converge")
        center = fit.beta if center is None else center
        covariance = np.linalg.inv(fit.neg_hessian) if covariance is None else covariance
    center = np.asarray(center, dtype=float)
    chol = np.linalg.cholesky(np.asarray(covariance, dtype=float))

    def log_f(B):
        quad = np.einsum("ij,jk,ik->i", B, G, B)
        prior = log_norm - quad / (8.0 * d.n)
        if loglik_fn is not None:
            return np.asarray(loglik_fn(B), dtype=float) + prior
        eta = B @ Xg.T
        return -np.logaddexp(0.0, (1.0 - 2.0 * d.y) * eta).sum(axis=1) + prior

    value = _grid_log_integral(log_f, center, chol, nodes, half_width)
    error = math.inf
    while nodes < max_nodes:
        nodes = 2 * nodes - 1
        finer = _grid_log_integral(log_f, center, chol, nodes, half_width)
        error, value = abs(finer - value), finer
        if error < tol:
            break
    return QuadratureResult(value, error, nodes)
