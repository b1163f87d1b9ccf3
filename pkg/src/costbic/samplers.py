"""Trans-dimensional MCMC over model space.

Three samplers share one interface:

* ``mc3_laplace`` / ``mc3_bic`` -- Metropolized single-flip chains on model
  indicators, accepting a flip with probability ``min(1, PO)`` where the
  posterior odds come from the Laplace or cost-adjusted BIC scores.
* ``rjmcmc`` -- a reversible-jump chain on ``(gamma, beta_gamma)``. A birth
  draws the new coefficient from a Gaussian pilot built from the Laplace
  approximation of the larger model; a death drops it. Coefficients are
  refreshed between model moves by random-walk Metropolis with covariance
  ``(2.38**2 / d) * inv(Psi_gamma)``.

One iteration is ``p`` flip proposals (a full sweep under systematic scan,
``p`` uniformly drawn indices under random scan). States are recorded once
per iteration after burn-in.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import glm
from .dataset import Dataset
from .evidence import Scorer
from .model_space import MAX_ENUMERATION_P, ModelIndicator
from .oracle import PosteriorTable, enumerate_posterior, marginal_inclusion_from_table
from .priors import CostPriorSpec, inclusion_log_odds

log = logging.getLogger(__name__)

SamplerMethod = Literal["mc3_laplace", "mc3_bic", "rjmcmc"]
SAMPLER_METHODS = ("mc3_laplace", "mc3_bic", "rjmcmc")
EVIDENCE_METHOD = {"mc3_laplace": "laplace", "mc3_bic": "bic", "rjmcmc": "laplace"}
DEFAULT_BUDGET = {"mc3_laplace": (11_000, 1_000), "mc3_bic": (11_000, 1_000), "rjmcmc": (110_000, 10_000)}
RW_SCALE = 2.38


class SamplerError(RuntimeError):
    pass


@dataclass
class SamplerConfig:
    """Sampler settings.

    ``iterations`` counts every iteration including the ``burn_in`` ones, so a
    chain keeps ``iterations - burn_in`` states. Budgets left as ``None``
    default to 11,000/1,000 for MC3 and 110,000/10,000 for RJMCMC.
    """

    method: SamplerMethod = "mc3_laplace"
    iterations: int | None = None
    burn_in: int | None = None
    seed: int = 0
    start: str | ModelIndicator = "null"
    scan: Literal["systematic", "random"] = "systematic"
    chains: int = 1
    within_model_updates: int = 1

    def __post_init__(self):
        if self.method not in SAMPLER_METHODS:
            raise ValueError(f"method must be one of {SAMPLER_METHODS}, got {self.method!r}")
        iters, burn = DEFAULT_BUDGET[self.method]
        if self.iterations is None:
            self.iterations = iters
        if self.burn_in is None:
            self.burn_in = min(burn, self.iterations)
        if not self.iterations >= self.burn_in >= 0:
            raise ValueError(f"need iterations >= burn_in >= 0, got {self.iterations}, {self.burn_in}")
        if self.scan not in ("systematic", "random"):
            raise ValueError(f"scan must be 'systematic' or 'random', got {self.scan!r}")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if isinstance(self.start, str) and self.start not in ("null", "full"):
            raise ValueError(f"start must be 'null', 'full' or a ModelIndicator, got {self.start!r}")

    @property
    def kept(self) -> int:
        return self.iterations - self.burn_in

    def start_code(self, p: int) -> int:
        if isinstance(self.start, ModelIndicator):
            if self.start.p != p:
                raise ValueError(f"start model over p={self.start.p}, dataset has p={p}")
            return self.start.code
        return 0 if self.start == "null" else (1 << p) - 1

    def to_dict(self) -> dict:
        start = self.start if isinstance(self.start, str) else list(self.start.indices)
        return {
            "method": self.method,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "start": start,
            "scan": self.scan,
            "chains": self.chains,
            "within_model_updates": self.within_model_updates,
        }


@dataclass
class ChainOutput:
    """Post-burn-in model histories of one or more chains.

    Estimates pool all chains; per-chain histories stay available for
    cross-chain diagnostics.
    """

    p: int
    method: str
    histories: list[np.ndarray]
    acceptance: list[float]
    chain_seeds: list[str]
    names: tuple[str, ...] = ()
    birth_death_acceptance: list[float] = field(default_factory=list)

    @property
    def n_kept(self) -> int:
        return int(sum(h.size for h in self.histories))

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.acceptance))

    def _pooled(self) -> np.ndarray:
        if self.n_kept == 0:
            raise ValueError("chain output holds no post-burn-in states")
        return np.concatenate(self.histories)

    def visit_counts(self) -> dict[int, int]:
        if self.n_kept == 0:
            return {}
        codes, counts = np.unique(self._pooled(), return_counts=True)
        return {int(c): int(k) for c, k in zip(codes, counts)}

    def frequencies(self) -> dict[int, float]:
        total = self.n_kept
        return {c: k / total for c, k in self.visit_counts().items()}

    def inclusion_bits(self, chain: int | None = None) -> np.ndarray:
        h = self._pooled() if chain is None else self.histories[chain]
        return (h[:, None] >> np.arange(self.p)) & 1

    def marginal_inclusion(self) -> np.ndarray:
        return self.inclusion_bits().mean(axis=0)

    def inclusion_trace(self, chain: int = 0) -> np.ndarray:
        """Running means of each inclusion indicator, one row per kept iteration."""
        bits = self.inclusion_bits(chain)
        return np.cumsum(bits, axis=0) / np.arange(1, bits.shape[0] + 1)[:, None]

    def model_trace(self, gamma: ModelIndicator | int, chain: int = 0) -> np.ndarray:
        """Running frequency of one model along a chain."""
        code = gamma.code if isinstance(gamma, ModelIndicator) else int(gamma)
        hits = (self.histories[chain] == code).astype(float)
        return np.cumsum(hits) / np.arange(1, hits.size + 1)

    def notation(self, code: int) -> str:
        return ModelIndicator(self.p, code).notation(self.names or None)

    def visits_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "count", "frequency"])
        total = self.n_kept
        for code, k in sorted(self.visit_counts().items(), key=lambda kv: (-kv[1], kv[0])):
            w.writerow([self.notation(code), k, f"{k / total:.17g}"])
        return buf.getvalue()

    def marginals_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", "estimate"])
        names = self.names or tuple(f"X{j}" for j in range(1, self.p + 1))
        for name, m in zip(names, self.marginal_inclusion()):
            w.writerow([name, f"{m:.17g}"])
        return buf.getvalue()

    def trace_csv(self, chain: int = 0, max_rows: int = 1000) -> str:
        trace = self.inclusion_trace(chain)
        step = max(1, math.ceil(trace.shape[0] / max_rows))
        rows = list(range(step - 1, trace.shape[0], step))
        if rows and rows[-1] != trace.shape[0] - 1:
            rows.append(trace.shape[0] - 1)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = self.names or tuple(f"X{j}" for j in range(1, self.p + 1))
        w.writerow(["iteration", *names])
        for i in rows:
            w.writerow([i + 1, *(f"{v:.17g}" for v in trace[i])])
        return buf.getvalue()


def marginal_inclusion(co: ChainOutput) -> np.ndarray:
    """Fraction of post-burn-in states including each predictor."""
    return co.marginal_inclusion()


def _chain_rngs(seed: int, chains: int):
    children = np.random.SeedSequence(seed).spawn(chains)
    return [np.random.default_rng(c) for c in children], [f"{seed}:{i}" for i in range(chains)]


def _run_chains(worker, cfg: SamplerConfig):
    rngs, labels = _chain_rngs(cfg.seed, cfg.chains)
    if cfg.chains == 1:
        results = [worker(rngs[0])]
    else:
        with ThreadPoolExecutor(max_workers=cfg.chains) as pool:
            results = list(pool.map(worker, rngs))
    return results, labels


def _flip_indices(rng, p: int, scan: str) -> np.ndarray:
    return np.arange(p) if scan == "systematic" else rng.integers(0, p, size=p)


# -- MC3 ----------------------------------------------------------------------

def _mc3_chain(scorer: Scorer, method: str, p: int, cfg: SamplerConfig, rng) -> tuple[np.ndarray, float]:
    local: dict[int, float] = {}

    def s(code):
        v = local.get(code)
        if v is None:
            v = local[code] = scorer.score_code(code, method)
        return v

    code = cfg.start_code(p)
    current = s(code)
    if p and math.isinf(current) and all(math.isinf(s(code ^ (1 << j))) for j in range(p)):
        raise SamplerError(f"start model {ModelIndicator(p, code)} and all its neighbours are excluded")

    history = np.empty(cfg.kept, dtype=np.int64)
    accepted = proposed = 0
    for it in range(cfg.iterations):
        if p:
            flips = _flip_indices(rng, p, cfg.scan)
            log_u = np.log(rng.random(p))
            for j, lu in zip(flips, log_u):
                prop = code ^ (1 << int(j))
                sp = s(prop)
                proposed += 1
                if math.isinf(sp):
                    continue
                # log PO(prop, current) = -(sp - current) / 2
                if math.isinf(current) or lu < -0.5 * (sp - current):
                    code, current = prop, sp
                    accepted += 1
        if it >= cfg.burn_in:
            history[it - cfg.burn_in] = code
    return history, accepted / proposed if proposed else math.nan


def run_mc3(d: Dataset, spec: CostPriorSpec, cfg: SamplerConfig, scorer: Scorer | None = None) -> ChainOutput:
    if cfg.method not in ("mc3_laplace", "mc3_bic"):
        raise ValueError(f"run_mc3 needs an mc3 method, got {cfg.method!r}")
    scorer = scorer or Scorer(d, spec)
    method = EVIDENCE_METHOD[cfg.method]
    results, labels = _run_chains(lambda rng: _mc3_chain(scorer, method, d.p, cfg, rng), cfg)
    return ChainOutput(
        p=d.p,
        method=cfg.method,
        histories=[h for h, _ in results],
        acceptance=[a for _, a in results],
        chain_seeds=labels,
        names=d.names,
    )


# -- RJMCMC -------------------------------------------------------------------

@dataclass
class _ModelInfo:
    cols: list[int]
    log_norm: float
    mode: np.ndarray
    precision: np.ndarray
    covariance: np.ndarray
    rw_chol: np.ndarray


class LaplaceCache:
    """Per-model posterior modes and curvature, shared across chains."""

    def __init__(self, d: Dataset):
        self.d = d
        self._cache: dict[int, _ModelInfo | None] = {}
        self._lock = threading.Lock()

    def get(self, code: int) -> _ModelInfo | None:
        if code in self._cache:
            return self._cache[code]
        gamma = ModelIndicator(self.d.p, code)
        Xg = self.d.design(gamma)
        try:
            G = glm.gram(Xg)
            fit = glm.fit_posterior_mode(Xg, self.d.y, G, self.d.n)
            if not fit.converged:
                raise glm.RankDeficientError("posterior mode did not converge")
            cov = np.linalg.inv(fit.neg_hessian)
            cov = 0.5 * (cov + cov.T)
            k = Xg.shape[1]
            info = _ModelInfo(
                cols=gamma.columns,
                log_norm=glm.prior_log_normalizer(G, self.d.n),
                mode=fit.beta,
                precision=fit.neg_hessian,
                covariance=cov,
                rw_chol=np.linalg.cholesky(RW_SCALE**2 / k * cov),
            )
        except np.linalg.LinAlgError:
            log.warning("excluding model %s from RJMCMC: singular design", gamma)
            info = None
        with self._lock:
            return self._cache.setdefault(code, info)


def _pilot(info: _ModelInfo, pos: int, others: np.ndarray) -> tuple[float, float]:
    """Center and sd for coefficient ``pos`` given the remaining coefficients.

    The center is the conditional mean of the Laplace Gaussian; the spread is
    its marginal standard deviation, which keeps the pilot at least as wide as
    the conditional.
    """
    m = info.mode
    P = info.precision
    rest = np.arange(m.size) != pos
    center = m[pos] - P[pos, rest] @ (others - m[rest]) / P[pos, pos]
    return float(center), math.sqrt(info.covariance[pos, pos])


def _norm_logpdf(x, mu, sd):
    z = (x - mu) / sd
    return -0.5 * z * z - math.log(sd) - 0.5 * glm.LOG_2PI


def _rjmcmc_chain(d: Dataset, spec: CostPriorSpec, cache: LaplaceCache, cfg: SamplerConfig, rng):
    p, n, y, X = d.p, d.n, d.y, d.X
    sign = 1.0 - 2.0 * y
    prior_a = inclusion_log_odds(spec)  # log f(gamma) up to a constant = sum gamma_j a_j

    def log_target(info, eta, code_prior):
        # beta' G beta equals |X_g beta|^2 = |eta|^2
        return (
            -np.logaddexp(0.0, sign * eta).sum()
            + info.log_norm
            - float(eta @ eta) / (8.0 * n)
            + code_prior
        )

    code = cfg.start_code(p)
    info = cache.get(code)
    if info is None:
        raise SamplerError(f"start model {ModelIndicator(p, code)} is excluded")
    beta = info.mode.copy()
    eta = X[:, info.cols] @ beta
    lp_model = float(sum(prior_a[j] for j in range(p) if code >> j & 1))
    cur = log_target(info, eta, lp_model)

    history = np.empty(cfg.kept, dtype=np.int64)
    bd_acc = bd_prop = rw_acc = rw_prop = 0
    for it in range(cfg.iterations):
        flips = _flip_indices(rng, p, cfg.scan) if p else ()
        for j in flips:
            j = int(j)
            var = j + 1
            prop_code = code ^ (1 << j)
            prop_info = cache.get(prop_code)
            bd_prop += 1
            if prop_info is None:
                continue
            if not code >> j & 1:  # birth
                pos = prop_info.cols.index(var)
                mu, sd = _pilot(prop_info, pos, beta)
                u = mu + sd * rng.standard_normal()
                new_beta = np.insert(beta, pos, u)
                new_eta = eta + u * X[:, var]
                new_lp = lp_model + prior_a[j]
                new = log_target(prop_info, new_eta, new_lp)
                log_alpha = new - cur - _norm_logpdf(u, mu, sd)
            else:  # death
                pos = info.cols.index(var)
                u = beta[pos]
                new_beta = np.delete(beta, pos)
                mu, sd = _pilot(info, pos, new_beta)
                new_eta = eta - u * X[:, var]
                new_lp = lp_model - prior_a[j]
                new = log_target(prop_info, new_eta, new_lp)
                log_alpha = new - cur + _norm_logpdf(u, mu, sd)
            if log_alpha >= 0 or math.log(rng.random()) < log_alpha:
                code, info, beta, eta, lp_model, cur = prop_code, prop_info, new_beta, new_eta, new_lp, new
                bd_acc += 1

        Xg = X[:, info.cols]
        for _ in range(cfg.within_model_updates):
            step = info.rw_chol @ rng.standard_normal(beta.size)
            new_eta = eta + Xg @ step
            new = log_target(info, new_eta, lp_model)
            rw_prop += 1
            if new >= cur or math.log(rng.random()) < new - cur:
                beta, eta, cur = beta + step, new_eta, new
                rw_acc += 1

        if it >= cfg.burn_in:
            history[it - cfg.burn_in] = code
    bd_rate = bd_acc / bd_prop if bd_prop else math.nan
    rw_rate = rw_acc / rw_prop if rw_prop else math.nan
    return history, bd_rate, rw_rate


def run_rjmcmc(d: Dataset, spec: CostPriorSpec, cfg: SamplerConfig, cache: LaplaceCache | None = None) -> ChainOutput:
    if cfg.method != "rjmcmc":
        raise ValueError(f"run_rjmcmc needs method 'rjmcmc', got {cfg.method!r}")
    cache = cache or LaplaceCache(d)
    results, labels = _run_chains(lambda rng: _rjmcmc_chain(d, spec, cache, cfg, rng), cfg)
    return ChainOutput(
        p=d.p,
        method=cfg.method,
        histories=[r[0] for r in results],
        acceptance=[r[2] for r in results],
        chain_seeds=labels,
        names=d.names,
        birth_death_acceptance=[r[1] for r in results],
    )


def run_sampler(d: Dataset, spec: CostPriorSpec, cfg: SamplerConfig) -> ChainOutput:
    if cfg.method == "rjmcmc":
        return run_rjmcmc(d, spec, cfg)
    return run_mc3(d, spec, cfg)


# -- within-model sampling -----------------------------------------------------

@dataclass
class CoefficientDraws:
    gamma: ModelIndicator
    beta: np.ndarray
    acceptance_rate: float
    burn_in: int
    thin: int
    seed: int | None


_RW_BLOCK = 1024


def sample_coefficients(
    gamma: ModelIndicator,
    d: Dataset,
    draws: int = 10_000,
    *,
    burn_in: int = 2_000,
    thin: int = 1,
    seed: int | None = 0,
) -> CoefficientDraws:
    """Random-walk Metropolis on ``h(beta)`` within a fixed model.

    Starts at the posterior mode with proposal covariance
    ``(2.38**2 / d) * inv(Psi_gamma)`` and keeps every ``thin``-th state after
    ``burn_in``.
    """
    if draws < 1 or thin < 1 or burn_in < 0:
        raise ValueError("need draws >= 1, thin >= 1, burn_in >= 0")
    Xg = d.design(gamma)
    G = glm.gram(Xg)
    fit = glm.fit_posterior_mode(Xg, d.y, G, d.n)
    if not fit.converged:
        raise np.linalg.LinAlgError(f"posterior mode did not converge for {gamma}")
    k = Xg.shape[1]
    chol = np.linalg.cholesky(RW_SCALE**2 / k * np.linalg.inv(fit.neg_hessian))
    sign = 1.0 - 2.0 * d.y
    n = d.n

    def h(eta):
        return -np.logaddexp(0.0, sign * eta).sum() - float(eta @ eta) / (8.0 * n)

    rng = np.random.default_rng(seed)
    beta = fit.beta.copy()
    eta = Xg @ beta
    cur = h(eta)
    total = burn_in + draws * thin
    out = np.empty((draws, k))
    accepted = 0
    for t in range(total):
        # Random numbers come in fixed blocks so a longer run extends a shorter one.
        if t % _RW_BLOCK == 0:
            steps = rng.standard_normal((_RW_BLOCK, k)) @ chol.T
            log_u = np.log(rng.random(_RW_BLOCK))
        step = steps[t % _RW_BLOCK]
        new_eta = eta + Xg @ step
        new = h(new_eta)
        if log_u[t % _RW_BLOCK] < new - cur:
            beta, eta, cur = beta + step, new_eta, new
            accepted += 1
        kept = t - burn_in
        if kept >= 0 and (kept + 1) % thin == 0:
            out[kept // thin] = beta
    return CoefficientDraws(gamma, out, accepted / total, burn_in, thin, seed)


# -- two-stage search ------------------------------------------------------------

@dataclass
class TwoStageResult:
    """Screening run, reduced variable set and refined posterior.

    ``stage2`` lives on the reduced space; use :meth:`lift` to map its models
    back to the full predictor indices.
    """

    threshold: float
    reduced: tuple[int, ...]
    stage1: ChainOutput
    stage1_marginals: np.ndarray
    stage2: PosteriorTable | ChainOutput
    reduced_data: Dataset
    p: int

    def lift(self, gamma: ModelIndicator | int) -> ModelIndicator:
        code = gamma.code if isinstance(gamma, ModelIndicator) else int(gamma)
        sub = ModelIndicator(len(self.reduced), code)
        return ModelIndicator.from_indices(self.p, [self.reduced[i - 1] for i in sub.indices])

    def stage2_marginals(self) -> np.ndarray:
        """Stage-2 inclusion probabilities on the full index set (0 outside the reduced set)."""
        out = np.zeros(self.p)
        if isinstance(self.stage2, PosteriorTable):
            reduced = marginal_inclusion_from_table(self.stage2) if self.reduced else np.zeros(0)
        else:
            reduced = self.stage2.marginal_inclusion()
        for j, m in zip(self.reduced, reduced):
            out[j - 1] = m
        return out


def two_stage_search(
    d: Dataset,
    spec: CostPriorSpec,
    cfg: SamplerConfig,
    threshold: float = 0.3,
    *,
    exact_stage2: bool = True,
) -> TwoStageResult:
    """Screen predictors by marginal inclusion, then refine on the survivors.

    Stage 2 enumerates the reduced space exactly when it has at most 20
    predictors (unless ``exact_stage2`` is false) and otherwise reruns the
    same sampler there. The reduced prior keeps the full-space baseline cost.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    stage1 = run_sampler(d, spec, cfg)
    marg = stage1.marginal_inclusion()
    reduced = tuple(int(j) + 1 for j in np.flatnonzero(marg >= threshold))
    if not reduced:
        warnings.warn(
            f"no predictor reached marginal inclusion {threshold}; stage 2 is intercept-only",
            stacklevel=2,
        )
    sub = d.subset(reduced)
    sub_spec = spec.restrict(reduced)
    method = EVIDENCE_METHOD[cfg.method]
    if exact_stage2 and len(reduced) <= MAX_ENUMERATION_P:
        stage2 = enumerate_posterior(sub, sub_spec, method)
    else:
        sub_cfg = SamplerConfig(**{**cfg.__dict__, "start": cfg.start if isinstance(cfg.start, str) else "null"})
        stage2 = run_sampler(sub, sub_spec, sub_cfg)
    return TwoStageResult(threshold, reduced, stage1, marg, stage2, sub, d.p)
