"""Acceptance criteria, one test each.

Every test records a ``criterion N: PASS|FAIL ...`` line that the terminal
summary prints, then asserts the same condition.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from costbic import evidence, glm
from costbic.benchmarks import sampler_problem
from costbic.cli import main
from costbic.dataset import SyntheticSpec, synthesize, write_dataset
from costbic.diagnostics import cv_log_score_exact, cv_log_score_from_draws, cv_log_score_mcmc, deviance, posterior_deviance
from costbic.model_space import ModelIndicator, enumerate_all, flip
from costbic.oracle import enumerate_posterior, marginal_inclusion_from_table, quadrature_log_marginal
from costbic.priors import CostPriorSpec, cost_penalty, extra_penalty_xi, log_model_prior, log_prior_odds, omega_penalty
from costbic.samplers import SamplerConfig, run_sampler, two_stage_search

from .conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance


class Timer:
    elapsed = 0.0


@contextmanager
def timed():
    t = Timer()
    start = time.perf_counter()
    yield t
    t.elapsed = time.perf_counter() - start


def record(number: int, ok: bool, detail: str, elapsed: float | None = None) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    if elapsed is not None:
        line += f" [{elapsed:.1f} s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def tv_distance(freqs: dict, probs: dict) -> float:
    keys = set(freqs) | set(probs)
    return 0.5 * sum(abs(freqs.get(k, 0.0) - probs.get(k, 0.0)) for k in keys)


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1_prior_axioms():
    rng = np.random.default_rng(20240101)
    worst = {"baseline": 0.0, "kappa": 0.0, "scale": 0.0, "equal_bic": 0.0}
    min_xi = math.inf
    nonzero_equal_odds = 0
    with timed() as t:
        for _ in range(1_000):
            p = int(rng.integers(1, 13))
            costs = rng.uniform(0.1, 20.0, p)
            n = int(rng.integers(2, 10_001))
            gamma = ModelIndicator(p, int(rng.integers(0, 2**p)))
            other = ModelIndicator(p, int(rng.integers(0, 2**p)))
            j = int(rng.integers(1, p + 1))
            base = gamma if not gamma.bits[j - 1] else flip(gamma, j)
            c0 = costs.min()

            at_base = costs.copy()
            at_base[j - 1] = c0
            xi = extra_penalty_xi(flip(base, j), base, CostPriorSpec(costs=at_base, n=n))
            worst["baseline"] = max(worst["baseline"], abs(xi))

            for kappa in (2.0, 3.0, 5.0):
                scaled = costs.copy()
                scaled[j - 1] = kappa * c0
                spec = CostPriorSpec(costs=scaled, n=n, c0=c0)
                xi = extra_penalty_xi(flip(base, j), base, spec)
                worst["kappa"] = max(worst["kappa"], abs(xi - (kappa - 1) * math.log(n)))

            spec = CostPriorSpec(costs=costs, n=n)
            for k in range(1, p + 1):
                if not base.bits[k - 1]:
                    min_xi = min(min_xi, extra_penalty_xi(flip(base, k), base, spec))

            ref_prior = log_model_prior(gamma, spec)
            ref_odds = log_prior_odds(gamma, other, spec)
            for alpha in (0.5, 2.0, 10.0):
                s = CostPriorSpec(costs=alpha * costs, n=n)
                worst["scale"] = max(
                    worst["scale"],
                    abs(log_model_prior(gamma, s) - ref_prior),
                    abs(log_prior_odds(gamma, other, s) - ref_odds),
                )

            flat = CostPriorSpec(costs=np.full(p, costs[0]), n=n)
            nonzero_equal_odds += log_prior_odds(gamma, other, flat) != 0.0
            classical = (gamma.size - other.size) * math.log(n)
            worst["equal_bic"] = max(worst["equal_bic"], abs(omega_penalty(gamma, other, flat) - classical))

    ok = (
        worst["baseline"] <= 1e-10
        and worst["kappa"] <= 1e-10
        and min_xi >= 0
        and worst["scale"] <= 1e-12
        and nonzero_equal_odds == 0
        and worst["equal_bic"] <= 1e-10
        and t.elapsed < 5
    )
    detail = (
        f"1000 cases; max|xi| at baseline {worst['baseline']:.1e}, max kappa error {worst['kappa']:.1e}, "
        f"min xi {min_xi + 0.0:.3g}, scale error {worst['scale']:.1e}, nonzero equal-cost odds {nonzero_equal_odds}, "
        f"BIC difference error {worst['equal_bic']:.1e}"
    )
    record(1, ok, detail, t.elapsed)


# -- 2 ---------------------------------------------------------------------------

def test_criterion_2_prior_normalization():
    rng = np.random.default_rng(2)
    worst = 0.0
    with timed() as t:
        for p in range(1, 13):
            for mode in ("cost_benefit", "benefit_only"):
                spec = CostPriorSpec(costs=rng.uniform(0.2, 8.0, p), n=int(rng.integers(10, 5_000)), mode=mode)
                total = math.fsum(math.exp(log_model_prior(g, spec)) for g in enumerate_all(p))
                worst = max(worst, abs(total - 1.0))
    record(2, worst <= 1e-10 and t.elapsed < 10, f"p=1..12, both modes; max |sum - 1| = {worst:.1e}", t.elapsed)


# -- 3 ---------------------------------------------------------------------------

def test_criterion_3_laplace_vs_quadrature():
    rng = np.random.default_rng(3)
    diffs = []
    with timed() as t:
        for k in range(10):
            n = (100, 500)[k % 2]
            d = synthesize(SyntheticSpec(n=n, beta=[rng.uniform(-1, 1), rng.uniform(-1.5, 1.5)], seed=100 + k))
            g = ModelIndicator.full(1) if k < 8 else ModelIndicator.null(1)
            quad = quadrature_log_marginal(g, d)
            diffs.append(abs(evidence.laplace_log_marginal(g, d) - quad.value))
    worst = max(diffs)
    record(3, worst <= 0.05 and t.elapsed < 60,
           f"10 problems, n in {{100, 500}}, d <= 2; max |delta log marginal| = {worst:.4f}", t.elapsed)


# -- 4 ---------------------------------------------------------------------------

def test_criterion_4_derivative_checks(sampler_data):
    d = sampler_data
    models = [ModelIndicator(6, c) for c in (0, 1, 3, 37, 63)]
    rng = np.random.default_rng(4)
    h = 1e-5
    worst_g = worst_h = 0.0
    with timed() as t:
        for g in models:
            Xg = d.design(g)
            G = glm.gram(Xg)
            k = Xg.shape[1]
            center = glm.posterior_mode(g, d).beta
            for _ in range(20):
                beta = center + rng.normal(0, 0.5, k)
                _, grad, neg_hess = glm.posterior_derivatives(Xg, d.y, G, d.n, beta)
                fd_grad = np.empty(k)
                fd_hess = np.empty((k, k))
                for i in range(k):
                    e = np.zeros(k)
                    e[i] = h
                    fd_grad[i] = (glm.log_posterior_kernel(g, beta + e, d) - glm.log_posterior_kernel(g, beta - e, d)) / (2 * h)
                    up = glm.posterior_derivatives(Xg, d.y, G, d.n, beta + e)[1]
                    down = glm.posterior_derivatives(Xg, d.y, G, d.n, beta - e)[1]
                    fd_hess[:, i] = -(up - down) / (2 * h)
                worst_g = max(worst_g, np.linalg.norm(fd_grad - grad) / np.linalg.norm(grad))
                worst_h = max(worst_h, np.linalg.norm(fd_hess - neg_hess) / np.linalg.norm(neg_hess))
    ok = worst_g <= 1e-6 and worst_h <= 1e-4 and t.elapsed < 5
    record(4, ok, f"5 models x 20 points; gradient rel. error {worst_g:.1e}, Hessian rel. error {worst_h:.1e}",
           t.elapsed)


# -- 5 ---------------------------------------------------------------------------

def test_criterion_5_sampler_oracle(sampler_data, sampler_spec):
    d, spec = sampler_data, sampler_spec
    parts = []
    ok = True
    with timed() as t:
        tables = {m: enumerate_posterior(d, spec, m) for m in ("laplace", "bic")}
        runs = [
            ("mc3_laplace", "laplace", 50_000, 1_000, 0.05),
            ("mc3_bic", "bic", 50_000, 1_000, 0.05),
            ("rjmcmc", "laplace", 100_000, 10_000, 0.07),
        ]
        for method, oracle, iters, burn, limit in runs:
            table = tables[oracle]
            exact_marg = marginal_inclusion_from_table(table)
            starts = {}
            for start in ("null", "full"):
                out = run_sampler(d, spec, SamplerConfig(method=method, iterations=iters, burn_in=burn,
                                                         start=start, seed=5))
                starts[start] = out.marginal_inclusion()
                tv = tv_distance(out.frequencies(), table.probabilities())
                marg_err = float(np.max(np.abs(starts[start] - exact_marg)))
                ok &= tv <= limit and marg_err <= 0.03
                parts.append(f"{method}/{start} TV {tv:.4f} marg {marg_err:.4f}")
            gap = float(np.max(np.abs(starts["null"] - starts["full"])))
            ok &= gap <= 0.03
            parts.append(f"{method} null-vs-full {gap:.4f}")
    ok &= t.elapsed < 600
    record(5, ok, "; ".join(parts), t.elapsed)


# -- 6 ---------------------------------------------------------------------------

def test_criterion_6_two_stage(twin_data):
    d = twin_data
    signals = {1, 2, 3}
    cheap, dear = 4, 5
    cfg = SamplerConfig(method="mc3_laplace", seed=0)
    with timed() as t:
        cb = two_stage_search(d, CostPriorSpec.from_dataset(d), cfg, threshold=0.3)
        bo = two_stage_search(d, CostPriorSpec.from_dataset(d, mode="benefit_only"), cfg, threshold=0.3)
    cb_top = cb.lift(cb.stage2.best.model)
    bo_marg = bo.stage2_marginals()
    pair_gap = abs(bo_marg[cheap - 1] - bo_marg[dear - 1])
    ok = (
        signals <= set(cb.reduced)
        and signals <= set(bo.reduced)
        and cheap in cb_top.indices
        and dear not in cb_top.indices
        and pair_gap < 0.15
        and t.elapsed < 600
    )
    detail = (
        f"reduced sets cost-benefit {list(cb.reduced)}, benefit-only {list(bo.reduced)}; "
        f"cost-benefit top model {cb_top.notation(d.names)}; "
        f"benefit-only pair marginals {bo_marg[cheap - 1]:.3f} vs {bo_marg[dear - 1]:.3f} (gap {pair_gap:.3f})"
    )
    record(6, ok, detail, t.elapsed)


# -- 7 ---------------------------------------------------------------------------

def test_criterion_7_log_score_agreement(loo_data):
    g = ModelIndicator.full(3)
    with timed() as t:
        exact = cv_log_score_exact(g, loo_data)
        mc = cv_log_score_mcmc(g, loo_data, draws=10_000, seed=0)
        beta = glm.posterior_mode(g, loo_data).beta
        single = cv_log_score_from_draws(g, loo_data, beta[None, :]).value
        identity = abs(single + deviance(g, beta, loo_data) / (2 * loo_data.n))
    gap = abs(exact - mc.value)
    ok = gap <= 0.02 and identity <= 1e-12 and t.elapsed < 120
    record(7, ok, f"exact {exact:.4f}, MCMC {mc.value:.4f} (se {mc.jackknife_se:.4f}), gap {gap:.4f}; "
                  f"T=1 identity error {identity:.1e}", t.elapsed)


# -- 8 ---------------------------------------------------------------------------

def test_criterion_8_deviance_floor(sampler_data, twin_data, loo_data):
    from costbic.dataset import Dataset

    half = Dataset(y=[0, 1] * 5, X=np.ones((10, 1)), names=[], costs=np.zeros(0))
    trivial = abs(deviance(ModelIndicator.null(0), [0.0], half) - 20 * math.log(2))
    cases = [
        ("sampler", sampler_data, [1, 2, 3]),
        ("sampler", sampler_data, []),
        ("twin", twin_data, [1, 2, 3, 4]),
        ("twin", twin_data, []),
        ("loo", loo_data, [1, 2, 3]),
        ("loo", loo_data, []),
    ]
    margins = []
    for name, d, idx in cases:
        s = posterior_deviance(ModelIndicator.from_indices(d.p, idx), d, draws=10_000, seed=8)
        margins.append(s.median - s.mle_deviance)
    ok = trivial <= 1e-12 and min(margins) >= 0
    record(8, ok, f"20 log 2 error {trivial:.1e}; min (median - MLE deviance) over {len(cases)} fixtures "
                  f"{min(margins):.3f}")


# -- 9 ---------------------------------------------------------------------------

def test_criterion_9_cli_reproducible(tmp_path, capsys):
    write_dataset(synthesize(sampler_problem()), tmp_path / "data.csv", tmp_path / "costs.csv")
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps(sampler_problem().to_dict()))
    data = ["--data", str(tmp_path / "data.csv"), "--costs", str(tmp_path / "costs.csv")]
    commands = {
        "enumerate": ["enumerate", *data, "--seed", "3", "--diagnostics", "2", "--draws", "2000"],
        "enumerate-csv": ["enumerate", *data, "--seed", "3", "--format", "csv", "--draws", "2000"],
        "search-mc3": ["search", *data, "--seed", "4", "--iters", "3000", "--burnin", "300", "--chains", "2",
                       "--draws", "2000"],
        "search-rjmcmc": ["search", *data, "--sampler", "rjmcmc", "--seed", "4", "--iters", "3000",
                          "--burnin", "300", "--draws", "2000"],
        "score": ["score", *data, "--model", "X1+X2+X6", "--seed", "5", "--draws", "3000"],
        "simulate": ["simulate", "--config", str(cfg), "--seed", "6"],
    }
    mismatched = []
    for name, argv in commands.items():
        outputs = []
        for _ in range(2):
            out = tmp_path / f"{name}.out"
            code = main([*argv, "--out", str(out)])
            stdout = capsys.readouterr().out
            assert code == 0, name
            files = sorted(p for p in tmp_path.iterdir() if p.name.startswith(name))
            outputs.append((stdout, {p.name: p.read_bytes() for p in files}))
        if outputs[0] != outputs[1]:
            mismatched.append(name)
    record(9, not mismatched, f"{len(commands)} seeded commands run twice; mismatched: {mismatched or 'none'}")


# -- 10 --------------------------------------------------------------------------

def test_criterion_10_table_penalties():
    spec = CostPriorSpec(costs=[7.5, 22.5], n=2532, c0=0.5)
    low = cost_penalty(ModelIndicator.from_indices(2, [1]), spec)
    high = cost_penalty(ModelIndicator.from_indices(2, [2]), spec)
    err = max(abs(low - 15 * math.log(2532)), abs(high - 45 * math.log(2532)))
    record(10, err <= 1e-9, f"penalties {low:.4f} and {high:.4f}; max error {err:.1e}")
