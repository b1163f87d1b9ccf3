import math

import numpy as np
import pytest

from costbic import glm
from costbic.dataset import Dataset
from costbic.diagnostics import (
    cv_log_score_exact,
    cv_log_score_from_draws,
    cv_log_score_mcmc,
    deviance,
    posterior_deviance,
)
from costbic.model_space import ModelIndicator

from .conftest import random_dataset


def test_deviance_half_probabilities():
    d = Dataset(y=[0, 1] * 5, X=np.ones((10, 1)), names=[], costs=np.zeros(0))
    assert deviance(ModelIndicator.null(0), [0.0], d) == pytest.approx(20 * math.log(2), abs=1e-12)


def test_deviance_saturated():
    x = np.array([-1.0, 1.0, -2.0, 2.0])
    d = Dataset(y=[0, 1, 0, 1], X=np.column_stack([np.ones(4), x]), names=["x"], costs=[1])
    assert deviance(ModelIndicator.full(1), [0.0, 60.0], d) < 1e-20


def test_deviance_is_minus_two_loglik(sampler_data):
    rng = np.random.default_rng(0)
    g = ModelIndicator.from_indices(6, [1, 2, 3])
    for _ in range(20):
        beta = rng.normal(size=4)
        assert deviance(g, beta, sampler_data) == pytest.approx(
            -2 * glm.log_likelihood(g, beta, sampler_data), abs=1e-12
        )
    with pytest.raises(ValueError):
        deviance(g, np.zeros(3), sampler_data)


def test_mle_minimizes_deviance(sampler_data):
    g = ModelIndicator.from_indices(6, [1, 2])
    fit = glm.mle(g, sampler_data)
    rng = np.random.default_rng(1)
    floor = deviance(g, fit.beta, sampler_data)
    for _ in range(100):
        assert deviance(g, fit.beta + rng.normal(scale=0.3, size=3), sampler_data) >= floor


def test_posterior_deviance_summary(sampler_data):
    g = ModelIndicator.from_indices(6, [1, 2, 6])
    s = posterior_deviance(g, sampler_data, draws=4_000, seed=3)
    assert s.minimum <= s.median <= s.maximum
    assert s.minimum >= s.mle_deviance
    assert s.size == 4_000
    assert s.settings["burn_in"] == 2_000 and s.settings["seed"] == 3
    assert s.median - s.mle_deviance == pytest.approx(3.36, abs=1.0)  # about chi2_4 median


def test_exact_loo_balanced_intercept():
    n = 400
    d = Dataset(y=[0, 1] * (n // 2), X=np.ones((n, 1)), names=[], costs=np.zeros(0))
    value = cv_log_score_exact(ModelIndicator.null(0), d)
    # Dropping one case leaves 199 of 399 matching outcomes.
    assert value == pytest.approx(math.log(199 / 399), abs=1e-3)
    assert value == pytest.approx(-math.log(2), abs=5e-3)


def test_exact_loo_permutation_invariant(loo_data):
    g = ModelIndicator.full(3)
    perm = np.random.default_rng(5).permutation(loo_data.n)
    shuffled = Dataset(y=loo_data.y[perm], X=loo_data.X[perm], names=loo_data.names, costs=loo_data.costs)
    assert cv_log_score_exact(g, shuffled) == pytest.approx(cv_log_score_exact(g, loo_data), abs=1e-12)


def test_exact_loo_guard():
    rng = np.random.default_rng(0)
    d = random_dataset(rng, n=501, p=1)
    with pytest.raises(ValueError):
        cv_log_score_exact(ModelIndicator.full(1), d)


def test_estimators_agree(loo_data):
    g = ModelIndicator.full(3)
    exact = cv_log_score_exact(g, loo_data)
    mc = cv_log_score_mcmc(g, loo_data, draws=10_000, seed=0)
    assert abs(exact - mc.value) <= 0.02
    assert exact <= 0 and mc.value <= 0
    assert not mc.unreliable and mc.n_floored == 0


def test_single_draw_identity(loo_data):
    g = ModelIndicator.full(3)
    beta = np.array([0.1, 0.9, -0.5, 0.2])
    ls = cv_log_score_from_draws(g, loo_data, beta[None, :])
    assert ls.value == pytest.approx(-deviance(g, beta, loo_data) / (2 * loo_data.n), abs=1e-12)
    assert math.isnan(ls.jackknife_se)


def test_mcmc_seed_deterministic_and_stable(loo_data):
    g = ModelIndicator.full(3)
    a = cv_log_score_mcmc(g, loo_data, draws=10_000, seed=0)
    assert a == cv_log_score_mcmc(g, loo_data, draws=10_000, seed=0)
    b = cv_log_score_mcmc(g, loo_data, draws=20_000, seed=0)
    assert abs(b.value - a.value) < a.jackknife_se


def test_floor_and_unreliable_flag(caplog):
    x = np.array([-1.0, 1.0, -1.0, 1.0])
    d = Dataset(y=[0, 1, 1, 0], X=np.column_stack([np.ones(4), x]), names=["x"], costs=[1])
    g = ModelIndicator.full(1)
    draws = np.array([[0.0, 800.0], [0.0, 900.0]])
    ls = cv_log_score_from_draws(g, d, draws)
    assert ls.unreliable
    assert ls.n_floored == 4
    assert math.isfinite(ls.value)
    assert "floored" in caplog.text


def test_jackknife_se_calibrated(loo_data):
    g = ModelIndicator.full(3)
    runs = [cv_log_score_mcmc(g, loo_data, draws=4_000, seed=s) for s in range(8)]
    spread = np.std([r.value for r in runs], ddof=1)
    mean_se = np.mean([r.jackknife_se for r in runs])
    assert 0.4 < spread / mean_se < 2.5
