"""Standard synthetic problems shared by the tests and the experiment scripts."""

from __future__ import annotations

from .dataset import SyntheticSpec


def sampler_problem() -> SyntheticSpec:
    """p=6, n=300: a small space where samplers can be checked against enumeration.

    X1 and X2 are strong signals, X3 and X5 moderate, X4 and X6 null. Costs
    vary so the cost-benefit prior matters.
    """
    return SyntheticSpec(
        n=300,
        beta=[-0.3, 0.9, -0.6, 0.35, 0.0, 0.2, 0.0],
        costs=[0.5, 1.0, 0.5, 1.5, 2.0, 0.5],
        correlation={(1, 4): 0.5, (2, 5): 0.3, (3, 6): -0.4},
        seed=2024,
    )


def twin_problem(seed: int = 7) -> SyntheticSpec:
    """p=12, n=600: three signals plus a redundant cheap/expensive pair.

    X1-X3 carry independent signal. X4 (cost 0.5, the baseline) and X5
    (cost 2.0) are near copies of one latent predictor (correlation 0.9999)
    with equal true effects, so the data cannot prefer either. X6-X12 are
    null, some correlated with the signals.
    """
    return SyntheticSpec(
        n=600,
        beta=[-0.2, 0.8, -0.7, 0.6, 0.3, 0.3, 0, 0, 0, 0, 0, 0, 0],
        costs=[1.0, 1.0, 1.0, 0.5, 2.0, 0.5, 1.0, 1.5, 0.5, 2.0, 1.0, 1.5],
        correlation={(4, 5): 0.9999, (1, 6): 0.4, (2, 7): 0.3, (3, 8): -0.3, (9, 10): 0.5},
        seed=seed,
    )


def loo_problem(seed: int = 0) -> SyntheticSpec:
    """n=60, p=3: small enough for exact leave-one-out refits."""
    return SyntheticSpec(n=60, beta=[0.2, 1.0, -0.7, 0.4], seed=seed)
