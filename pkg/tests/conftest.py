import numpy as np
import pytest

from costbic import CostPriorSpec, Dataset, synthesize
from costbic.benchmarks import loo_problem, sampler_problem, twin_problem

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sampler_data():
    return synthesize(sampler_problem())


@pytest.fixture(scope="session")
def sampler_spec(sampler_data):
    return CostPriorSpec.from_dataset(sampler_data)


@pytest.fixture(scope="session")
def twin_data():
    return synthesize(twin_problem())


@pytest.fixture(scope="session")
def loo_data():
    return synthesize(loo_problem())


def random_dataset(rng, n=80, p=3, scale=1.0, costs=None) -> Dataset:
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    beta = rng.normal(0, scale, p + 1)
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    y[0], y[1] = 0.0, 1.0
    return Dataset(y=y, X=X, names=[f"X{j}" for j in range(1, p + 1)],
                   costs=np.ones(p) if costs is None else costs)
