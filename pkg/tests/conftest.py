import numpy as np
import pytest
from hypothesis import settings

from rbdeconv.linops import random_operator
from rbdeconv.manifold import FactorPair

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def rand_pair(rng, K, N):
    return FactorPair(cvec(rng, K), cvec(rng, N))


def unit_truth(rng, K, N):
    """Gaussian ground truth scaled so that ||h|| = ||m|| = 1."""
    h, m = cvec(rng, K), cvec(rng, N)
    return FactorPair(h / np.linalg.norm(h), m / np.linalg.norm(m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem(rng):
    """Noiseless instance with L = 120, K = 8, N = 6."""
    op = random_operator(120, 8, 6, seed=3)
    truth = rand_pair(rng, 8, 6)
    return op, truth, op.forward(truth.h, truth.m)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
