import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")


def random_distribution(rng, n_atoms, bound, with_zero=True):
    """Finite law on [0, bound] with distinct atoms."""
    vals = np.sort(rng.choice(np.arange(1, 1000), size=n_atoms, replace=False)) / 1000.0 * bound
    if with_zero:
        vals[0] = 0.0
    probs = rng.dirichlet(np.ones(n_atoms))
    return vals, probs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one "PASS/FAIL <criterion>: <detail>" line per acceptance criterion, shown in the summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
