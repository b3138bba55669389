import numpy as np
import pytest

from sphloc.synth import sample_uniform_sphere


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_points(rng):
    return sample_uniform_sphere(500, rng)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
