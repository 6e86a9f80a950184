import numpy as np
import pytest

from dichotome import fixtures

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def underexposed():
    return fixtures.underexposed()


@pytest.fixture(scope="session")
def texture512():
    return fixtures.natural_texture(512, 512, 1)
