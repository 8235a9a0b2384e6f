import numpy as np
import pytest

from nurgg.density import NormSpec, RadialEdgeVanishing, RadialInteriorVanishing, UniformCube

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def unif2():
    return UniformCube(2)


@pytest.fixture(scope="session")
def c_int():
    return RadialInteriorVanishing(2, 1.0)


@pytest.fixture(scope="session")
def c_edge():
    return RadialEdgeVanishing(2, 0.5, 1.0)


@pytest.fixture(scope="session")
def linf():
    return NormSpec("inf", 2)


@pytest.fixture(scope="session")
def l2():
    return NormSpec(2, 2)


@pytest.fixture(scope="session")
def l1():
    return NormSpec(1, 2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
