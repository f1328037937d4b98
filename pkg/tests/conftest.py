import numpy as np
import pytest

from qaraki.deformed_space import BlockSpec, build


@pytest.fixture(scope="session")
def tracial2():
    return build(BlockSpec.tracial(2))


@pytest.fixture(scope="session")
def tracial3():
    return build(BlockSpec.tracial(3))


@pytest.fixture(scope="session")
def deformed3():
    return build(BlockSpec((0.7,), 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
