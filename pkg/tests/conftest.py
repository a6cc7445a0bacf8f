import numpy as np
import pytest

from carlaseg.gmm import Mixture
from carlaseg.histogram import synth_histogram

ORACLE = Mixture.from_arrays([0.2, 0.2, 0.3, 0.3], [40, 100, 150, 220], [8, 10, 12, 6])


@pytest.fixture
def oracle_mixture():
    return ORACLE


@pytest.fixture
def oracle_hist():
    return synth_histogram(ORACLE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
