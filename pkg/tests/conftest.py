import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

_REPORT = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Record a one-line outcome that is repeated in the terminal summary."""

    def _add(line):
        _REPORT.append(line)
        print(line)

    return _add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance summary")
        for line in _REPORT:
            terminalreporter.write_line(line)
