import numpy as np
import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion.

    Usage: ``acceptance("2b", "DEIM avg error at 30 modes", value, passed)``.
    """
    lines = request.config.stash[_LINES]

    def record(label, description, value, passed):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {label}: {description}: {value}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
