import numpy as np
import pytest

from splitflow.problems import ProblemInstance

# verdict lines recorded by test_acceptance.py; replayed after the run so
# they stay visible even though pytest captures per-test stdout
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_instance(**kwargs):
    """Ad-hoc ProblemInstance for wiring tests; fill only what you need."""
    kwargs.setdefault("family", "custom")
    kwargs.setdefault("seed", 0)
    return ProblemInstance(**kwargs)
