import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anonymixer.dataio import generate_toy_telemetry, minmax_normalize  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy15():
    """The 2-blob, 15-feature toy set (normalised) and its true labels."""
    raw, truth = generate_toy_telemetry(1, 400, 2, 15, 10.0)
    data, _ = minmax_normalize(raw)
    return data, truth


@pytest.fixture
def four_points():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    return x, np.array([0, 0, 1, 1])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
