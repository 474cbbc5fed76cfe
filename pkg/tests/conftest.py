import sys

import numpy as np
import pytest

from shgcint.grid import Grid
from shgcint.medium import Scatterer


@pytest.fixture
def small_grid():
    return Grid(-3.0, 0.0, 0.05, 121, 121)


@pytest.fixture
def weak_scatterer():
    return Scatterer((0.3, 3.0), 0.1, 0.01, 0.01)


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
