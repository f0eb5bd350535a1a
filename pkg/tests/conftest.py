import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")


@pytest.fixture
def grid8():
    from geostrichartz.spectral import GridSpec

    return GridSpec(math.pi, 8)


@pytest.fixture
def grid16():
    from geostrichartz.spectral import GridSpec

    return GridSpec(2 * math.pi, 16)


def single_mode(grid, index, value=1.0, components=1):
    """Field with one nonzero coefficient at lattice index (i, j, k) (centered)."""
    from geostrichartz.spectral import SpectralField

    c = np.zeros((components,) + grid.shape, dtype=complex)
    h = grid.n // 2
    c[(slice(None),) + tuple(h + i for i in index)] = value
    return SpectralField(grid, c)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> bool:
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
