import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from insulopt.mesh import generate_disc, generate_square  # noqa: E402

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def disc(level):
    return generate_disc(1.0, level)


@functools.lru_cache(maxsize=None)
def square(n):
    return generate_square(n)


@pytest.fixture
def disc3():
    return disc(3)


@pytest.fixture
def square8():
    return square(8)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
