import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spiral_sim import kernels
from spiral_sim.model import MovieItem, Persona

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(params=sorted(kernels.implementations()))
def impl(request):
    """Each kernel backend in turn."""
    return kernels.implementations()[request.param]


def make_movies(n, prefix="m"):
    return [
        MovieItem(f"{prefix}{i:03d}", f"Film {i}", ("Drama", "Thriller"),
                  f"An overview of film number {i}.", "2025-02-01")
        for i in range(n)
    ]


def make_personas(n):
    return [Persona(f"p{i:03d}", f"a person who likes topic{i} and reading") for i in range(n)]


@pytest.fixture
def movies():
    return make_movies(3)


@pytest.fixture
def personas():
    return make_personas(10)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(acceptance_log.LINES):
            terminalreporter.write_line(line)
