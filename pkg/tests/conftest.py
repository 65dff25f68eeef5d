from __future__ import annotations

import pytest

from longcycle.multigraph import Multigraph


@pytest.fixture
def theta():
    # a=0, b=1 joined by paths of lengths 2, 2, 3 (interior vertices 2, 3, 4, 5)
    return Multigraph.from_edges(6, [(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 5), (5, 1)])


@pytest.fixture
def k4():
    return Multigraph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


@pytest.fixture
def dumbbell():
    # two triangles sharing vertex 0
    return Multigraph.from_edges(5, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)])


# Lines recorded by the acceptance suite, echoed in the terminal summary so they
# show up without ``-s``.
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(criterion: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
