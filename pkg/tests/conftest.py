import itertools

import pytest

from qorch.domain import KnapsackProblem, SchedulingProblem

FIVE_BY_TWO = SchedulingProblem(num_shifts=5, num_agents=2)
CARGO = KnapsackProblem(values=(6, 10, 12), weights=(1, 2, 3), capacity=5)


def bitstrings(n):
    return ["".join(b) for b in itertools.product("01", repeat=n)]


@pytest.fixture
def five_by_two():
    return FIVE_BY_TWO


@pytest.fixture
def cargo():
    return CARGO


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
