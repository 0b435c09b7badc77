from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from angelesco.equilibrium import solve_vector_equilibrium
from angelesco.weights import AngelescoSystem, SingularPoint, WeightSpec

settings.register_profile("repo", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

SYMMETRIC = [(-1.0, -0.25), (0.25, 1.0)]
# component 2 (mass 0.3) is pushed off the left end of [0.05, 3]
PUSHED = [(-1.0, -0.05), (0.05, 3.0)]


def chebyshev_weight(interval=(-1.0, 1.0)):
    a, b = interval
    return WeightSpec(interval, singular=(SingularPoint(a, -0.5), SingularPoint(b, -0.5)))


@pytest.fixture(scope="session")
def cheb_system():
    return AngelescoSystem((chebyshev_weight(),))


@pytest.fixture(scope="session")
def sym_system():
    return AngelescoSystem(tuple(WeightSpec(iv) for iv in SYMMETRIC))


@pytest.fixture(scope="session")
def sym_solution():
    return solve_vector_equilibrium(SYMMETRIC, (0.5, 0.5))


@pytest.fixture(scope="session")
def pushed_solution():
    return solve_vector_equilibrium(PUSHED, (0.7, 0.3))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def acceptance_line(crit: int, ok: bool, detail: str) -> None:
    line = f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
