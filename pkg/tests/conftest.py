"""Shared problem definitions for the test-suite."""
from __future__ import annotations

import math
from typing import List

import pytest

from src.problem.model import Problem
from src.problem.nonlinearity import NonlinearitySpec
from src.problem.weights import WeightSpec
from src.solvers.orbits import PeriodicOrbit
from src.solvers.search import find_two_solutions
from src.solvers.shooting import PeriodicSolver


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: long-running numerical checks")


@pytest.fixture(scope="session")
def trig_problem() -> Problem:
    weight = WeightSpec.trig(1.0, math.pi / 4, -math.sqrt(2) / 2)
    return Problem(weight, NonlinearitySpec.power(3.0))


@pytest.fixture(scope="session")
def step_problem() -> Problem:
    weight = WeightSpec.piecewise((0.0, 1.0, 2.0, 3.0, 10.0), (1.0, 0.0, 1.0, -2.0))
    return Problem(weight, NonlinearitySpec.power(2.0))


@pytest.fixture(scope="session")
def trig_solver(trig_problem: Problem) -> PeriodicSolver:
    return PeriodicSolver(trig_problem)


@pytest.fixture(scope="session")
def trig_orbits(trig_solver: PeriodicSolver) -> List[PeriodicOrbit]:
    return find_two_solutions(trig_solver, 2.0)
