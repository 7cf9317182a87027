"""Shared solves, computed once per session."""
import math

import pytest

from hotspots.geometry import rectangle_spec, triangle_spec
from hotspots.verify import analyze


@pytest.fixture(scope="session")
def square_top():
    """Unit square with D = top edge at h = 1/32."""
    return analyze(rectangle_spec(1, 1, ["top"]), 1 / 32)


@pytest.fixture(scope="session")
def square_sides():
    """Unit square with D = left and right edges at h = 1/32."""
    return analyze(rectangle_spec(1, 1, ["left", "right"]), 1 / 32)


@pytest.fixture(scope="session")
def right_isosceles():
    """(0,0),(1,0),(1,1) with D = the leg x = 1, at h = 1/32."""
    spec, _ = triangle_spec((0, 0), (1, 0), (1, 1), [1])
    return analyze(spec, 1 / 32)


@pytest.fixture(scope="session")
def obtuse_scalene():
    """Obtuse Neumann vertex, D = the base, at h = 1/64."""
    spec, _ = triangle_spec((0, 0), (1, 0), (0.2, 0.1), [0])
    return analyze(spec, 1 / 64)


def square_oracle_lambda():
    return math.pi ** 2 / 4


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts as one block at the end of the run."""
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(verdicts):
        terminalreporter.write_line(verdicts[k])
