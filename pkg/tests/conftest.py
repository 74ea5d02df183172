import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from volterra_ulam.core import Problem, WeightFunction, make_grid  # noqa: E402
from volterra_ulam.kernels import PRESETS  # noqa: E402


def preset_problem(name, n=1000):
    pre = PRESETS[name]
    return Problem(pre.kernel, make_grid(pre.t0, pre.r, n), pre.lipschitz)


@pytest.fixture
def jung():
    return preset_problem("jung-example")


@pytest.fixture
def growth():
    return preset_problem("exp-growth")


@pytest.fixture
def unit_weight():
    return WeightFunction.constant(1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
