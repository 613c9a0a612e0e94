import random

import numpy as np
import pytest

from osgp import problems
from osgp.genops import ptc2
from osgp.trees import ConstantSampler, PrimitiveSet


@pytest.fixture
def arith():
    return PrimitiveSet.build(problems.ARITHMETIC, ["x1", "x2", "x3"])


@pytest.fixture
def extended():
    return PrimitiveSet.build(problems.EXTENDED, ["x1", "x2", "x3"], ConstantSampler(-20.0, 20.0))


def random_trees(prims, count, lo=1, hi=30, seed=0):
    rng = random.Random(seed)
    return [ptc2(rng, rng.randint(lo, hi), prims) for _ in range(count)]


def small_dataset(rows=20, width=3, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.uniform(-2, 2, size=(rows, width + 1))
    names = tuple(f"x{i}" for i in range(1, width + 1)) + ("y",)
    return problems.Dataset(names, data, width)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
