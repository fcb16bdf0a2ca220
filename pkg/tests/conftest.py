import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import random

import pytest

from treebandit import games


@pytest.fixture(scope="session")
def kuhn3_uniform():
    spec = games.GameSpec("kuhn3", "x")
    opp = games.builtin_opponent(spec, "uniform")
    return games.compile(spec, opp)


@pytest.fixture(scope="session")
def kuhn3_nash():
    spec = games.GameSpec("kuhn3", "x")
    opp = games.builtin_opponent(spec, "kuhn_nash", alpha=1.0 / 3.0)
    return games.compile(spec, opp)


@pytest.fixture()
def rng():
    return random.Random(20240817)
