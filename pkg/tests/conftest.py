from fractions import Fraction

import numpy as np
import pytest

from setdyn.relation import doubling, identity, torus_two_branch
from setdyn.space import MetricSpace


@pytest.fixture
def circle256():
    return MetricSpace.circle(256)


@pytest.fixture
def dbl256(circle256):
    return doubling(circle256)


@pytest.fixture
def line_space():
    # five points on a line at 0, 1, 3, 4, 7
    c = np.array([0, 1, 3, 4, 7])
    return MetricSpace.finite(list("abcde"), np.abs(c[:, None] - c[None, :]).tolist())


def random_finite_space(rng, n, spread=1000):
    """Finite space from distinct integer positions on a line."""
    pos = rng.choice(spread, size=n, replace=False)
    return MetricSpace.finite([f"p{i}" for i in range(n)],
                              np.abs(pos[:, None] - pos[None, :]).tolist())


def random_relation(rng, space, max_out=3):
    from setdyn.relation import finite_relation
    n = space.n
    pairs = []
    for i in range(n):
        k = int(rng.integers(1, min(n, max_out) + 1))
        pairs += [(i, int(j)) for j in rng.choice(n, size=k, replace=False)]
    return finite_relation(space, pairs)


F = Fraction
