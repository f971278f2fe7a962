from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from setdyn.errors import DomainError, UnsupportedError
from setdyn.space import MetricSpace, ball, diameter, distance, geodesic_arc


def test_interval_distance():
    S = MetricSpace.interval(100)
    assert distance(S, S.point(0.25), S.point(0.75)) == F(1, 2)


def test_circle_distance_wraps():
    S = MetricSpace.circle(10)
    assert distance(S, S.point(0.1), S.point(0.9)) == F(1, 5)


def test_torus_max_and_l2():
    S = MetricSpace.torus(16)
    assert distance(S, S.point(0, 0), S.point(0.5, 0.5)) == F(1, 2)
    L = MetricSpace.torus(16, metric="l2")
    assert distance(L, L.point(0, 0), L.point(0.5, 0.5)) == pytest.approx(2 ** 0.5 / 2)


def test_points_from_different_spaces():
    a, b = MetricSpace.circle(8), MetricSpace.circle(8)
    with pytest.raises(DomainError):
        distance(a, a.point(0), b.point(0))


def test_ball_examples():
    S = MetricSpace.interval(10)
    assert ball(S, S.point(0.5), 0).indices.tolist() == [5]
    assert ball(S, S.point(0.5), F(1, 10)).indices.tolist() == [4, 5, 6]
    C = MetricSpace.circle(10)
    assert sorted(C.coords(i)[0] for i in ball(C, C.point(0), 0.15).indices) == \
        [0, F(1, 10), F(9, 10)]


def test_ball_nested():
    S = MetricSpace.torus(12)
    c = S.point(F(1, 3), F(1, 4))
    small = set(ball(S, c, F(1, 12)).indices)
    big = set(ball(S, c, F(1, 4)).indices)
    assert small <= big and c.index in small


def test_geodesic_examples():
    S = MetricSpace.interval(8)
    arc = geodesic_arc(S, S.point(0), S.point(1), 2)
    assert [p.coords[0] for p in arc] == [0, F(1, 4), F(1, 2), F(3, 4), 1]
    C = MetricSpace.circle(10)
    arc = geodesic_arc(C, C.point(0), C.point(0.4), 1)
    assert [p.coords[0] for p in arc] == [0, F(1, 5), F(2, 5)]
    p = S.point(F(1, 8))
    assert geodesic_arc(S, p, p, 3) == [p]


def test_geodesic_finite_needs_midpoints(line_space):
    with pytest.raises(UnsupportedError):
        geodesic_arc(line_space, line_space.point("a"), line_space.point("e"), 1)


def test_diameter_examples():
    S = MetricSpace.interval(10)
    assert diameter(S, S.compact_set([0.3])) == 0
    assert diameter(S, S.compact_set([0, 0.3, 1])) == 1
    C = MetricSpace.circle(10)
    assert diameter(C, C.compact_set([0, 0.4, 0.6])) == F(2, 5)


def test_finite_table_validation():
    with pytest.raises(DomainError):
        MetricSpace.finite(["a", "b", "c"], [[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(DomainError):
        MetricSpace.finite(["a", "b"], [[0, 1], [2, 0]])


@pytest.mark.parametrize("space", [MetricSpace.interval(37), MetricSpace.circle(40),
                                   MetricSpace.torus(9), MetricSpace.torus(9, metric="l2")],
                         ids=repr)
def test_metric_axioms_random_triples(space):
    rng = np.random.default_rng(3)
    i, j, k = rng.integers(0, space.n, size=(3, 10_000))
    dij = space.dist_units(i, j)
    assert np.array_equal(dij, space.dist_units(j, i))
    assert np.all((dij == 0) == (i == j))
    if space.squared:
        r = np.sqrt
        assert np.all(r(dij) <= r(space.dist_units(i, k)) + r(space.dist_units(k, j)) + 1e-12)
    else:
        assert np.all(dij <= space.dist_units(i, k) + space.dist_units(k, j))


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(["interval", "circle", "torus"]), G=st.integers(8, 64),
       depth=st.integers(1, 6), seed=st.integers(0, 10_000))
def test_geodesic_additivity(kind, G, depth, seed):
    S = getattr(MetricSpace, kind)(G)
    rng = np.random.default_rng(seed)
    p, q = (S.point_at(int(v)) for v in rng.integers(0, S.n, size=2))
    arc = geodesic_arc(S, p, q, depth)
    total = distance(S, p, q)
    for r in arc:
        assert abs(distance(S, p, r) + distance(S, r, q) - total) <= F(2, G)
