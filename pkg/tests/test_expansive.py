from fractions import Fraction as F

import numpy as np
import pytest

from setdyn.errors import DomainError, InconclusiveError
from setdyn.expansive import (INCONCLUSIVE, REFUTED, VERIFIED, check_positive_expansive,
                              check_rw_expansive, separation_time, uniform_bounds)
from setdyn.relation import (circle_squaring, countable_example, doubling, finite_relation,
                             identity, torus_two_branch)
from setdyn.space import MetricSpace


@pytest.fixture(scope="module")
def torus16():
    T = MetricSpace.torus(16)
    return T, torus_two_branch(T)


def test_separation_time_doubling():
    S = MetricSpace.circle(100)
    D = doubling(S)
    # d_H(F^n 0, F^n 0.01) = 0.01, 0.02, 0.04, 0.08, 0.16, 0.18, 0.14, 0.22
    assert separation_time(D, S.point(0), S.point(0.01), 0.2, 20) == 7
    assert separation_time(D, S.point(0), S.point(0.01), 0.2, 6) is None


def test_separation_time_examples(torus16):
    T, M = torus16
    assert separation_time(M, T.point(0, 0), T.point(0.3, 0), F(1, 4), 5) == 0
    S = MetricSpace.circle(32)
    assert separation_time(identity(S), S.point(0), S.point(F(1, 16)), F(1, 8), 50) is None
    with pytest.raises(DomainError):
        separation_time(identity(S), S.point(0), S.point(0), F(1, 8), 5)


def test_separation_time_monotone_in_alpha():
    S = MetricSpace.circle(64)
    D = doubling(S)
    rng = np.random.default_rng(0)
    alphas = [F(1, 16), F(1, 8), F(3, 16), F(1, 5)]
    for _ in range(100):
        i, j = rng.choice(64, 2, replace=False)
        x, y = S.point_at(int(i)), S.point_at(int(j))
        ts = [separation_time(D, x, y, a, 12) for a in alphas]
        seen = [t for t in ts if t is not None]
        assert seen == sorted(seen)


def test_torus_at_quarter_is_refuted_by_merging_pairs(torus16):
    T, M = torus16
    v = check_positive_expansive(M, F(1, 4), 12)
    # (x, y) and (x, y + 1/4) have identical images
    assert v.status == REFUTED and v.n_counterexamples > 0
    x, y = T.point(0, 0), T.point(0, F(1, 4))
    assert M.row(x.index).tolist() == M.row(y.index).tolist()
    assert separation_time(M, x, y, F(1, 4), 12) is None


def test_torus_below_quarter_verified(torus16):
    T, M = torus16
    v = check_positive_expansive(M, F(1, 5), 12)
    assert v.status == VERIFIED and not v.counterexamples
    assert v.pairs_checked == T.n * (T.n - 1) // 2


def test_verified_downward_closed(torus16):
    T, M = torus16
    for a in (F(1, 5), F(1, 8), F(1, 16)):
        assert check_positive_expansive(M, a, 12).verified


def test_countable_example_verified():
    E = countable_example()
    v = check_positive_expansive(E, E.meta["alpha"], 2 * E.meta["J"] + 2)
    assert v.status == VERIFIED
    assert v.max_witness_time is not None
    short = check_positive_expansive(E, E.meta["alpha"], 5)
    assert short.status == INCONCLUSIVE


def test_identity_refuted():
    S = MetricSpace.circle(32)
    v = check_positive_expansive(identity(S), F(1, 8), 5)
    assert v.status == REFUTED and v.counterexamples


def test_sampled_pairs_reproducible():
    S = MetricSpace.circle(256)
    D = doubling(S)
    a = check_positive_expansive(D, F(1, 8), 12, pairs=("sampled", 500, 7))
    b = check_positive_expansive(D, F(1, 8), 12, pairs=("sampled", 500, 7))
    assert not a.exhaustive
    assert np.array_equal(a.witness_times, b.witness_times)


def test_threads_do_not_change_results():
    S = MetricSpace.circle(128)
    D = doubling(S)
    a = check_positive_expansive(D, F(1, 8), 12, threads=1)
    b = check_positive_expansive(D, F(1, 8), 12, threads=4)
    assert np.array_equal(a.witness_pairs, b.witness_pairs)
    assert np.array_equal(a.witness_times, b.witness_times)


@pytest.mark.parametrize("build,kind", [(doubling, "circle"), (circle_squaring, "circle"),
                                        (doubling, "interval")])
def test_rw_verified(build, kind):
    S = getattr(MetricSpace, kind)(64)
    r = check_rw_expansive(build(S), F(1, 8), 8)
    assert r.status == VERIFIED and r.necessary_condition


def test_rw_refuted_by_merging_pair():
    S = MetricSpace.finite(list("abc"), [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    # a and b share an image point and a preimage point
    R = finite_relation(S, [(0, 2), (1, 2), (2, 0), (2, 1)])
    r = check_rw_expansive(R, 2, 6)
    assert r.status == REFUTED and not r.necessary_condition and r.witness is not None


def test_uniform_bounds_doubling():
    S = MetricSpace.circle(100)
    ub = uniform_bounds(doubling(S), 0.2, 0.1, 12)
    assert ub.n0 >= 1 and ub.N2 >= 1
    p, q = ub.n0_pair
    assert separation_time(doubling(S), p, q, 0.2, 12, strict=False) == ub.n0


def test_uniform_bounds_torus(torus16):
    T, M = torus16
    for alpha in (F(1, 4), F(1, 5)):
        ub = uniform_bounds(M, alpha, F(1, 4), 12)
        assert ub.n0 <= 2 and ub.band_hits > 0


def test_uniform_bounds_identity_inconclusive():
    S = MetricSpace.circle(100)
    with pytest.raises(InconclusiveError):
        uniform_bounds(identity(S), 0.2, 0.1, 5)
