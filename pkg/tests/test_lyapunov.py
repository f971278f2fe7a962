import math
from fractions import Fraction as F

import numpy as np
import pytest

from setdyn.errors import DomainError
from setdyn.hausdorff import hausdorff_brute
from setdyn.lyapunov import (NbhdSpec, exponent_estimate, growth_extremes, sample_bstar,
                             subadditivity_check, weighted_growth)
from setdyn.relation import (countable_example, doubling, finite_relation, identity, iterate,
                             torus_two_branch)
from setdyn.space import MetricSpace, distance

LOG2 = math.log(2)


def brute_singletons(Fm, x, delta, n):
    S = Fm.space
    out = []
    for y in S.points():
        if y == x:
            continue
        if all(hausdorff_brute(S, iterate(Fm, j, x), iterate(Fm, j, y)) <= delta
               for j in range(n + 1)):
            out.append(y.index)
    return out


def test_spec_validation():
    with pytest.raises(DomainError):
        NbhdSpec(0, 3)
    with pytest.raises(DomainError):
        NbhdSpec(F(1, 8), -1)
    with pytest.raises(DomainError):
        NbhdSpec(F(1, 8), 3, family="balls")


def test_bstar_doubling_matches_brute_force():
    S = MetricSpace.circle(256)
    D = doubling(S)
    x = S.point(F(1, 8))
    got = sample_bstar(D, x, NbhdSpec(F(1, 10), 3, family="singletons_on_grid"))
    idx = sorted(int(A.indices[0]) for A in got)
    assert idx == brute_singletons(D, x, F(1, 10), 3)
    # 2^j dist <= 0.1 for j <= 3 means dist <= 0.0125, i.e. at most 3 grid steps
    assert all(distance(S, x, S.point_at(i)) <= F(1, 80) for i in idx)
    assert len(idx) == 6


def test_bstar_identity_and_horizon_zero():
    S = MetricSpace.circle(64)
    x = S.point(0)
    spec = NbhdSpec(F(1, 16), 5, family="singletons_on_grid")
    a = sample_bstar(identity(S), x, spec)
    b = sample_bstar(identity(S), x, NbhdSpec(F(1, 16), 0, family="singletons_on_grid"))
    assert len(a) == len(b) == 8
    D = doubling(S)
    zero = sample_bstar(D, x, NbhdSpec(F(1, 16), 0, family="singletons_on_grid"))
    assert len(zero) == 8


def test_bstar_excludes_K_and_respects_constraint():
    S = MetricSpace.torus(16)
    T = torus_two_branch(S)
    K = S.compact_set([(0, 0), (F(1, 2), F(1, 4))])
    smp = sample_bstar(T, K, NbhdSpec(F(1, 8), 2, family="mixed", count=32, seed=3))
    assert smp.candidates == len(smp) + smp.rejected
    for A in smp:
        assert set(A.indices) != set(K.indices)
        for j in range(3):
            assert hausdorff_brute(S, iterate(T, j, K), iterate(T, j, A)) <= F(1, 8)


def test_empty_sample_is_not_an_error():
    S = MetricSpace.circle(16)
    smp = sample_bstar(doubling(S), S.point(0), NbhdSpec(F(1, 32), 2, family="singletons_on_grid"))
    assert smp.empty and smp.rejected == smp.candidates


def test_growth_identity():
    S = MetricSpace.circle(64)
    g = growth_extremes(identity(S), S.point(0), NbhdSpec(F(1, 8), 4, family="singletons_on_grid"))
    assert all(r.H_exact == 1 and r.h_exact == 1 for r in g.records)


def test_growth_doubling_exact_powers():
    S = MetricSpace.circle(1024)
    g = growth_extremes(doubling(S), S.point(0), NbhdSpec(F(1, 8), 5, family="mixed"))
    for r in g.records:
        assert r.H_exact == 2 ** r.n
        assert r.H >= r.h >= 0


def test_zero_convention_and_persistence():
    S = MetricSpace.finite(list("abc"), [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    R = finite_relation(S, [(0, 2), (1, 2), (2, 0)])
    g = growth_extremes(R, S.point("a"), NbhdSpec(1, 3, family="singletons_on_grid"))
    assert g.records[1].zero_convention_hits >= 1 and g.records[1].h_exact == 0
    # once merged, always merged
    for r in g.records[1:]:
        if r is not None:
            assert r.zero_convention_hits >= g.records[1].zero_convention_hits


def test_quotients_bounded_by_lipschitz_powers():
    S = MetricSpace.torus(32)
    T = torus_two_branch(S)
    g = growth_extremes(T, S.point(F(1, 4), F(1, 8)), NbhdSpec(F(1, 8), 4, count=64, seed=1))
    for r in g.records:
        if r is not None:
            assert r.H_exact <= 2 ** r.n


def test_more_samples_never_lower_H():
    S = MetricSpace.circle(512)
    D = doubling(S)
    K = S.compact_set([0, F(1, 3)])
    small = growth_extremes(D, K, NbhdSpec(F(1, 8), 3, family="perturbed_copies", count=16, seed=5))
    big = growth_extremes(D, K, NbhdSpec(F(1, 8), 3, family="perturbed_copies", count=64, seed=5))
    for a, b in zip(small.records, big.records):
        if a is not None:
            assert b.H_exact >= a.H_exact


def test_exponent_doubling():
    S = MetricSpace.circle(4096)
    est = exponent_estimate(doubling(S), S.point(0), [F(1, 8), F(1, 16), F(1, 32)], 6)
    assert abs(est.chi_plus - LOG2) < 0.05
    assert est.lipschitz == 2 and est.lipschitz_ok
    # the literal backward formula: h shrinks by 1/2 per inverse step
    assert est.chi_minus == pytest.approx(-LOG2, abs=0.05)
    assert est.Lambda_plus[F(1, 8)] == pytest.approx(LOG2)


def test_exponent_identity():
    S = MetricSpace.circle(256)
    est = exponent_estimate(identity(S), S.point(0), [F(1, 8), F(1, 16)], 5)
    assert est.chi_plus == 0 and est.chi_minus == 0


def test_exponent_countable_example():
    E = countable_example()
    x = E.space.point_at(E.meta["x0"])
    est = exponent_estimate(E, x, [F(1, 2), F(1, 4), F(1, 8)], 10)
    assert abs(est.chi_plus) < 0.05


def test_exponent_needs_decreasing_deltas():
    S = MetricSpace.circle(64)
    with pytest.raises(DomainError):
        exponent_estimate(doubling(S), S.point(0), [F(1, 16), F(1, 8)], 4)


def test_subadditivity_doubling_exact():
    S = MetricSpace.circle(4096)
    rep = subadditivity_check(doubling(S), S.point(F(1, 7)), F(1, 8), [(2, 3), (1, 1), (4, 4)])
    assert rep.holds and rep.max_eps_stat == 0
    row = rep.rows[0]
    assert row.Y_nk == pytest.approx(5 * LOG2)
    assert row.Y_n + row.Y_shift_k == pytest.approx(5 * LOG2)


def test_subadditivity_identity():
    S = MetricSpace.circle(64)
    rep = subadditivity_check(identity(S), S.point(0), F(1, 8), [(1, 2), (3, 1)])
    assert rep.holds
    assert all(r.Y_nk == 0 and r.Y_n == 0 for r in rep.rows)


def test_weighted_growth_subadditive():
    S = MetricSpace.circle(1024)
    w = np.full(S.n, 1 / S.n)
    res = weighted_growth(doubling(S), w, F(1, 8), 5, n_points=8)
    assert not res.fekete_violations
    assert res.a[3] == pytest.approx(3 * LOG2)
