from fractions import Fraction as F

import numpy as np
import pytest

from conftest import random_finite_space, random_relation
from setdyn.errors import DomainError, TotalityError
from setdyn.measure import (exact_limit, selection_kernel, stationary_distribution,
                            verify_invariance)
from setdyn.relation import doubling, finite_relation, identity
from setdyn.space import MetricSpace


def brute_invariance(Fm, weights):
    """Every subset of a tiny space, computed with plain loops."""
    n = Fm.space.n
    for mask in range(1 << n):
        B = {i for i in range(n) if mask >> i & 1}
        pre = {x for x in range(n) if set(Fm.row(x).tolist()) & B}
        if sum(weights[i] for i in B) > sum(weights[i] for i in pre):
            return False
    return True


@pytest.fixture
def two_state():
    S = MetricSpace.finite(["a", "b"], [[0, 1], [1, 0]])
    return finite_relation(S, [(0, 0), (0, 1), (1, 0)])


def test_kernel_rows_sum_to_one(two_state):
    K = selection_kernel(two_state)
    assert K.weights == [F(1, 2), F(1, 2), F(1)]
    assert np.allclose(K.matrix().sum(axis=1), 1)


def test_weighted_kernel(two_state):
    K = selection_kernel(two_state, "weighted", [1, 3, 2])
    assert K.weights == [F(1, 4), F(3, 4), F(1)]
    with pytest.raises(DomainError):
        selection_kernel(two_state, "weighted", [0, 0, 1])
    with pytest.raises(DomainError):
        selection_kernel(two_state, "weighted", [1, 1])


def test_kernel_needs_total_relation():
    S = MetricSpace.finite(["a", "b"], [[0, 1], [1, 0]])
    with pytest.raises(TotalityError):
        selection_kernel(finite_relation(S, [(0, 1)]))


def test_two_state_measure(two_state):
    mu = stationary_distribution(selection_kernel(two_state))
    assert mu.converged
    assert mu.exact == [F(2, 3), F(1, 3)]
    assert np.allclose(mu.weights, [2 / 3, 1 / 3])
    rep = verify_invariance(two_state, mu)
    assert rep.passed and rep.exhaustive and rep.exact and rep.tested == 4


def test_identity_measure_uniform():
    S = MetricSpace.circle(8)
    mu = stationary_distribution(selection_kernel(identity(S)))
    assert mu.exact == [F(1, 8)] * 8


def test_doubling_grid_measure_lives_on_recurrent_points():
    # on the grid 2z and 2z + 1/2 are even, so odd points are transient
    S = MetricSpace.circle(8)
    D = doubling(S)
    mu = stationary_distribution(selection_kernel(D))
    assert mu.exact == [F(1, 2), 0, 0, 0, F(1, 2), 0, 0, 0]
    assert verify_invariance(D, mu).passed


def test_periodic_chain_converges_with_damping():
    S = MetricSpace.finite(["a", "b"], [[0, 1], [1, 0]])
    swap = finite_relation(S, [(0, 1), (1, 0)])
    mu = stationary_distribution(selection_kernel(swap))
    assert mu.converged and mu.exact == [F(1, 2), F(1, 2)]


def test_exact_limit_matches_power_iteration():
    rng = np.random.default_rng(8)
    for _ in range(20):
        S = random_finite_space(rng, 9)
        R = random_relation(rng, S)
        K = selection_kernel(R)
        ex = exact_limit(K)
        assert sum(ex) == 1
        mu = stationary_distribution(K, exact=False)
        assert np.allclose([float(v) for v in ex], mu.weights, atol=1e-9)


def test_invariance_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(30):
        S = random_finite_space(rng, 7)
        R = random_relation(rng, S)
        mu = stationary_distribution(selection_kernel(R))
        rep = verify_invariance(R, mu)
        assert rep.passed == brute_invariance(R, mu.exact) is True


def test_invariance_detects_bad_measure(two_state):
    mu = stationary_distribution(selection_kernel(two_state))
    mu.exact = [F(0), F(1)]
    rep = verify_invariance(two_state, mu)
    assert not rep.passed
    # B = {b} has preimage {a}, which carries no mass
    assert rep.worst_mask == 0b10 and rep.worst_margin == -1
    assert brute_invariance(two_state, mu.exact) is False


def test_random_subset_mode():
    rng = np.random.default_rng(1)
    S = random_finite_space(rng, 30)
    R = random_relation(rng, S)
    mu = stationary_distribution(selection_kernel(R))
    assert mu.exact is not None
    rep = verify_invariance(R, mu, subsets=("random", 200, 0))
    assert rep.passed and not rep.exhaustive and rep.tested == 200 + 60
    with pytest.raises(DomainError):
        verify_invariance(R, mu)


def test_float_measure_on_large_space():
    S = MetricSpace.circle(256)
    D = doubling(S)
    mu = stationary_distribution(selection_kernel(D))
    assert mu.exact is None and mu.converged
    assert mu.weights.sum() == pytest.approx(1)
    rep = verify_invariance(D, mu, subsets=("random", 100, 2))
    assert rep.passed and not rep.exact
