"""Invariant measures from Markov selections and the invariance inequality
mu(B) <= mu(F^-1(B)).

A selection kernel P puts its mass for x inside F(x). Any stationary mu of
P is invariant in the set-valued sense, since
mu(B) = sum_x mu(x) P(x, B) and P(x, B) > 0 only when x is in F^-1(B).
The power iteration gives a float measure; on small spaces the limit of the
same iteration from the uniform start is also computed exactly (recurrent
classes plus absorption probabilities, in fractions), and that exact
measure is what the invariance check uses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, TotalityError

EXHAUSTIVE_LIMIT = 20
EXACT_LIMIT = 64


@dataclass
class SelectionKernel:
    """Row-stochastic weights on the pairs of ``F`` (same CSR layout)."""

    F: object
    weights: list  # Fractions aligned with F.targets
    scheme: str

    def matrix(self):
        w = np.array([float(v) for v in self.weights])
        n = self.F.space.n
        return sp.csr_matrix((w, self.F.targets, self.F.indptr), shape=(n, n))

    def row(self, i):
        a, b = self.F.indptr[i], self.F.indptr[i + 1]
        return self.F.targets[a:b], self.weights[a:b]

    def dense_exact(self):
        n = self.F.space.n
        P = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            for j, w in zip(*self.row(i)):
                P[i][int(j)] = w
        return P


def selection_kernel(F, scheme="uniform", weights=None):
    """Markov selection of ``F``.

    ``uniform`` puts 1/|F(x)| on each image point. ``weighted`` takes
    nonnegative ``weights`` aligned with ``F.pairs()`` and normalizes each
    row; a row of zero weights is an error.
    """
    if not F.total:
        bad = int(np.flatnonzero(F.row_sizes == 0)[0])
        raise TotalityError(f"F({F._label(bad)}) is empty; no selection exists",
                            point=F.space.point_at(bad))
    sizes = F.row_sizes
    if scheme == "uniform":
        w = [Fraction(1, int(s)) for s in np.repeat(sizes, sizes)]
    elif scheme == "weighted":
        if weights is None or len(weights) != F.targets.size:
            raise DomainError("weighted scheme needs one weight per pair of F")
        raw = [Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(10**12)
               for v in weights]
        if any(v < 0 for v in raw):
            raise DomainError("selection weights must be nonnegative")
        w = []
        for i in range(F.space.n):
            a, b = F.indptr[i], F.indptr[i + 1]
            tot = sum(raw[a:b], Fraction(0))
            if tot == 0:
                raise DomainError(f"selection weights of row {F._label(i)} sum to zero")
            w += [v / tot for v in raw[a:b]]
    else:
        raise DomainError(f"unknown selection scheme {scheme!r}")
    return SelectionKernel(F, w, scheme)


@dataclass
class Measure:
    """Probability vector on the space points."""

    space: object
    weights: np.ndarray
    residual: float
    converged: bool
    iterations: int
    exact: list | None = None
    notes: list = field(default_factory=list)

    def mass(self, mask):
        """mu of a boolean point mask, exact when possible."""
        mask = np.asarray(mask, dtype=bool)
        if self.exact is not None:
            return sum((self.exact[i] for i in np.flatnonzero(mask)), Fraction(0))
        return float(self.weights[mask].sum())


def _solve(A, b):
    """Gaussian elimination over fractions; A square and nonsingular.

    ``b`` is a vector or a list of right-hand-side columns.
    """
    n = len(A)
    cols = b if b and isinstance(b[0], list) else [b]
    M = [list(row) + [c[r] for c in cols] for r, row in enumerate(A)]
    for c in range(n):
        p = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[p] = M[p], M[c]
        inv = 1 / M[c][c]
        M[c] = [v * inv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    out = [[M[r][n + c] for r in range(n)] for c in range(len(cols))]
    return out if cols is b else out[0]


def _class_stationary(P, cls):
    """Stationary vector of the closed class ``cls`` (irreducible)."""
    k = len(cls)
    if k == 1:
        return [Fraction(1)]
    # pi (P_c - I) = 0 with sum(pi) = 1: replace the last equation
    A = [[P[cls[j]][cls[i]] - (1 if i == j else 0) for j in range(k)] for i in range(k)]
    A[-1] = [Fraction(1)] * k
    b = [Fraction(0)] * (k - 1) + [Fraction(1)]
    return _solve(A, b)


def exact_limit(kernel):
    """Exact limit of the lazy power iteration from the uniform start."""
    P = kernel.dense_exact()
    n = len(P)
    m = kernel.matrix()
    ncomp, lab = connected_components(m, directed=True, connection="strong")
    comps = [list(np.flatnonzero(lab == c)) for c in range(ncomp)]
    closed = []
    for c in comps:
        members = set(c)
        if all(int(j) in members for i in c for j in kernel.row(i)[0]):
            closed.append(c)
    recurrent = {i for c in closed for i in c}
    transient = [i for i in range(n) if i not in recurrent]
    mu = [Fraction(0)] * n
    start = Fraction(1, n)
    absorb = [[Fraction(0)] * 0 for _ in closed]
    if transient:
        # absorption probabilities into each closed class from transient states
        A = [[(1 if a == b else 0) - P[x][y] for b, y in enumerate(transient)]
             for a, x in enumerate(transient)]
        rhs = [[sum((P[x][y] for y in c), Fraction(0)) for x in transient] for c in closed]
        absorb = _solve(A, rhs)
    for c, ab in zip(closed, absorb):
        pi = _class_stationary(P, c)
        mass = start * (len(c) + sum(ab, Fraction(0)))
        for i, p in zip(c, pi):
            mu[i] += mass * p
    return mu


def stationary_distribution(kernel, tol=1e-12, max_iters=100_000, damping=Fraction(1, 2),
                            exact=None):
    """Power iteration mu <- (1 - d) mu + d mu P from the uniform start.

    The damping keeps periodic chains convergent without changing the
    stationary vectors. ``exact`` (default: spaces up to EXACT_LIMIT points)
    also computes the exact limit; its defect against the float iterate is
    recorded in the notes.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    d = float(damping)
    if not 0 < d <= 1:
        raise DomainError("damping must lie in (0, 1]")
    n = kernel.F.space.n
    P = kernel.matrix().tocsc()
    PT = P.T.tocsr()
    mu = np.full(n, 1.0 / n)
    res = np.inf
    it = 0
    for it in range(1, int(max_iters) + 1):
        step = PT @ mu
        res = float(np.abs(step - mu).sum())
        if res <= tol:
            break
        mu = (1 - d) * mu + d * step
        mu /= mu.sum()
    converged = res <= tol
    notes = []
    if not converged:
        notes.append(f"no convergence after {max_iters} iterations; residual {res:.3e}")
    if exact is None:
        exact = n <= EXACT_LIMIT
    ex = None
    if exact:
        ex = exact_limit(kernel)
        gap = float(np.abs(np.array([float(v) for v in ex]) - mu).sum())
        notes.append(f"exact limit differs from the iterate by {gap:.3e} in l1")
    return Measure(kernel.F.space, mu, res, converged, it, ex, notes)


@dataclass
class InvarianceReport:
    """mu(B) <= mu(F^-1(B)) over the tested subsets B.

    Subsets are bit masks over the point indices (bit i = point i).
    ``worst`` is the tested subset with the smallest margin.
    """

    tested: int
    exhaustive: bool
    exact: bool
    worst_mask: int
    worst_margin: object
    violations: list
    sample_rows: list

    @property
    def passed(self):
        return not self.violations


def _int_weights(mu):
    den = lcm(*[v.denominator for v in mu]) if mu else 1
    return [int(v * den) for v in mu], den


def verify_invariance(F, mu, subsets="exhaustive", max_rows=64):
    """Check the invariance inequality on subsets of a finite space.

    ``subsets`` is ``"exhaustive"`` (all 2^|X| subsets, |X| <= 20) or
    ``("random", count, seed)``, which also adds every singleton and every
    complement of a singleton. Exact rational arithmetic is used when the
    measure carries exact weights.
    """
    space = F.space
    n = space.n
    exact = mu.exact is not None
    inv = F.inverse()
    pre_bits = [0] * n
    for y in range(n):
        for x in inv.row(y):
            pre_bits[y] |= 1 << int(x)
    if subsets == "exhaustive":
        if n > EXHAUSTIVE_LIMIT:
            raise DomainError(f"exhaustive verification needs at most {EXHAUSTIVE_LIMIT} points")
        return _exhaustive(n, mu, pre_bits, exact, max_rows)
    if isinstance(subsets, (tuple, list)) and subsets and subsets[0] == "random":
        _, count, seed = subsets
        rng = np.random.default_rng(seed)
        full = (1 << n) - 1
        masks = [1 << i for i in range(n)] + [full ^ (1 << i) for i in range(n)]
        for _ in range(int(count)):
            bits = rng.random(n) < 0.5
            masks.append(sum(1 << int(i) for i in np.flatnonzero(bits)))
        return _listed(n, mu, pre_bits, exact, masks, max_rows)
    raise DomainError(f"unknown subset mode {subsets!r}")


def _preimage_mask(mask, pre_bits):
    out = 0
    i = 0
    while mask:
        if mask & 1:
            out |= pre_bits[i]
        mask >>= 1
        i += 1
    return out


def _listed(n, mu, pre_bits, exact, masks, max_rows):
    w = list(mu.exact) if exact else [float(v) for v in mu.weights]
    tol = 0 if exact else 1e-12

    def m(mask):
        return sum((w[i] for i in range(n) if mask >> i & 1), Fraction(0) if exact else 0.0)

    worst, worst_mask, bad, rows = None, 0, [], []
    for b in masks:
        pb = _preimage_mask(b, pre_bits)
        mb, mp = m(b), m(pb)
        margin = mp - mb
        if len(rows) < max_rows:
            rows.append((b, mb, mp, margin))
        if worst is None or margin < worst:
            worst, worst_mask = margin, b
        if margin < -tol:
            bad.append((b, mb, mp, margin))
    return InvarianceReport(len(masks), False, exact, worst_mask, worst, bad, rows)


def _exhaustive(n, mu, pre_bits, exact, max_rows):
    if exact:
        iw, den = _int_weights(list(mu.exact))
        dtype = np.int64 if den < 2**62 // max(1, n) else object
    else:
        iw, den = [float(v) for v in mu.weights], 1
        dtype = float
    size = 1 << n
    M = np.zeros(size, dtype=dtype)
    pre = np.zeros(size, dtype=np.int64)
    # subset sums and preimage masks by doubling over the lowest bits
    for k in range(n):
        h = 1 << k
        M[h:2 * h] = M[:h] + iw[k]
        pre[h:2 * h] = pre[:h] | pre_bits[k]
    margin = M[pre] - M
    tol = 0 if exact else 1e-12
    k = int(np.argmin(margin))
    bad_idx = np.flatnonzero(margin < -tol) if dtype is not object else \
        [i for i in range(size) if margin[i] < 0]

    def val(v):
        return Fraction(int(v), den) if exact else float(v)

    bad = [(int(i), val(M[i]), val(M[pre[i]]), val(margin[i])) for i in bad_idx]
    rows = [(int(i), val(M[i]), val(M[pre[i]]), val(margin[i])) for i in range(min(size, max_rows))]
    return InvarianceReport(size, True, exact, k, val(margin[k]), bad, rows)
