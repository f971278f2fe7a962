"""Hausdorff distance on finite point sets, dynamical distances and the
weighted sequence metrics on suborbit windows.

All set distances are computed in the integer units of the owning space and
are therefore exact. ``directed_units`` picks between a vectorized
all-pairs evaluation and a bucketed nearest-neighbour search; both must give
identical results, and :func:`hausdorff_brute` is the plain double loop
used to check them.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .space import PointSet

# above this many point pairs the bucketed search is used on grid spaces
_BRUTE_PAIRS = 4096
_CHUNK_ELEMS = 1 << 22


def _indices(space, A):
    if isinstance(A, PointSet):
        if A.space is not space:
            raise DomainError("set belongs to a different space")
        if not len(A):
            raise DomainError("Hausdorff distance needs nonempty sets")
        return A.indices
    arr = np.asarray(A, dtype=np.int64)
    if not arr.size:
        raise DomainError("Hausdorff distance needs nonempty sets")
    return arr


def directed_brute_units(space, a, b):
    """max over ``a`` of the distance to ``b``, by full broadcasting."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    rows = max(1, _CHUNK_ELEMS // max(1, b.size))
    best = 0
    for s in range(0, a.size, rows):
        d = space.dist_units(a[s:s + rows, None], b[None, :])
        best = max(best, int(d.min(axis=1).max()))
    return best


def nearest_units(space, a, b):
    """Distance from each point of ``a`` to the set ``b``, via bucketing.

    Circle and interval use a sorted sweep; the torus buckets ``b`` by row
    and walks outward row by row until no closer row can exist. Finite
    spaces fall back to table lookups.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.unique(np.asarray(b, dtype=np.int64))
    if space.kind == "finite":
        rows = max(1, _CHUNK_ELEMS // max(1, b.size))
        out = np.empty(a.size, dtype=np.int64)
        for s in range(0, a.size, rows):
            out[s:s + rows] = space.dist_units(a[s:s + rows, None], b[None, :]).min(axis=1)
        return out
    if space.kind in ("interval", "circle"):
        m = b.size
        pos = np.searchsorted(b, a)
        if space.kind == "interval":
            hi = b[np.minimum(pos, m - 1)]
            lo = b[np.maximum(pos - 1, 0)]
        else:
            hi = b[pos % m]
            lo = b[(pos - 1) % m]
        return np.minimum(space.dist_units(a, hi), space.dist_units(a, lo))
    return _torus_nearest(space, a, b)


def _torus_nearest(space, a, b):
    G = space.grid
    bx, by = np.divmod(b, G)  # b sorted => sorted by (row, col)
    starts = np.searchsorted(bx, np.arange(G), side="left")
    ends = np.searchsorted(bx, np.arange(G), side="right")
    ax, ay = np.divmod(a, G)
    inf = np.iinfo(np.int64).max
    best = np.full(a.size, inf, dtype=np.int64)
    offsets = [0]
    for r in range(1, G // 2 + 1):
        offsets.append(r)
        if r != G - r:
            offsets.append(-r)
    for dr in offsets:
        ring = abs(dr)
        lb = ring * ring if space.squared else ring
        active = best > lb
        if not active.any():
            break
        qi = np.flatnonzero(active)
        row = (ax[qi] + dr) % G
        lo, hi = starts[row], ends[row]
        has = hi > lo
        if not has.any():
            continue
        qi, row, lo, hi = qi[has], row[has], lo[has], hi[has]
        pos = np.searchsorted(b, row * G + ay[qi])
        c1 = np.where(pos < hi, pos, lo)
        c2 = np.where(pos - 1 >= lo, pos - 1, hi - 1)
        dy1 = np.abs(by[c1] - ay[qi])
        dy2 = np.abs(by[c2] - ay[qi])
        dy = np.minimum(np.minimum(dy1, G - dy1), np.minimum(dy2, G - dy2))
        cost = ring * ring + dy * dy if space.squared else np.maximum(ring, dy)
        best[qi] = np.minimum(best[qi], cost)
    return best


def directed_units(space, a, b, method="auto"):
    """Directed Hausdorff excess of ``a`` over ``b`` in integer units."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if method == "auto":
        method = "brute" if space.kind == "finite" or a.size * b.size <= _BRUTE_PAIRS else "fast"
    if method == "brute":
        return directed_brute_units(space, a, b)
    if method == "fast":
        return int(nearest_units(space, a, b).max())
    raise DomainError(f"unknown method {method!r}")


def hausdorff_units(space, a, b, method="auto"):
    return max(directed_units(space, a, b, method), directed_units(space, b, a, method))


def hausdorff_distance(space, A, B, method="auto"):
    """Exact Hausdorff distance between two nonempty sets of ``space``."""
    a = _indices(space, A)
    b = _indices(space, B)
    return space.units_to_value(hausdorff_units(space, a, b, method))


def directed_distance(space, A, B):
    """sup over ``A`` of the distance to ``B``."""
    return space.units_to_value(directed_units(space, _indices(space, A), _indices(space, B)))


def hausdorff_brute(space, A, B):
    """Reference O(|A||B|) double loop over scalar distances."""
    a = [int(i) for i in _indices(space, A)]
    b = [int(i) for i in _indices(space, B)]
    d = space.unit_distance

    def excess(xs, ys):
        return max(min(d(x, y) for y in ys) for x in xs)

    return space.units_to_value(max(excess(a, b), excess(b, a)))


# -- families of sets --------------------------------------------------------

def pad_sets(sets):
    """Stack index arrays into a rectangle, padding each row with its first
    element (repeats change neither minima nor maxima)."""
    sizes = np.array([len(s) for s in sets], dtype=np.int64)
    if sizes.size == 0:
        return np.zeros((0, 1), dtype=np.int64)
    if sizes.min() == 0:
        raise DomainError("cannot pad an empty set")
    width = int(sizes.max())
    out = np.empty((len(sets), width), dtype=np.int64)
    for k, s in enumerate(sets):
        s = np.asarray(s, dtype=np.int64)
        out[k, :s.size] = s
        out[k, s.size:] = s[0]
    return out


def paired_hausdorff_units(space, P, Q):
    """Row-wise Hausdorff distances between padded set arrays ``P`` and ``Q``.

    ``P`` has shape (k, m1) and ``Q`` shape (k, m2); returns k unit counts.
    """
    P = np.asarray(P, dtype=np.int64)
    Q = np.asarray(Q, dtype=np.int64)
    k = P.shape[0]
    out = np.empty(k, dtype=np.int64)
    per = P.shape[1] * Q.shape[1]
    rows = max(1, _CHUNK_ELEMS // max(1, per))
    for s in range(0, k, rows):
        d = space.dist_units(P[s:s + rows, :, None], Q[s:s + rows, None, :])
        e1 = d.min(axis=2).max(axis=1)
        e2 = d.min(axis=1).max(axis=1)
        out[s:s + rows] = np.maximum(e1, e2)
    return out


def dynamical_distance(F, x, y, k):
    """max over j = 0..k of d_H(F^j(x), F^j(y)), with F^0(x) = {x}."""
    if int(k) < 0:
        raise DomainError("k must be nonnegative")
    space = F.space
    space.check(x)
    space.check(y)
    a = np.array([x.index])
    b = np.array([y.index])
    best = space.unit_distance(x.index, y.index)
    for _ in range(int(k)):
        a = F.image_indices(a)
        b = F.image_indices(b)
        best = max(best, hausdorff_units(space, a, b))
    return space.units_to_value(best)


# -- sequence metrics --------------------------------------------------------

@dataclass(frozen=True)
class PathPoint:
    """A finite window ``points[k]`` at times ``t_lo + k`` of a sequence."""

    points: tuple
    t_lo: int = 0

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise DomainError("a path window must be nonempty")
        space = pts[0].space
        if any(p.space is not space for p in pts):
            raise DomainError("path points belong to different spaces")
        object.__setattr__(self, "points", pts)

    @property
    def t_hi(self):
        return self.t_lo + len(self.points) - 1

    @property
    def space(self):
        return self.points[0].space


class PathDistance(NamedTuple):
    value: object
    tail_bound: object


def _weighted(space, units, weights):
    # weights are exact powers of two
    if space.squared:
        return sum(space.units_to_value(u) * float(w) for u, w in zip(units, weights))
    return sum((Fraction(int(u), space.denominator) * w for u, w in zip(units, weights)), Fraction(0))


def _side_tail(edge):
    # sum of 2^-|t| over t > edge
    if edge >= 0:
        return Fraction(1, 2**edge)
    return 3 - Fraction(2) ** (edge + 1)


def path_distance(mode, a, b, k=None):
    """Weighted sequence distance between two path windows.

    ``mode`` is ``"rho"`` (weights 2^-j from the window start),
    ``"rho_k"`` (max of rho over the first ``k`` shifts, inclusive) or
    ``"bi_infinite"`` (weights 2^-|t| at absolute times). Returns the value
    on the window together with a bound on the omitted tail.
    """
    if a.t_lo != b.t_lo or len(a.points) != len(b.points):
        raise DomainError("path windows do not coincide")
    space = a.space
    if b.space is not space:
        raise DomainError("paths belong to different spaces")
    units = [space.unit_distance(p.index, q.index) for p, q in zip(a.points, b.points)]
    L = len(units)
    diam = space.diam
    if mode == "rho":
        w = [Fraction(1, 2**j) for j in range(L)]
        return PathDistance(_weighted(space, units, w), diam * Fraction(1, 2 ** (L - 1)))
    if mode == "rho_k":
        if k is None or not 0 <= int(k) < L:
            raise DomainError("rho_k needs 0 <= k < window length")
        best = None
        for j in range(int(k) + 1):
            w = [Fraction(1, 2**i) for i in range(L - j)]
            v = _weighted(space, units[j:], w)
            best = v if best is None else max(best, v)
        return PathDistance(best, diam * Fraction(1, 2 ** (L - int(k) - 1)))
    if mode == "bi_infinite":
        ts = range(a.t_lo, a.t_lo + L)
        w = [Fraction(1, 2 ** abs(t)) for t in ts]
        t_lo, t_hi = a.t_lo, a.t_lo + L - 1
        tail = _side_tail(t_hi) + _side_tail(-t_lo)
        return PathDistance(_weighted(space, units, w), diam * tail)
    raise DomainError(f"unknown path metric mode {mode!r}")
