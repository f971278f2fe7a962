"""Discretized compact metric spaces, points and finite point sets.

Grid spaces store coordinates as integer multiples of ``1/G``; distances are
exact integers in those units (squared units for the L2 torus), converted to
``Fraction`` only at the public surface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, UnsupportedError

KINDS = ("interval", "circle", "torus", "finite")

# cap on the common denominator of a finite distance table
_MAX_DENOMINATOR = 10**15


def as_fraction(x) -> Fraction:
    """Exact rational for ints, Fractions, "p/q" strings and floats.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise DomainError(f"non-finite value {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise DomainError(f"cannot interpret {x!r} as a rational number")


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


class MetricSpace:
    """A finite discretization of a compact metric space.

    Use the constructors :meth:`interval`, :meth:`circle`, :meth:`torus` and
    :meth:`finite`. Instances are immutable and compare by identity.
    """

    def __init__(self, kind, *, grid=None, metric="max", labels=None,
                 table=None, denominator=1, midpoints=None):
        if kind not in KINDS:
            raise DomainError(f"unknown space kind {kind!r}")
        self.kind = kind
        self.grid = grid
        self.metric = metric
        self.squared = kind == "torus" and metric == "l2"
        if kind == "finite":
            self.n = len(labels)
            self.dim = 0
            self.labels = tuple(labels)
            self.denominator = denominator
            self._table = table
            self._table.setflags(write=False)
            self._midpoints = dict(midpoints or {})
        else:
            if grid is None or int(grid) < 1:
                raise DomainError("grid resolution must be a positive integer")
            self.grid = int(grid)
            self.denominator = self.grid
            self.labels = None
            self._midpoints = None
            self.dim = 2 if kind == "torus" else 1
            if kind == "interval":
                self.n = self.grid + 1
            elif kind == "circle":
                self.n = self.grid
            else:
                self.n = self.grid * self.grid

    # -- constructors -----------------------------------------------------

    @classmethod
    def interval(cls, grid):
        """[0, 1] sampled at ``k/grid`` for ``k = 0..grid``."""
        return cls("interval", grid=grid)

    @classmethod
    def circle(cls, grid):
        """R/Z sampled at ``k/grid``; distance wraps around."""
        return cls("circle", grid=grid)

    @classmethod
    def torus(cls, grid, metric="max"):
        """(R/Z)^2 with ``grid`` points per coordinate.

        ``metric`` is ``"max"`` (default) or ``"l2"`` over the per-coordinate
        circle distances.
        """
        if metric not in ("max", "l2"):
            raise DomainError(f"torus metric must be 'max' or 'l2', got {metric!r}")
        return cls("torus", grid=grid, metric=metric)

    @classmethod
    def finite(cls, labels, distances, midpoints=None):
        """Explicit finite space from labels and a full distance table.

        Entries may be ints, floats, Fractions or "p/q" strings. The table is
        checked for symmetry, a zero diagonal, positivity off the diagonal
        and the triangle inequality. ``midpoints`` maps ``(i, j)`` index
        pairs to a midpoint index and enables :func:`geodesic_arc`.
        """
        labels = [str(x) for x in labels]
        n = len(labels)
        if n == 0:
            raise DomainError("a finite space needs at least one point")
        if len(set(labels)) != n:
            raise DomainError("finite space labels must be distinct")
        if len(distances) != n or any(len(row) != n for row in distances):
            raise DomainError(f"distance table must be {n}x{n}")
        fr = [[as_fraction(v) for v in row] for row in distances]
        den = 1
        for row in fr:
            for v in row:
                den = math.lcm(den, v.denominator)
                if den > _MAX_DENOMINATOR:
                    raise DomainError("distance table denominators are too large to keep exact")
        table = np.array([[int(v * den) for v in row] for row in fr], dtype=np.int64)
        _validate_table(table)
        mids = {}
        for (i, j), k in (midpoints or {}).items():
            mids[(int(i), int(j))] = int(k)
            mids[(int(j), int(i))] = int(k)
        return cls("finite", labels=labels, table=table, denominator=den, midpoints=mids)

    # -- coordinates ------------------------------------------------------

    def __repr__(self):
        if self.kind == "finite":
            return f"MetricSpace(finite, n={self.n})"
        extra = f", metric={self.metric}" if self.kind == "torus" else ""
        return f"MetricSpace({self.kind}, grid={self.grid}{extra})"

    def unit_coords(self, idx):
        """Integer grid coordinates, shape ``idx.shape + (dim,)``."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.kind == "finite":
            raise UnsupportedError("finite spaces have no coordinates")
        if self.kind == "torus":
            a, b = np.divmod(idx, self.grid)
            return np.stack([a, b], axis=-1)
        return idx[..., None]

    def index_of_units(self, units):
        units = tuple(int(u) for u in units)
        G = self.grid
        if self.kind == "interval":
            (u,) = units
            if not 0 <= u <= G:
                raise DomainError(f"coordinate {Fraction(u, G)} outside [0, 1]")
            return u
        if self.kind == "circle":
            return units[0] % G
        return (units[0] % G) * G + (units[1] % G)

    def coords(self, index):
        """Exact coordinates of a point (a label for finite spaces)."""
        if self.kind == "finite":
            return self.labels[index]
        return tuple(Fraction(int(u), self.grid) for u in self.unit_coords(index))

    def point(self, *coords):
        """The grid point nearest to ``coords`` (a label or index for finite)."""
        if self.kind == "finite":
            (c,) = coords
            if isinstance(c, (int, np.integer)) and not isinstance(c, bool):
                if not 0 <= int(c) < self.n:
                    raise DomainError(f"index {c} outside finite space of size {self.n}")
                return Point(self, int(c))
            try:
                return Point(self, self.labels.index(str(c)))
            except ValueError:
                raise DomainError(f"unknown point label {c!r}") from None
        if len(coords) == 1 and isinstance(coords[0], (tuple, list)):
            coords = tuple(coords[0])
        if len(coords) != self.dim:
            raise DomainError(f"{self.kind} points take {self.dim} coordinate(s)")
        units = [_round_half_up(as_fraction(c) * self.grid) for c in coords]
        return Point(self, self.index_of_units(units))

    def point_at(self, index):
        if not 0 <= int(index) < self.n:
            raise DomainError(f"index {index} outside space of size {self.n}")
        return Point(self, int(index))

    def points(self):
        return [Point(self, i) for i in range(self.n)]

    def compact_set(self, items):
        """Canonical :class:`CompactSet` from coordinates, labels or Points."""
        idx = []
        for it in items:
            if isinstance(it, Point):
                self.check(it)
                idx.append(it.index)
            elif self.kind == "finite":
                idx.append(self.point(it).index)
            elif isinstance(it, (tuple, list)):
                idx.append(self.point(*it).index)
            else:
                idx.append(self.point(it).index)
        return CompactSet(self, idx)

    def whole(self):
        return CompactSet(self, np.arange(self.n))

    def check(self, p):
        if p.space is not self:
            raise DomainError("point belongs to a different space")

    # -- distances --------------------------------------------------------

    def dist_units(self, i, j):
        """Vectorized exact distances in integer units (broadcasting)."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if self.kind == "finite":
            return self._table[i, j]
        G = self.grid
        if self.kind == "interval":
            return np.abs(i - j)
        if self.kind == "circle":
            d = np.abs(i - j)
            return np.minimum(d, G - d)
        a1, b1 = np.divmod(i, G)
        a2, b2 = np.divmod(j, G)
        dx = np.abs(a1 - a2)
        dx = np.minimum(dx, G - dx)
        dy = np.abs(b1 - b2)
        dy = np.minimum(dy, G - dy)
        if self.squared:
            return dx * dx + dy * dy
        return np.maximum(dx, dy)

    def unit_distance(self, i, j):
        """Scalar pure-Python counterpart of :meth:`dist_units`."""
        i, j = int(i), int(j)
        if self.kind == "finite":
            return int(self._table[i, j])
        G = self.grid
        if self.kind == "interval":
            return abs(i - j)
        if self.kind == "circle":
            d = abs(i - j)
            return min(d, G - d)
        dx = abs(i // G - j // G)
        dy = abs(i % G - j % G)
        dx, dy = min(dx, G - dx), min(dy, G - dy)
        return dx * dx + dy * dy if self.squared else max(dx, dy)

    def units_to_value(self, u):
        """Real distance for an integer unit count."""
        if self.squared:
            return math.sqrt(int(u)) / self.grid
        return Fraction(int(u), self.denominator)

    def units_floor(self, r) -> int:
        """Largest unit count whose distance is ``<= r``."""
        r = as_fraction(r)
        if r < 0:
            return -1
        if self.squared:
            return math.floor((r * self.grid) ** 2)
        return math.floor(r * self.denominator)

    def units_ceil(self, r) -> int:
        """Smallest unit count whose distance is ``>= r``."""
        r = as_fraction(r)
        if r <= 0:
            return 0
        if self.squared:
            return math.ceil((r * self.grid) ** 2)
        return math.ceil(r * self.denominator)

    def coord_distance(self, a, b):
        """Distance between exact (possibly off-grid) coordinate tuples."""
        if self.kind == "finite":
            raise UnsupportedError("finite spaces have no continuous coordinates")
        parts = []
        for x, y in zip(a, b):
            d = abs(Fraction(x) - Fraction(y))
            if self.kind != "interval":
                d = d % 1
                d = min(d, 1 - d)
            parts.append(d)
        if self.squared:
            return math.sqrt(sum(p * p for p in parts))
        return max(parts)

    @property
    def diam(self):
        """Diameter of the whole space."""
        if self.kind == "finite":
            return self.units_to_value(int(self._table.max()))
        if self.kind == "interval":
            return Fraction(1)
        if self.kind == "circle":
            return self.units_to_value(self.grid // 2)
        h = self.grid // 2
        return self.units_to_value(2 * h * h if self.squared else h)


def _validate_table(t):
    n = t.shape[0]
    if not np.array_equal(t, t.T):
        raise DomainError("distance table is not symmetric")
    if np.any(np.diag(t) != 0):
        raise DomainError("distance table has a nonzero diagonal")
    off = t[~np.eye(n, dtype=bool)]
    if np.any(off <= 0):
        raise DomainError("distance table has a non-positive off-diagonal entry")
    # d(i,k) <= d(i,j) + d(j,k), one intermediate point at a time
    for j in range(n):
        if np.any(t > t[:, j][:, None] + t[j, :][None, :]):
            raise DomainError("distance table violates the triangle inequality")


@dataclass(frozen=True)
class Point:
    """A point of a :class:`MetricSpace`, identified by its index."""

    space: MetricSpace = field(repr=False)
    index: int

    @property
    def coords(self):
        return self.space.coords(self.index)

    def __repr__(self):
        c = self.coords
        if isinstance(c, str):
            return f"Point({c})"
        return "Point(" + ", ".join(str(x) for x in c) + ")"


class PointSet:
    """A finite, duplicate-free, canonically ordered set of points."""

    __slots__ = ("space", "indices", "_key")

    def __init__(self, space, indices):
        arr = np.unique(np.asarray(indices, dtype=np.int64))
        if arr.size and (arr[0] < 0 or arr[-1] >= space.n):
            raise DomainError("set member outside the space")
        arr.setflags(write=False)
        self.space = space
        self.indices = arr
        self._key = arr.tobytes()

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return (Point(self.space, int(i)) for i in self.indices)

    def __contains__(self, p):
        if not isinstance(p, Point) or p.space is not self.space:
            return False
        k = np.searchsorted(self.indices, p.index)
        return k < self.indices.size and self.indices[k] == p.index

    def __eq__(self, other):
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.space is other.space and self._key == other._key

    def __hash__(self):
        return hash((id(self.space), self._key))

    @property
    def points(self):
        return tuple(self)

    def coords(self):
        return [self.space.coords(int(i)) for i in self.indices]

    def __repr__(self):
        body = ", ".join(_fmt_coords(self.space.coords(int(i))) for i in self.indices[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"{type(self).__name__}({{{body}{more}}})"


class CompactSet(PointSet):
    """A nonempty :class:`PointSet`; stands in for an element of C(M)."""

    __slots__ = ()

    def __init__(self, space, indices):
        super().__init__(space, indices)
        if not self.indices.size:
            raise DomainError("a CompactSet must be nonempty")


class EmptySet(PointSet):
    """The empty set, kept distinct from :class:`CompactSet`."""

    __slots__ = ()

    def __init__(self, space, indices=()):
        super().__init__(space, [])


def point_set(space, indices):
    """CompactSet when ``indices`` is nonempty, EmptySet otherwise."""
    indices = np.asarray(indices, dtype=np.int64)
    return CompactSet(space, indices) if indices.size else EmptySet(space)


def _fmt_coords(c):
    if isinstance(c, str):
        return c
    return c[0].__str__() if len(c) == 1 else "(" + ", ".join(map(str, c)) + ")"


# -- operations --------------------------------------------------------------

def distance(space, p, q):
    """Exact distance between two points of ``space``."""
    space.check(p)
    space.check(q)
    return space.units_to_value(space.unit_distance(p.index, q.index))


def ball(space, center, r):
    """All points at distance ``<= r`` from ``center``."""
    space.check(center)
    if as_fraction(r) < 0:
        raise DomainError("ball radius must be nonnegative")
    t = space.units_floor(r)
    d = space.dist_units(np.arange(space.n), center.index)
    return CompactSet(space, np.flatnonzero(d <= t))


def diameter(space, K):
    """Largest pairwise distance within ``K``."""
    if K.space is not space:
        raise DomainError("set belongs to a different space")
    idx = K.indices
    best = 0
    for start in range(0, idx.size, 1024):
        block = space.dist_units(idx[start:start + 1024, None], idx[None, :])
        best = max(best, int(block.max()))
    return space.units_to_value(best)


def geodesic_arc(space, p, q, depth):
    """Midpoint-refined arc from ``p`` to ``q`` with ``2**depth + 1`` points.

    Grid spaces interpolate along the shortest displacement and snap to the
    grid; finite spaces refine through their midpoint table. Returns the
    single point ``(p,)`` when ``p == q``.
    """
    space.check(p)
    space.check(q)
    if int(depth) < 1:
        raise DomainError("arc depth must be a positive integer")
    depth = int(depth)
    if p == q:
        return [p]
    if space.kind == "finite":
        return _finite_arc(space, p.index, q.index, depth)
    G = space.grid
    a = space.unit_coords(p.index)
    b = space.unit_coords(q.index)
    delta = []
    for x, y in zip(a, b):
        d = int(y) - int(x)
        if space.kind != "interval":
            d = (d + G // 2) % G - G // 2
            if 2 * abs(d) == G:
                d = abs(d)
        delta.append(d)
    m = 2**depth
    out = []
    for k in range(m + 1):
        units = [_round_half_up(Fraction(int(x)) + Fraction(k * d, m)) for x, d in zip(a, delta)]
        out.append(Point(space, space.index_of_units(units)))
    return out


def _finite_arc(space, i, j, depth):
    mids = space._midpoints
    pts = [i, j]
    for _ in range(depth):
        nxt = [pts[0]]
        for a, b in zip(pts, pts[1:]):
            if a == b:
                m = a
            elif (a, b) in mids:
                m = mids[(a, b)]
            else:
                raise UnsupportedError(f"no midpoint configured for {space.labels[a]}, {space.labels[b]}")
            nxt.extend([m, b])
        pts = nxt
    return [Point(space, k) for k in pts]

