"""Suborbit segments: enumeration, sampling and the shift."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TotalityError
from .space import Point, PointSet


class OrbitSegment:
    """A finite suborbit ``(x_0, ..., x_{n-1})`` with ``x_{j+1}`` in ``F(x_j)``."""

    __slots__ = ("F", "indices")

    def __init__(self, F, points):
        idx = np.array([p.index if isinstance(p, Point) else int(p) for p in points], dtype=np.int64)
        if idx.size == 0:
            raise DomainError("a segment needs at least one point")
        if not validate_indices(F, idx[None, :]).all():
            raise DomainError("consecutive points do not follow the relation")
        idx.setflags(write=False)
        self.F = F
        self.indices = idx

    def __len__(self):
        return int(self.indices.size)

    @property
    def points(self):
        return tuple(Point(self.F.space, int(i)) for i in self.indices)

    def __eq__(self, other):
        return isinstance(other, OrbitSegment) and other.F is self.F and \
            np.array_equal(other.indices, self.indices)

    def __hash__(self):
        return hash(self.indices.tobytes())

    def __repr__(self):
        return "OrbitSegment(" + ", ".join(repr(p)[6:-1] for p in self.points) + ")"


def validate_indices(F, paths):
    """Row-wise check that every step of each path follows ``F``."""
    paths = np.asarray(paths, dtype=np.int64)
    ok = np.ones(paths.shape[0], dtype=bool)
    n = F.space.n
    # rows are sorted, so (row, target) codes are globally sorted
    keys = np.repeat(np.arange(n), F.row_sizes) * n + F.targets
    for j in range(paths.shape[1] - 1):
        code = paths[:, j] * n + paths[:, j + 1]
        pos = np.searchsorted(keys, code)
        ok &= (pos < keys.size) & (keys[np.minimum(pos, keys.size - 1)] == code)
    return ok


@dataclass
class PathEnsemble:
    """A set of segments of common length stored as an index array.

    ``paths`` has shape (count, n). ``exhaustive`` means every segment
    from the start set is present; ``cap_hit`` means enumeration stopped
    at the cap, keeping the lexicographically first segments.
    """

    F: object
    paths: np.ndarray
    exhaustive: bool
    cap_hit: bool
    backward: bool = False

    def __len__(self):
        return int(self.paths.shape[0])

    @property
    def length(self):
        return int(self.paths.shape[1])

    @property
    def segments(self):
        F = self.F.inverse() if self.backward else self.F
        return [OrbitSegment(F, row) for row in self.paths]

    def distinct(self):
        return np.unique(self.paths, axis=0)


def _start_indices(F, A):
    if isinstance(A, Point):
        F.space.check(A)
        return np.array([A.index], dtype=np.int64)
    if isinstance(A, PointSet):
        return A.indices
    return np.unique(np.asarray(A, dtype=np.int64))


def extend_paths(step, paths, allow_empty=False):
    """Every one-step extension of each path, in lexicographic order."""
    last = paths[:, -1]
    sizes = step.row_sizes[last]
    if not allow_empty and np.any(sizes == 0):
        bad = int(last[np.flatnonzero(sizes == 0)[0]])
        raise TotalityError(f"F({step._label(bad)}) is empty", point=Point(step.space, bad))
    total = int(sizes.sum())
    rep = np.repeat(np.arange(paths.shape[0]), sizes)
    offs = np.repeat(step.indptr[last] - np.cumsum(sizes) + sizes, sizes) + np.arange(total)
    return np.concatenate([paths[rep], step.targets[offs][:, None]], axis=1)


def enumerate_segments(F, A, n, cap=1_000_000, backward=False):
    """All length-``n`` segments starting in ``A``, breadth first.

    With ``backward=True`` the inverse relation is followed, giving the
    time-reversed windows of bi-infinite suborbits; starts without
    preimages simply die out. The result keeps the lexicographically first
    ``cap`` segments when the full count exceeds ``cap``.
    """
    n, cap = int(n), int(cap)
    if n < 1 or cap < 1:
        raise DomainError("need n >= 1 and cap >= 1")
    step = F.inverse() if backward else F
    paths = _start_indices(F, A)[:, None]
    hit = False
    if paths.shape[0] > cap:
        paths, hit = paths[:cap], True
    for _ in range(n - 1):
        paths = extend_paths(step, paths, allow_empty=backward)
        if paths.shape[0] > cap:
            # the first cap prefixes cover the first cap completions
            paths, hit = paths[:cap], True
    return PathEnsemble(F, paths, exhaustive=not hit, cap_hit=hit, backward=backward)


def count_segments(F, A, n):
    """Exact number of length-``n`` segments from ``A`` without listing them."""
    counts = np.zeros(F.space.n, dtype=object)
    for i in _start_indices(F, A):
        counts[i] += 1
    rows = np.repeat(np.arange(F.space.n), F.row_sizes)
    for _ in range(int(n) - 1):
        nxt = np.zeros(F.space.n, dtype=object)
        np.add.at(nxt, F.targets, counts[rows])
        counts = nxt
    return int(counts.sum())


def shift(segment):
    """sigma: drop the first point."""
    if len(segment) < 2:
        raise DomainError("cannot shift a segment of length 1")
    out = OrbitSegment.__new__(OrbitSegment)
    out.F = segment.F
    out.indices = segment.indices[1:]
    return out


def sample_paths(F, x, n, count, seed=0):
    """``count`` segments from ``x`` with uniform independent branch choices."""
    n, count = int(n), int(count)
    if count < 1 or n < 1:
        raise DomainError("need n >= 1 and count >= 1")
    rng = np.random.default_rng(seed)
    start = _start_indices(F, x)
    if start.size != 1:
        raise DomainError("sample_paths starts from a single point")
    paths = np.empty((count, n), dtype=np.int64)
    paths[:, 0] = start[0]
    for j in range(1, n):
        cur = paths[:, j - 1]
        sizes = F.row_sizes[cur]
        if np.any(sizes == 0):
            bad = int(cur[np.flatnonzero(sizes == 0)[0]])
            raise TotalityError(f"F({F._label(bad)}) is empty", point=Point(F.space, bad))
        pick = np.floor(rng.random(count) * sizes).astype(np.int64)
        paths[:, j] = F.targets[F.indptr[cur] + pick]
    return PathEnsemble(F, paths, exhaustive=False, cap_hit=False)
