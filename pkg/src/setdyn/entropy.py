"""Separated and spanning counts over suborbit segments, entropy estimates
for F and for the shift on the path space, and binary witness trees.

Segments are compared in the max-over-time metric. A set is
(n, eps)-separated when every two members differ by more than ``eps`` at
some time; it is (n, eps)-spanning when every segment lies within ``eps``
(inclusive) of a member at all times. With the inclusive convention a
maximal separated set is spanning, so ``r_upper <= s_lower`` holds row by row
and ``s_lower(eps) <= r_upper(eps/2)`` follows from pigeonhole.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError
from .hausdorff import hausdorff_brute, paired_hausdorff_units
from .paths import count_segments, enumerate_segments
from .relation import ForwardLevels, iterate_indices
from .space import as_fraction, point_set

EXACT_LIMIT = 20
_COVER_LIMIT = 20_000


# -- neighbourhoods in the segment metric --------------------------------------

def _line_coords(space):
    """Integer line coordinates when a finite metric is a subset of R."""
    t = space._table
    e = int(np.argmax(t[0]))
    c = t[e].astype(np.int64)
    if np.array_equal(np.abs(c[:, None] - c[None, :]), t):
        return c
    return None


class SegmentIndex:
    """Ball queries in the max-over-time metric on an array of segments.

    Points are embedded so that the sup-norm distance of the embedding never
    exceeds the true distance. Candidates from a KD-tree are then filtered
    exactly in integer units, unless the embedding is itself exact.
    """

    def __init__(self, space, paths, ncols=None):
        self.space = space
        self.paths = np.asarray(paths, dtype=np.int64)
        L = self.paths.shape[1] if ncols is None else int(ncols)
        cols = self.paths[:, :L]
        box = None
        self.exact = True
        if space.kind == "finite":
            line = _line_coords(space)
            if line is not None:
                X = line[cols]
            else:
                self.exact = False
                marks = _landmarks(space, 3)
                X = np.concatenate([space._table[cols, m] for m in marks], axis=1)
        else:
            U = space.unit_coords(cols)
            X = U.reshape(U.shape[0], -1)
            if space.kind != "interval":
                box = space.grid
            self.exact = not space.squared
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        # median splits degrade badly on the heavily repeated coordinates of
        # segment data; sliding-midpoint trees with larger leaves do not
        self.tree = cKDTree(self.X, leafsize=64, balanced_tree=False, boxsize=box) \
            if len(self.X) else None
        self.ncols = L

    def radius(self, t):
        return (math.sqrt(t) if self.space.squared else float(t)) + 1e-9

    def ball(self, k, t):
        """Indices within ``t`` units of segment ``k`` on the indexed columns."""
        cand = np.asarray(self.tree.query_ball_point(self.X[k], self.radius(t), p=np.inf),
                          dtype=np.int64)
        if self.exact:
            return cand
        return cand[self.exact_dist(cand, k) <= t]

    def exact_dist(self, cand, k):
        P = self.paths[:, :self.ncols]
        return self.space.dist_units(P[cand], P[k][None, :]).max(axis=1)

    def pairs(self, t):
        pr = self.tree.query_pairs(self.radius(t), p=np.inf, output_type="ndarray")
        if not self.exact and pr.size:
            P = self.paths[:, :self.ncols]
            pr = pr[self.space.dist_units(P[pr[:, 0]], P[pr[:, 1]]).max(axis=1) <= t]
        return pr


def _landmarks(space, k):
    marks = [0]
    d = space._table[0].copy()
    for _ in range(k - 1):
        m = int(np.argmax(d))
        marks.append(m)
        d = np.minimum(d, space._table[m])
    return marks


def _segment_units(space, paths):
    """Pairwise max-over-time distance matrix (small sources only)."""
    P = np.asarray(paths, dtype=np.int64)
    return space.dist_units(P[:, None, :], P[None, :, :]).max(axis=2)


def greedy_separated(index, t, preselected=(), refine=None, block=512):
    """Greedy maximal set with pairwise distances > t, scanning in order.

    ``preselected`` members are taken first (they must already be pairwise
    separated). ``refine(k, cand)`` can shrink a candidate neighbourhood
    for a finer metric. Ball queries are issued in blocks of upcoming
    uncovered segments; the selection itself stays sequential.
    """
    m = index.paths.shape[0]
    covered = np.zeros(m, dtype=bool)
    chosen = []
    order = np.concatenate([np.asarray(preselected, dtype=np.int64), np.arange(m)])
    r = index.radius(t)
    pos = 0
    while pos < order.size:
        blk = []
        while pos < order.size and len(blk) < block:
            k = order[pos]
            pos += 1
            if not covered[k]:
                blk.append(k)
        if not blk:
            break
        balls = index.tree.query_ball_point(index.X[blk], r, p=np.inf, workers=-1,
                                            return_sorted=False)
        for k, cand in zip(blk, balls):
            if covered[k]:
                continue
            cand = np.asarray(cand, dtype=np.int64)
            if not index.exact:
                cand = cand[index.exact_dist(cand, k) <= t]
            if refine is not None:
                cand = refine(k, cand)
            chosen.append(int(k))
            covered[cand] = True
            covered[k] = True
    return chosen


def greedy_cover(m, pairs):
    """Greedy set cover by closed neighbourhoods of the <= t graph."""
    deg_nb = [[k] for k in range(m)]
    for a, b in pairs:
        deg_nb[a].append(int(b))
        deg_nb[b].append(int(a))
    covered = np.zeros(m, dtype=bool)
    heap = [(-len(nb), k) for k, nb in enumerate(deg_nb)]
    heapq.heapify(heap)
    left = m
    count = 0
    while left:
        neg, k = heapq.heappop(heap)
        gain = int(np.count_nonzero(~covered[deg_nb[k]]))
        if gain != -neg:
            if gain:
                heapq.heappush(heap, (-gain, k))
            continue
        covered[deg_nb[k]] = True
        left -= gain
        count += 1
    return count


def _exact_counts(D, t):
    """Exact s (max independent set) and r (min dominating set) by search."""
    m = D.shape[0]
    adj = [sum(1 << j for j in range(m) if j != i and D[i, j] <= t) for i in range(m)]
    best = 0

    def mis(cand, size):
        nonlocal best
        if not cand:
            best = max(best, size)
            return
        if size + bin(cand).count("1") <= best:
            return
        v = (cand & -cand).bit_length() - 1
        mis(cand & ~(1 << v) & ~adj[v], size + 1)
        mis(cand & ~(1 << v), size)

    mis((1 << m) - 1, 0)
    closed = [adj[i] | (1 << i) for i in range(m)]
    full = (1 << m) - 1
    r = m
    for k in range(1, m + 1):
        if any(_union(closed, c) == full for c in itertools.combinations(range(m), k)):
            r = k
            break
    return best, r


def _union(masks, idx):
    u = 0
    for i in idx:
        u |= masks[i]
    return u


# -- count tables ----------------------------------------------------------------

@dataclass
class CountRow:
    n: int
    epsilon: Fraction
    s_lower: int
    r_upper: int
    exhaustive: bool
    exact: bool
    source_size: int

    def as_tuple(self):
        return (self.n, self.epsilon, self.s_lower, self.r_upper, self.exhaustive)


@dataclass
class CountTable:
    rows: list = field(default_factory=list)

    def add(self, row):
        self.rows.append(row)

    def lookup(self, n, eps):
        eps = as_fraction(eps)
        for r in self.rows:
            if r.n == n and r.epsilon == eps:
                return r
        return None

    def sandwich_violations(self):
        """Rows breaking r(eps) <= s(eps) <= r(eps/2) among exhaustive rows."""
        bad = []
        for r in self.rows:
            if not r.exhaustive:
                continue
            if r.r_upper > r.s_lower:
                bad.append((r, "r > s"))
            half = self.lookup(r.n, r.epsilon / 2)
            if half is not None and half.exhaustive and r.s_lower > half.r_upper:
                bad.append((r, "s(eps) > r(eps/2)"))
        return bad

    def csv_rows(self):
        return [("n", "epsilon", "s_lower", "r_upper", "exhaustive")] + \
            [(r.n, str(r.epsilon), r.s_lower, r.r_upper, r.exhaustive) for r in self.rows]


def count_separated_spanning(F, n, epsilon, source, index=None):
    """(n, eps) separated/spanning counts over the segments in ``source``.

    Exact by exhaustive search when the source has at most 20 segments;
    otherwise ``s_lower`` is a greedy maximal separated set (a lower bound)
    and ``r_upper`` the smaller of that set and a greedy cover.
    """
    paths = source.paths
    if paths.shape[1] != int(n):
        raise DomainError(f"source segments have length {paths.shape[1]}, expected {n}")
    space = F.space
    eps = as_fraction(epsilon)
    if eps <= 0:
        raise DomainError("epsilon must be positive")
    t = space.units_floor(eps)
    m = paths.shape[0]
    if m <= EXACT_LIMIT:
        s, r = _exact_counts(_segment_units(space, paths), t)
        return CountRow(int(n), eps, s, r, source.exhaustive, True, m)
    index = index or SegmentIndex(space, paths)
    s = len(greedy_separated(index, t))
    r = s
    if m <= _COVER_LIMIT:
        r = min(r, greedy_cover(m, index.pairs(t)))
    return CountRow(int(n), eps, s, r, source.exhaustive, False, m)


# -- estimates -------------------------------------------------------------------

@dataclass
class SlopeFit:
    epsilon: Fraction
    slope: float
    intercept: float
    n_used: list
    max_residual: float


@dataclass
class EntropyEstimate:
    mode: str
    h_top: float
    fits: list
    table: CountTable
    lower_bound: bool
    partial: bool
    monotone_in_eps: bool
    tail_bound: float | None = None
    notes: list = field(default_factory=list)

    @property
    def slopes(self):
        return {f.epsilon: f.slope for f in self.fits}


def fit_slope(ns, logs, tol=0.05, min_points=3):
    """Least-squares slope over the longest tail of ``ns`` that is linear.

    Leading points are dropped one at a time until the largest absolute
    residual is at most ``tol``; at least ``min_points`` are kept.
    """
    ns = np.asarray(ns, dtype=float)
    logs = np.asarray(logs, dtype=float)
    if ns.size < 2:
        return 0.0, float(logs[0]) if logs.size else 0.0, list(ns), 0.0
    keep = min(min_points, ns.size)
    best = None
    for start in range(0, ns.size - keep + 1):
        x, y = ns[start:], logs[start:]
        A = np.stack([x, np.ones_like(x)], axis=1)
        (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
        res = float(np.max(np.abs(y - (a * x + b))))
        best = (float(a), float(b), [int(v) for v in x], res)
        if res <= tol:
            break
    return best


def _sources(F, A, ns, budget, extra=0):
    out = []
    for n in ns:
        L = int(n) + extra
        if count_segments(F, A, L) > budget:
            return out, True
        out.append((int(n), enumerate_segments(F, A, L, cap=budget)))
    return out, False


def _summarize(mode, table, epss, ns_done, partial, notes, tail=None):
    fits = []
    for e in epss:
        rows = [table.lookup(n, e) for n in ns_done]
        rows = [r for r in rows if r is not None]
        if not rows:
            continue
        a, b, used, res = fit_slope([r.n for r in rows], [math.log(r.s_lower) for r in rows])
        # constant counts give round-off slopes of order 1e-18
        fits.append(SlopeFit(e, a if a > 1e-12 else 0.0, b, used, res))
    slopes = [f.slope for f in fits]
    mono = all(x <= y + 1e-9 for x, y in zip(slopes, slopes[1:]))
    h = slopes[-1] if slopes else 0.0
    lower = any(not r.exact for r in table.rows) or any(not r.exhaustive for r in table.rows)
    return EntropyEstimate(mode, max(h, 0.0), fits, table, lower, partial, mono, tail, notes)


def entropy_estimate(F, epsilons, ns, budget=2_000_000, source=None):
    """h_top(F) from the growth of s_n(eps).

    ``source`` is the set of start points (default: the whole space). For
    each n the length-n segments from ``source`` are enumerated
    exhaustively; once their number exceeds ``budget`` the table stops and
    is flagged partial. The estimate is the slope at the smallest eps.
    """
    epss = sorted((as_fraction(e) for e in epsilons), reverse=True)
    ns = sorted(int(n) for n in ns)
    A = source if source is not None else F.space.whole()
    srcs, partial = _sources(F, A, ns, int(budget))
    table = CountTable()
    for n, ens in srcs:
        index = SegmentIndex(F.space, ens.paths) if len(ens) > EXACT_LIMIT else None
        for e in epss:
            table.add(count_separated_spanning(F, n, e, ens, index=index))
    notes = [f"budget {budget} exhausted after n={srcs[-1][0] if srcs else None}"] if partial else []
    return _summarize("map_F", table, epss, [n for n, _ in srcs], partial, notes)


def _rho_units(space, P, Q, n):
    """rho_{n-1} between path arrays, scaled by den * 2^(L-1) to integers."""
    L = P.shape[1]
    d = space.dist_units(P, Q)
    if space.squared:
        d = np.sqrt(d)
        w = 2.0 ** -np.arange(L)
        return np.max(np.stack([(d[:, j:] * w[:L - j]).sum(axis=1) for j in range(n)]), axis=0)
    w = (np.int64(1) << np.arange(L - 1, -1, -1, dtype=np.int64))
    return np.max(np.stack([(d[:, j:] * w[:L - j]).sum(axis=1) for j in range(n)]), axis=0)


def _rho_threshold(space, eps, L):
    if space.squared:
        return float(eps) * space.grid
    return math.floor(eps * space.denominator * 2 ** (L - 1))


def shift_entropy_estimate(F, epsilons, ns, budget=2_000_000, tail=2, source=None):
    """Entropy of the shift on the path space in the metric rho.

    Paths are truncated to ``n + tail`` points, and two paths are
    (n, eps)-separated when rho(sigma^j a, sigma^j b) > eps for some j < n.
    Since rho(sigma^j a, sigma^j b) >= dist(a_j, b_j), lifts of an
    F-separated family stay separated; the greedy scan starts from such
    lifts and then adds further paths.
    """
    tail = int(tail)
    if tail < 0:
        raise DomainError("tail must be nonnegative")
    epss = sorted((as_fraction(e) for e in epsilons), reverse=True)
    ns = sorted(int(n) for n in ns)
    space = F.space
    A = source if source is not None else space.whole()
    srcs, partial = _sources(F, A, ns, int(budget), extra=tail)
    table = CountTable()
    for n, ens in srcs:
        paths = ens.paths
        L = paths.shape[1]
        index = SegmentIndex(space, paths, ncols=n)
        # segments are the distinct first-n prefixes, listed in order
        _, first = np.unique(paths[:, :n], axis=0, return_index=True)
        first = np.sort(first)
        for e in epss:
            t = space.units_floor(e)
            thr = _rho_threshold(space, e, L)
            seg_index = SegmentIndex(space, paths[first][:, :n])
            seeds = [int(first[k]) for k in greedy_separated(seg_index, t)]

            def refine(k, cand, thr=thr):
                rho = _rho_units(space, paths[cand], paths[k][None, :], n)
                return cand[rho <= thr]

            chosen = greedy_separated(index, t, preselected=seeds, refine=refine)
            table.add(CountRow(n, e, len(chosen), len(chosen), ens.exhaustive, False,
                               paths.shape[0]))
    bound = float(space.diam) * 2.0 ** (-tail)
    notes = [f"paths truncated {tail} steps past each window; rho tail <= {bound:.4g}"]
    if partial:
        notes.append(f"budget {budget} exhausted")
    return _summarize("shift_sigma", table, epss, [n for n, _ in srcs], partial, notes, tail=bound)


# -- witness trees -----------------------------------------------------------------

@dataclass
class Certificate:
    i: int
    j: int
    time: int
    value: object
    growth_ok: bool = True


@dataclass
class WitnessTree:
    """2^depth points on an arc, pairwise separated per ``certificates``.

    ``labels`` are binary words in arc order. ``threshold`` is alpha/4 in
    the expansiveness mode and 4*delta0 in the exponent mode.
    """

    F: object
    mode: str
    requested_depth: int
    depth: int
    points: list
    labels: list
    certificates: list
    threshold: object
    params: dict
    split_times: list
    diagnostics: list = field(default_factory=list)

    @property
    def complete(self):
        return self.depth == self.requested_depth

    @property
    def horizon(self):
        return max((c.time for c in self.certificates), default=0)

    def entropy_lower_bound(self):
        """log(2^depth) / (horizon + 1): growth rate implied by the family."""
        if self.depth < 1:
            return 0.0
        return self.depth * math.log(2) / (self.horizon + 1)

    def validate(self):
        """Recompute every certificate with the brute-force Hausdorff distance."""
        F = self.F
        space = F.space
        cache = {}

        def it(p, t):
            key = (p.index, t)
            if key not in cache:
                cache[key] = point_set(space, iterate_indices(F, t, [p.index]))
            return cache[key]

        failures = []
        s = self.params.get("s")
        for c in self.certificates:
            p, q = self.points[c.i], self.points[c.j]
            v = hausdorff_brute(space, it(p, c.time), it(q, c.time))
            ok = v == c.value and v > self.threshold if self.mode == "expansiveness" \
                else v == c.value and v >= self.threshold
            if ok and self.mode == "exponent":
                dist = float(space.units_to_value(space.unit_distance(p.index, q.index)))
                ok = float(v) >= math.exp(s * c.time) * dist * (1 - 1e-9)
            if not ok:
                failures.append(c)
        pairs = {(c.i, c.j) for c in self.certificates}
        m = len(self.points)
        complete = all((i, j) in pairs for i in range(m) for j in range(i + 1, m))
        return not failures and complete, failures


def _arc_indices(F, arc):
    idx = []
    for p in arc:
        F.space.check(p)
        idx.append(p.index)
    return np.asarray(idx, dtype=np.int64)


def witness_tree(F, arc, k, mode="expansiveness", alpha=None, N=None, s=None, delta0=None):
    """Binary splitting along ``arc`` into 2^k mutually separated points.

    Expansiveness mode (needs ``alpha`` and horizon ``N``): a pair (a, b)
    waits for the first time T' >= T with d_H >= alpha, then the first arc
    points after a and before b with d_H(F^T' a, F^T' x) > alpha/4 become
    the new inner points. Exponent mode (needs ``s`` and ``delta0``, default
    diam(arc)/8): a pair waits for the first time n with d_H >= 4*delta0,
    and the inner points are the farthest ones keeping d_H < delta0 up to n.
    Crossings are located by scanning the whole sub-arc, so the first
    crossing is found even where the distance is not monotone. Failure to
    split stops the recursion; the deepest complete level is returned.
    """
    space = F.space
    k = int(k)
    if k < 0:
        raise DomainError("depth must be nonnegative")
    idx = _arc_indices(F, arc)
    if idx.size < 2:
        raise DomainError("arc needs at least two points")
    arc_pts = list(arc)
    levels = ForwardLevels(F, sources=idx)
    diam_arc = max(space.unit_distance(idx[0], int(q)) for q in idx)
    diam_arc = space.units_to_value(max(diam_arc, max(space.unit_distance(idx[-1], int(q))
                                                      for q in idx)))
    if mode == "expansiveness":
        if alpha is None or N is None:
            raise DomainError("expansiveness mode needs alpha and N")
        alpha = as_fraction(alpha)
        thr = alpha / 4
        if diam_arc < thr:
            raise DomainError("arc diameter is below alpha/4")
        params = {"alpha": alpha, "N": int(N)}
    elif mode == "exponent":
        if s is None or float(s) <= 0:
            raise DomainError("exponent mode needs s > 0")
        s = float(s)
        delta0 = as_fraction(delta0) if delta0 is not None else diam_arc / 8
        if 8 * delta0 > diam_arc:
            raise DomainError("need 8*delta0 <= diam(arc)")
        thr = 4 * delta0
        params = {"s": s, "delta0": delta0}
    else:
        raise DomainError(f"unknown witness mode {mode!r}")

    def dh_row(t, a, cand):
        P = levels.padded(t)
        return paired_hausdorff_units(space, np.repeat(P[a][None, :], cand.size, axis=0), P[cand])

    def dh(t, a, b):
        return int(dh_row(t, a, np.array([b]))[0])

    diag = []
    if mode == "expansiveness":
        reach = space.units_ceil(alpha)
        cross = space.units_floor(thr)  # > alpha/4  <=>  units > cross
        horizon = int(N)

        def wait(a, b, T):
            for t in range(T, T + horizon + 1):
                if dh(t, a, b) >= reach:
                    return t
            return None

        def split(a, b, T):
            inner = np.arange(a + 1, b)
            if inner.size < 2:
                return None
            left = dh_row(T, a, inner)
            right = dh_row(T, b, inner)
            pl = np.flatnonzero(left > cross)
            pr = np.flatnonzero(right > cross)
            if not pl.size or not pr.size:
                return None
            l, r = int(inner[pl[0]]), int(inner[pr[-1]])
            return (l, r) if l < r else None

        a0, b0 = 0, idx.size - 1
    else:
        d0 = space.units_floor(delta0)
        near = space.units_ceil(delta0)  # < delta0  <=>  units < near
        far = space.units_ceil(thr)
        dist0 = space.dist_units(idx[0], idx)
        ok = np.flatnonzero(dist0 <= d0)
        a0, b0 = 0, int(ok.max())
        if b0 == 0:
            raise DomainError("no arc point within delta0 of the start")
        horizon = int(N) if N is not None else 64

        def wait(a, b, T):
            for t in range(1, horizon + 1):
                if dh(t, a, b) >= far:
                    return t
            return None

        def split(a, b, T):
            inner = np.arange(a + 1, b)
            if inner.size < 2:
                return None
            worst_l = np.max(np.stack([dh_row(t, a, inner) for t in range(T + 1)]), axis=0)
            worst_r = np.max(np.stack([dh_row(t, b, inner) for t in range(T + 1)]), axis=0)
            pl = np.flatnonzero(worst_l < near)
            pr = np.flatnonzero(worst_r < near)
            if not pl.size or not pr.size:
                return None
            l, r = int(inner[pl[-1]]), int(inner[pr[0]])
            return (l, r) if l < r else None

    # level 1: the two endpoints; each (a, b) node carries its wait time
    nodes = [(a0, b0, 0)]
    members = [a0, b0]
    depth = 1 if k >= 1 else 0
    split_times = []
    if k == 0:
        labels = ["0", "1"]
        pts = [arc_pts[a0], arc_pts[b0]]
        certs = _certify(space, levels, [a0, b0], mode, thr, params, horizon)
        return WitnessTree(F, mode, k, 0, pts, labels, certs, thr, params, [], diag)
    labels_of = {a0: "0", b0: "1"}
    for level in range(2, k + 1):
        nxt = []
        times = []
        failed = False
        new_labels = {}
        for a, b, T in nodes:
            t = wait(a, b, T)
            if t is None:
                diag.append(f"level {level}: pair ({labels_of[a]}, {labels_of[b]}) "
                            f"does not reach the separation threshold within the horizon")
                failed = True
                break
            cut = split(a, b, t)
            if cut is None:
                diag.append(f"level {level}: no crossing between {labels_of[a]} and "
                            f"{labels_of[b]}; sub-arc too coarse")
                failed = True
                break
            l, r = cut
            times.append(t)
            new_labels[a] = labels_of[a] + "0"
            new_labels[l] = labels_of[a] + "1"
            new_labels[r] = labels_of[b] + "0"
            new_labels[b] = labels_of[b] + "1"
            nxt += [(a, l, t), (r, b, t)]
        if failed:
            break
        nodes = nxt
        labels_of = new_labels
        members = sorted(labels_of)
        split_times.append(times)
        depth = level
    certs = _certify(space, levels, members, mode, thr, params, horizon * (depth + 1))
    pts = [arc_pts[m] for m in members]
    labels = [labels_of[m] for m in members]
    tree = WitnessTree(F, mode, k, depth, pts, labels, certs, thr, params, split_times, diag)
    good, bad = _self_check(tree)
    if not good:
        diag.append(f"{len(bad)} pairs lack a certificate at depth {depth}")
    return tree


def _certify(space, levels, members, mode, thr, params, horizon):
    """For every pair, the first time at which it meets the threshold."""
    members = list(members)
    m = len(members)
    ii, jj = np.triu_indices(m, 1)
    a = np.asarray(members, dtype=np.int64)[ii]
    b = np.asarray(members, dtype=np.int64)[jj]
    found = np.full(ii.size, -1, dtype=np.int64)
    vals = np.zeros(ii.size, dtype=np.int64)
    src = levels.sources
    dist = space.dist_units(src[a], src[b])
    if mode == "expansiveness":
        cut = space.units_floor(thr)
    else:
        cut = space.units_ceil(thr)
        s = params["s"]
    for t in range(horizon + 1):
        todo = np.flatnonzero(found < 0)
        if not todo.size:
            break
        P = levels.padded(t)
        h = paired_hausdorff_units(space, P[a[todo]], P[b[todo]])
        if mode == "expansiveness":
            ok = h > cut
        else:
            hv = np.sqrt(h) if space.squared else h.astype(float)
            dv = np.sqrt(dist[todo]) if space.squared else dist[todo].astype(float)
            ok = (h >= cut) & (hv >= math.exp(s * t) * dv * (1 - 1e-9))
        found[todo[ok]] = t
        vals[todo[ok]] = h[ok]
    return [Certificate(int(i), int(j), int(t), space.units_to_value(int(v)))
            for i, j, t, v in zip(ii, jj, found, vals) if t >= 0]


def _self_check(tree):
    m = len(tree.points)
    have = {(c.i, c.j) for c in tree.certificates}
    missing = [(i, j) for i in range(m) for j in range(i + 1, m) if (i, j) not in have]
    return not missing, missing


def sandwich_check(F, ns, epsilons, budget=2_000_000, source=None):
    """Count table with rows at eps and eps/2, plus its sandwich violations."""
    eps = set()
    for e in epsilons:
        e = as_fraction(e)
        eps.update([e, e / 2])
    est = entropy_estimate(F, sorted(eps, reverse=True), ns, budget=budget, source=source)
    return est.table, est.table.sandwich_violations()
