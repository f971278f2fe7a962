"""Positive expansiveness, RW-expansiveness and the uniform separation
horizons used in the positive-entropy argument.

Every verdict is relative to the grid resolution and the horizon: a pair
"separates" when d_H(F^n x, F^n y) exceeds alpha for some n <= N. Pairs that
do not separate are refuted outright when their joint iterate sequence is
seen to repeat (it is then periodic and can never separate), otherwise they
leave the verdict inconclusive.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, InconclusiveError
from .hausdorff import hausdorff_units, paired_hausdorff_units
from .relation import ForwardLevels
from .space import as_fraction

VERIFIED = "verified_at_resolution"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"

_CHUNK = 1 << 16
_MAX_LISTED = 100


@dataclass
class ExpansivenessVerdict:
    """Outcome of an expansiveness check.

    ``witness_pairs``/``witness_times`` hold the first separation time of
    every covered pair (-1 for pairs that never separated). At most
    ``_MAX_LISTED`` non-separating pairs are listed in ``counterexamples``;
    ``n_counterexamples`` is the full count.
    """

    alpha: object
    horizon: int
    status: str
    pairs_checked: int
    exhaustive: bool
    strict: bool = True
    witness_pairs: np.ndarray = field(default=None, repr=False)
    witness_times: np.ndarray = field(default=None, repr=False)
    counterexamples: list = field(default_factory=list)
    n_counterexamples: int = 0
    n_periodic: int = 0
    max_witness_time: int | None = None
    notes: list = field(default_factory=list)

    @property
    def verified(self):
        return self.status == VERIFIED


def _threshold(space, alpha, strict):
    """Unit count u such that separation means units > u."""
    alpha = as_fraction(alpha)
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if strict:
        return space.units_floor(alpha)
    return space.units_ceil(alpha) - 1


def separation_time(F, x, y, alpha, N, strict=True):
    """Least n in [0, N] with d_H(F^n(x), F^n(y)) > alpha, else None."""
    space = F.space
    space.check(x)
    space.check(y)
    if x == y:
        raise DomainError("separation_time needs distinct points")
    if int(N) < 1:
        raise DomainError("N must be at least 1")
    t = _threshold(space, alpha, strict)
    a = np.array([x.index])
    b = np.array([y.index])
    for n in range(int(N) + 1):
        if n:
            a = F.image_indices(a)
            b = F.image_indices(b)
        if hausdorff_units(space, a, b) > t:
            return n
    return None


def _pair_source(space, pairs):
    if pairs == "exhaustive" or pairs is None:
        i, j = np.triu_indices(space.n, 1)
        return i.astype(np.int64), j.astype(np.int64), True
    if isinstance(pairs, dict):
        kind = pairs.get("kind", "sampled")
        if kind == "exhaustive":
            return _pair_source(space, "exhaustive")
        count, seed = int(pairs["count"]), int(pairs.get("seed", 0))
    elif isinstance(pairs, (tuple, list)) and pairs and pairs[0] == "sampled":
        count, seed = int(pairs[1]), int(pairs[2]) if len(pairs) > 2 else 0
    else:
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        keep = arr[:, 0] != arr[:, 1]
        return arr[keep, 0], arr[keep, 1], False
    rng = np.random.default_rng(seed)
    i = rng.integers(0, space.n, size=count)
    j = rng.integers(0, space.n, size=count)
    keep = i != j
    return np.minimum(i, j)[keep], np.maximum(i, j)[keep], False


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get("SVD_THREADS", "1") or 1)
    return max(1, int(threads))


def _map_chunks(fn, n_items, threads, chunk=_CHUNK):
    """Apply ``fn(lo, hi)`` over fixed chunks; results come back in order."""
    bounds = [(lo, min(lo + chunk, n_items)) for lo in range(0, n_items, chunk)]
    if threads <= 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda b: fn(*b), bounds))


def first_separation_times(F, i, j, threshold_units, N, threads=1, levels=None):
    """First n <= N with d_H(F^n x_i, F^n x_j) > threshold, or -1."""
    space = F.space
    levels = levels or ForwardLevels(F)
    levels.extend(N)
    pads = [levels.padded(t) for t in range(N + 1)]

    def work(lo, hi):
        ii, jj = i[lo:hi], j[lo:hi]
        out = np.full(hi - lo, -1, dtype=np.int64)
        active = np.arange(hi - lo)
        for t in range(N + 1):
            if not active.size:
                break
            P = pads[t]
            h = paired_hausdorff_units(space, P[ii[active]], P[jj[active]])
            sep = h > threshold_units
            out[active[sep]] = t
            active = active[~sep]
        return out

    parts = _map_chunks(work, i.size, threads)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def _is_periodic(levels, a, b, N):
    """Whether the joint state (F^t a, F^t b) repeats for some t <= N."""
    seen = set()
    for t in range(N + 1):
        key = (levels.key(t, a), levels.key(t, b))
        if key in seen:
            return True
        seen.add(key)
    return False


def check_positive_expansive(F, alpha, N, pairs="exhaustive", strict=True, threads=None):
    """Check that distinct points separate by more than ``alpha`` within N steps.

    ``pairs`` is ``"exhaustive"`` (all grid pairs), ``("sampled", count,
    seed)`` or an explicit array of index pairs. ``strict=False`` tests
    ``>= alpha`` instead; the definition is strict.
    """
    N = int(N)
    if N < 1:
        raise DomainError("horizon N must be at least 1")
    space = F.space
    t = _threshold(space, alpha, strict)
    i, j, exhaustive = _pair_source(space, pairs)
    levels = ForwardLevels(F)
    times = first_separation_times(F, i, j, t, N, resolve_threads(threads), levels)
    bad = np.flatnonzero(times < 0)
    periodic = 0
    listed = []
    for k in bad:
        per = _is_periodic(levels, int(i[k]), int(j[k]), N)
        periodic += per
        if len(listed) < _MAX_LISTED:
            listed.append((space.point_at(int(i[k])), space.point_at(int(j[k]))))
    if not bad.size:
        status = VERIFIED
    elif periodic:
        status = REFUTED
    else:
        status = INCONCLUSIVE
    good = times[times >= 0]
    notes = []
    if not strict:
        notes.append("non-strict separation (>= alpha) requested")
    return ExpansivenessVerdict(
        alpha=as_fraction(alpha), horizon=N, status=status, pairs_checked=int(i.size),
        exhaustive=exhaustive, strict=strict, witness_pairs=np.stack([i, j], axis=1),
        witness_times=times, counterexamples=listed, n_counterexamples=int(bad.size),
        n_periodic=int(periodic), max_witness_time=int(good.max()) if good.size else None,
        notes=notes)


# -- RW-expansiveness ----------------------------------------------------------

@dataclass
class RWVerdict:
    delta: object
    horizon: int
    status: str
    necessary_condition: bool
    witness: tuple | None = None
    states: int = 0
    surviving_forward: int = 0
    surviving_backward: int = 0
    notes: list = field(default_factory=list)

    @property
    def verified(self):
        return self.status == VERIFIED


def _close_pairs(space, t):
    """All ordered pairs (u, v) with dist(u, v) <= t units, u != v included."""
    n = space.n
    if space.kind == "finite" or n <= 4096:
        out_u, out_v = [], []
        for lo in range(0, n, 1024):
            d = space.dist_units(np.arange(lo, min(lo + 1024, n))[:, None], np.arange(n)[None, :])
            u, v = np.nonzero(d <= t)
            out_u.append(u + lo)
            out_v.append(v)
        return np.concatenate(out_u), np.concatenate(out_v)
    from scipy.spatial import cKDTree
    X = space.unit_coords(np.arange(n)).astype(float)
    box = None if space.kind == "interval" else space.grid
    r = math.sqrt(t) if space.squared else float(t)
    pr = cKDTree(X, boxsize=box).query_pairs(r + 0.5, p=2 if space.squared else np.inf,
                                             output_type="ndarray")
    pr = pr[space.dist_units(pr[:, 0], pr[:, 1]) <= t]
    u = np.concatenate([pr[:, 0], pr[:, 1], np.arange(n)])
    v = np.concatenate([pr[:, 1], pr[:, 0], np.arange(n)])
    return u, v


def _has_common(F, u, v):
    """Row-wise test F(u) meets F(v)."""
    n = F.space.n
    keys = np.repeat(np.arange(n), F.row_sizes) * n + F.targets
    out = np.zeros(u.size, dtype=bool)
    # expand the smaller row set of each pair and look its members up
    rows = np.repeat(np.arange(u.size), F.row_sizes[u])
    offs = np.repeat(F.indptr[u] - np.cumsum(F.row_sizes[u]) + F.row_sizes[u], F.row_sizes[u]) \
        + np.arange(int(F.row_sizes[u].sum()))
    code = v[rows] * n + F.targets[offs]
    pos = np.searchsorted(keys, code)
    hit = (pos < keys.size) & (keys[np.minimum(pos, keys.size - 1)] == code)
    np.logical_or.at(out, rows[hit], True)
    return out


def _prune(step, codes, n, N):
    """Pairs (as u*n+v codes) with a joint path of every length <= N inside
    ``codes``. Returns the survivors and whether the set stabilized."""
    alive = np.sort(codes)
    for _ in range(N):
        u, v = np.divmod(alive, n)
        su, sv = step.row_sizes[u], step.row_sizes[v]
        cnt = su * sv
        has = np.zeros(alive.size, dtype=bool)
        if cnt.sum():
            k = np.repeat(np.arange(alive.size), cnt)
            local = np.arange(int(cnt.sum())) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            a = step.targets[step.indptr[u[k]] + local // sv[k]]
            b = step.targets[step.indptr[v[k]] + local % sv[k]]
            code = a * n + b
            pos = np.searchsorted(alive, code)
            hit = (pos < alive.size) & (alive[np.minimum(pos, alive.size - 1)] == code)
            np.logical_or.at(has, k[hit], True)
        nxt = alive[has]
        if nxt.size == alive.size:
            return alive, True
        alive = nxt
    return alive, False


def bi_infinite_core(F, N=None):
    """Points with backward chains of every length (greatest fixed point)."""
    inv = F.inverse()
    alive = np.ones(F.space.n, dtype=bool)
    rows = np.repeat(np.arange(F.space.n), inv.row_sizes)
    for _ in range(N or F.space.n):
        has = np.zeros(F.space.n, dtype=bool)
        np.logical_or.at(has, rows, alive[inv.targets])
        nxt = alive & has
        if np.array_equal(nxt, alive):
            break
        alive = nxt
    return alive


def check_rw_expansive(F, delta, N, path_cap=5_000_000):
    """RW-expansiveness at resolution: distinct bi-infinite suborbits must
    separate by more than ``delta`` at some time.

    The necessary condition is checked first: for distinct x, y with
    dist <= delta, F(x) and F(y) must be disjoint or x, y must share no
    preimage that itself has an infinite backward history. Then the joint
    graph on pairs within ``delta`` is pruned forward and backward for up
    to N rounds. An empty forward or backward survivor set of distinct
    starting pairs verifies; a stable nonempty common survivor set refutes;
    anything else is inconclusive.
    """
    space = F.space
    delta = as_fraction(delta)
    if delta <= 0:
        raise DomainError("delta must be positive")
    N = int(N)
    t = space.units_floor(delta)
    n = space.n
    u, v = _close_pairs(space, t)
    if u.size > path_cap:
        return RWVerdict(delta, N, INCONCLUSIVE, True, states=int(u.size),
                         notes=[f"{u.size} joint states exceed path_cap={path_cap}"])
    core = bi_infinite_core(F)
    inv = F.inverse()
    distinct = u != v
    du, dv = u[distinct], v[distinct]
    fwd_meet = _has_common(F, du, dv)
    # restrict preimages to the bi-infinite core before intersecting
    if core.all():
        core_inv = inv
    else:
        ip = inv.pairs()
        core_inv = type(F).from_pairs(space, ip[core[ip[:, 1]]])
    bwd_meet = _has_common(core_inv, du, dv)
    both = np.flatnonzero(fwd_meet & bwd_meet)
    if both.size:
        w = (space.point_at(int(du[both[0]])), space.point_at(int(dv[both[0]])))
        return RWVerdict(delta, N, REFUTED, False, witness=w, states=int(u.size),
                         notes=["merging pair: shared image and shared preimage"])
    codes = u * n + v
    fwd, fstable = _prune(F, codes, n, N)
    bwd, bstable = _prune(inv, codes, n, N)
    fu, fv = np.divmod(fwd, n)
    bu, bv = np.divmod(bwd, n)
    f_start = fwd[fu != fv]
    b_start = bwd[bu != bv]
    common = np.intersect1d(f_start, b_start)
    if not f_start.size or not b_start.size or not common.size:
        # a pair that cannot be continued in one direction within the
        # horizon cannot carry a bi-infinite non-separating pair of suborbits
        return RWVerdict(delta, N, VERIFIED, True, states=int(u.size),
                         surviving_forward=int(f_start.size), surviving_backward=int(b_start.size))
    if fstable and bstable:
        a, b = divmod(int(common[0]), n)
        return RWVerdict(delta, N, REFUTED, True, witness=(space.point_at(a), space.point_at(b)),
                         states=int(u.size), surviving_forward=int(f_start.size),
                         surviving_backward=int(b_start.size),
                         notes=["a distinct pair admits delta-close joint paths in both directions"])
    return RWVerdict(delta, N, INCONCLUSIVE, True, states=int(u.size),
                     surviving_forward=int(f_start.size), surviving_backward=int(b_start.size),
                     notes=["joint paths survive the horizon without stabilizing"])


# -- uniform horizons ------------------------------------------------------------

@dataclass
class UniformBounds:
    delta: object
    alpha: object
    n0: int
    N2: int
    band_tolerance: object
    n0_pair: tuple
    N2_pair: tuple
    band_hits: int


def uniform_bounds(F, alpha, delta, N, band_tolerance=None, pairs="exhaustive", threads=None):
    """Uniform horizons n0 and N2 over the pair source.

    n0 is the largest, over pairs with dist >= delta, first time j <= N with
    d_H(F^j x, F^j y) >= alpha. N2 is the largest number of further steps
    (searched up to N more) needed to reach d_H >= alpha from a time j <= N
    at which d_H lies in the closed band alpha/4 +- band_tolerance
    (default: half a grid step, so the band never reaches 0 while alpha/4
    exceeds it). Raises :class:`InconclusiveError` with the
    worst pair when some pair does not reach alpha in time.
    """
    space = F.space
    alpha = as_fraction(alpha)
    delta = as_fraction(delta)
    N = int(N)
    if band_tolerance is None:
        band_tolerance = Fraction(1, 2 * space.grid) if space.kind != "finite" else \
            space.units_to_value(1) / 2
    band = as_fraction(band_tolerance)
    i, j, _ = _pair_source(space, pairs)
    reach = space.units_ceil(alpha)  # d >= alpha  <=>  units >= reach
    lo = space.units_ceil(max(alpha / 4 - band, 0))
    hi = space.units_floor(alpha / 4 + band)
    dmin = space.units_ceil(delta)
    levels = ForwardLevels(F)
    T = 2 * N
    levels.extend(T)
    pads = [levels.padded(s) for s in range(T + 1)]
    threads = resolve_threads(threads)

    def work(a, b):
        ii, jj = i[a:b], j[a:b]
        H = np.stack([paired_hausdorff_units(space, pads[s][ii], pads[s][jj]) for s in range(T + 1)],
                     axis=1)
        ok = H >= reach
        # next time >= s with ok, via a reverse running minimum
        idx = np.where(ok, np.arange(T + 1)[None, :], T + 1)
        nxt = np.minimum.accumulate(idx[:, ::-1], axis=1)[:, ::-1]
        far = space.dist_units(ii, jj) >= dmin
        first = nxt[:, 0]
        n0_vals = np.where(far, first, -1)
        inband = (H[:, :N + 1] >= lo) & (H[:, :N + 1] <= hi)
        wait = nxt[:, :N + 1] - np.arange(N + 1)[None, :]
        waits = np.where(inband, wait, -1)
        return n0_vals, waits.max(axis=1), int(inband.sum())

    res = _map_chunks(work, i.size, threads, chunk=1 << 14)
    n0_vals = np.concatenate([r[0] for r in res])
    w = np.concatenate([r[1] for r in res])
    hits = sum(r[2] for r in res)
    if (n0_vals > N).any():
        k = int(np.argmax(n0_vals))
        raise InconclusiveError("some pair with dist >= delta does not reach alpha within N",
                                worst_pair=(space.point_at(int(i[k])), space.point_at(int(j[k]))))
    if (w > N).any():
        k = int(np.argmax(w))
        raise InconclusiveError("some pair in the alpha/4 band does not recover alpha within N",
                                worst_pair=(space.point_at(int(i[k])), space.point_at(int(j[k]))))
    if not (n0_vals >= 0).any():
        raise InconclusiveError("no pair at distance >= delta")
    k0 = int(np.argmax(n0_vals))
    k2 = int(np.argmax(w))
    return UniformBounds(delta, alpha, int(n0_vals[k0]), max(int(w[k2]), 0), band,
                         (space.point_at(int(i[k0])), space.point_at(int(j[k0]))),
                         (space.point_at(int(i[k2])), space.point_at(int(j[k2]))) if w[k2] >= 0 else None,
                         hits)
