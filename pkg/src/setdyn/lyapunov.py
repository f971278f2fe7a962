"""Growth quotients over B*-neighbourhoods and the Lyapunov exponents built
from them.

B*_K(delta, n) is the family of compact sets A != K whose iterates stay
within delta of those of K at times 0..n (times n..0 through F^-1 for the
backward variant). The sup and inf over all of C(M) cannot be computed, so
both extremes are taken over an explicit sample family and are sampled
bounds: H is a lower bound for the true sup and h an upper bound for the
true inf.

Quotients are kept as exact fractions of unit counts. On spaces whose unit
is a squared distance the stored ratio is the square of the quotient, which
``power`` records, so comparisons between quotients stay exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .errors import DomainError
from .hausdorff import paired_hausdorff_units
from .relation import ForwardLevels, classify_continuity, csr_padded, iterate_indices
from .space import Point, PointSet, as_fraction, point_set

FAMILIES = ("singletons_on_grid", "perturbed_copies", "mixed")


@dataclass(frozen=True)
class NbhdSpec:
    """Sampling recipe for B*_K(delta, horizon).

    ``count`` bounds the perturbed copies; half of them are rigid translates
    (smallest offsets first) and the rest independent jitters of each point
    of K, all within delta/2 of K.
    """

    delta: object
    horizon: int
    family: str = "mixed"
    count: int = 64
    seed: int = 0

    def __post_init__(self):
        d = as_fraction(self.delta)
        if d <= 0:
            raise DomainError("delta must be positive")
        if int(self.horizon) < 0:
            raise DomainError("horizon must be nonnegative")
        if self.family not in FAMILIES:
            raise DomainError(f"unknown sample family {self.family!r}; expected one of {FAMILIES}")
        if int(self.count) < 0:
            raise DomainError("count must be nonnegative")
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "horizon", int(self.horizon))


@dataclass
class BStarSample:
    """Admissible sets plus the bookkeeping of the rejection step."""

    K: PointSet
    spec: NbhdSpec
    sets: list
    candidates: int
    rejected: int
    backward: bool = False

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    @property
    def empty(self):
        return not self.sets


@dataclass
class GrowthRecord:
    n: int
    H: float
    h: float
    H_exact: object
    h_exact: object
    sample_count: int
    zero_convention_hits: int


@dataclass
class GrowthStats:
    """sup/inf of d_H(F^n K, F^n A) / d_H(K, A) over admissible samples.

    ``records`` has one entry per n = 0..horizon; a ``None`` entry marks a
    horizon with no admissible sample. For backward stats n counts steps of
    F^-1, so the record at n belongs to time -n.
    """

    K: PointSet
    delta: Fraction
    backward: bool
    power: int
    records: list
    candidates: int
    dropped_empty: int = 0
    notes: list = field(default_factory=list)

    def record(self, n):
        return self.records[n] if 0 <= n < len(self.records) else None

    def Y(self, n):
        """log H at horizon n (``-inf`` when every sample merged)."""
        r = self.record(n)
        if r is None:
            return None
        return _log_ratio(r.H_exact, self.power)

    def gaps(self):
        return [n for n, r in enumerate(self.records) if r is None]


def _log_ratio(q, power):
    return -math.inf if q == 0 else math.log(q) / power


def _as_set(F, K):
    if isinstance(K, Point):
        F.space.check(K)
        return point_set(F.space, [K.index])
    if isinstance(K, PointSet):
        if K.space is not F.space:
            raise DomainError("set belongs to a different space")
        if not len(K):
            raise DomainError("K must be nonempty")
        return K
    raise DomainError(f"expected a Point or CompactSet, got {type(K).__name__}")


def _offsets(space, r):
    """Nonzero unit offsets of norm <= r units, smallest norm first."""
    if space.kind == "torus":
        G = space.grid
        side = math.isqrt(r) if space.squared else r
        side = min(side, G // 2)
        a = np.arange(-side, side + 1)
        ox, oy = np.meshgrid(a, a, indexing="ij")
        ox, oy = ox.ravel(), oy.ravel()
        norm = ox * ox + oy * oy if space.squared else np.maximum(np.abs(ox), np.abs(oy))
        keep = (norm <= r) & (norm > 0)
        ox, oy, norm = ox[keep], oy[keep], norm[keep]
        order = np.lexsort((oy, ox, norm))
        return np.stack([ox[order], oy[order]], axis=1)
    side = min(r, space.grid // 2 if space.kind == "circle" else space.grid)
    a = np.arange(1, side + 1)
    return np.stack([a, -a], axis=1).reshape(-1, 1)


def _translate(space, idx, off):
    u = space.unit_coords(idx) + np.asarray(off)[None, :]
    G = space.grid
    if space.kind == "interval":
        if u.min() < 0 or u.max() > G:
            return None
        return u[:, 0]
    u = np.mod(u, G)
    return u[:, 0] if space.kind == "circle" else u[:, 0] * G + u[:, 1]


def _jitter(space, idx, r, rng, offsets):
    if space.kind == "finite":
        out = []
        for k in idx:
            near = np.flatnonzero(space._table[k] <= r)
            out.append(near[rng.integers(near.size)])
        return np.asarray(out, dtype=np.int64)
    G = space.grid
    pick = offsets[rng.integers(len(offsets), size=idx.size)]
    stay = rng.random(idx.size) < 1 / (len(offsets) + 1)
    u = space.unit_coords(idx) + np.where(stay[:, None], 0, pick)
    if space.kind == "interval":
        u = np.clip(u, 0, G)
        return u[:, 0]
    u = np.mod(u, G)
    return u[:, 0] if space.kind == "circle" else u[:, 0] * G + u[:, 1]


def _candidates(F, K, spec):
    """Deterministic candidate list for ``spec`` around the index set ``K``."""
    space = F.space
    du = space.units_floor(spec.delta)
    half = space.units_floor(spec.delta / 2)
    out = []
    if spec.family in ("singletons_on_grid", "mixed"):
        allp = np.arange(space.n)
        far = np.zeros(space.n, dtype=np.int64)
        step = max(1, (1 << 22) // max(1, K.size))
        for s in range(0, space.n, step):
            far[s:s + step] = space.dist_units(allp[s:s + step, None], K[None, :]).max(axis=1)
        out += [np.array([y]) for y in np.flatnonzero(far <= du)]
    if spec.family in ("perturbed_copies", "mixed") and spec.count and half > 0:
        rng = np.random.default_rng(spec.seed)
        n_shift = spec.count // 2 if space.kind != "finite" else 0
        offs = None if space.kind == "finite" else _offsets(space, half)
        if n_shift:
            for off in offs[:n_shift]:
                t = _translate(space, K, off)
                if t is not None:
                    out.append(np.unique(t))
        for _ in range(spec.count - n_shift):
            out.append(np.unique(_jitter(space, K, half, rng, offs)))
    seen = {K.tobytes()}
    uniq = []
    for a in out:
        key = a.astype(np.int64).tobytes()
        if key not in seen:
            seen.add(key)
            uniq.append(a.astype(np.int64))
    return uniq


def _distances_along(F, K, sets, horizon, backward):
    """Unit distances d_H(F^t K, F^t A) for t = 0..horizon, -1 where F^t A = {}.

    Returns an array of shape (horizon + 1, len(sets)) and the number of
    levels actually computed (backward iterates of K itself can die).
    """
    levels = ForwardLevels.from_sets(F, [K] + list(sets), backward=backward)
    space = F.space
    m = len(sets)
    U = np.full((horizon + 1, m), -1, dtype=np.int64)
    done = 0
    for t in range(horizon + 1):
        levels.extend(t)
        M = levels.mats[t]
        sizes = np.diff(M.indptr)
        if sizes[0] == 0:
            break
        alive = np.flatnonzero(sizes[1:] > 0) + 1
        if alive.size:
            sub = csr_padded(sp.vstack([M[0], M[alive]]).tocsr())
            P = np.repeat(sub[:1], alive.size, axis=0)
            U[t, alive - 1] = paired_hausdorff_units(space, P, sub[1:])
        done = t + 1
    return U, done


def _admissible_until(U, du):
    """Largest n with 0 <= U[t] <= du for all t <= n (-1 if none)."""
    ok = (U >= 0) & (U <= du)
    bad = ~ok
    first_bad = np.where(bad.any(axis=0), bad.argmax(axis=0), U.shape[0])
    return first_bad - 1


def sample_bstar(F, K, spec: NbhdSpec, backward=False):
    """Sets of the sample family that lie in B*_K(delta, horizon).

    The constraint is checked by explicit iteration at every time
    0..horizon (through F^-1 when ``backward``). An empty result is a
    valid outcome and carries the rejection counts.
    """
    Ks = _as_set(F, K)
    cands = _candidates(F, Ks.indices, spec)
    U, _ = _distances_along(F, Ks.indices, cands, spec.horizon, backward)
    until = _admissible_until(U, F.space.units_floor(spec.delta))
    keep = np.flatnonzero(until >= spec.horizon)
    sets = [point_set(F.space, cands[i]) for i in keep]
    return BStarSample(Ks, spec, sets, len(cands), len(cands) - len(sets), backward)


def growth_extremes(F, K, spec: NbhdSpec, extra=None, backward=False):
    """H_delta(K, n) and h_delta(K, n) for n = 0..horizon over the samples.

    At horizon n the admissible samples are those satisfying the B*
    constraint up to n. A quotient with F^n(K) = F^n(A) is 0 by convention
    and counted in ``zero_convention_hits``. ``extra`` adds caller-chosen
    sets to the candidate family.
    """
    space = F.space
    Ks = _as_set(F, K)
    cands = _candidates(F, Ks.indices, spec)
    if extra:
        seen = {a.tobytes() for a in cands} | {Ks.indices.tobytes()}
        for a in extra:
            a = np.unique(np.asarray(a.indices if isinstance(a, PointSet) else a, dtype=np.int64))
            if a.size and a.tobytes() not in seen:
                seen.add(a.tobytes())
                cands.append(a)
    U, done = _distances_along(F, Ks.indices, cands, spec.horizon, backward)
    du = space.units_floor(spec.delta)
    until = _admissible_until(U, du)
    power = 2 if space.squared else 1
    notes = []
    dropped = int(np.sum((U[:done] < 0).any(axis=0))) if done else 0
    if backward and dropped:
        notes.append(f"{dropped} candidates have an empty backward iterate and are dropped")
    if done < spec.horizon + 1:
        notes.append(f"F^-{done}(K) is empty; horizons from {done} on are gaps")
    records = []
    d0 = U[0]
    for n in range(spec.horizon + 1):
        sel = np.flatnonzero(until >= n)
        if n >= done or not sel.size:
            records.append(None)
            continue
        num = U[n, sel]
        den = d0[sel]
        zeros = int(np.sum(num == 0))
        # exact max / min of num/den via cross-multiplication
        hi = _extreme(num, den, max)
        lo = _extreme(num, den, min)
        records.append(GrowthRecord(n, float(hi) ** (1 / power), float(lo) ** (1 / power),
                                    hi, lo, int(sel.size), zeros))
    gaps = [n for n, r in enumerate(records) if r is None]
    if gaps:
        notes.append(f"no admissible sample at n = {gaps}")
    return GrowthStats(Ks, spec.delta, backward, power, records, len(cands), dropped, notes)


def _extreme(num, den, pick):
    v = num.astype(float) / den
    k = int(np.argmax(v) if pick is max else np.argmin(v))
    best = Fraction(int(num[k]), int(den[k]))
    # float ties may hide an exact winner; settle them exactly
    close = np.flatnonzero(np.abs(v - v[k]) <= 1e-12 * max(1.0, abs(v[k])))
    for c in close:
        q = Fraction(int(num[c]), int(den[c]))
        best = pick(best, q)
    return best


# -- exponents ---------------------------------------------------------------

@dataclass
class RungFit:
    """Slope of log H (or log h) against n on one delta rung.

    ``partial`` marks fits from fewer than three usable horizons.
    """

    delta: Fraction
    value: float
    ci: float
    n_used: list
    partial: bool


@dataclass
class ExponentEstimate:
    """Per-delta exponents and their delta -> 0 extrapolations.

    ``lambda_minus`` follows the backward definition literally:
    -lim (1/n) log h_delta(x, n) over n -> -infinity, which is the slope of
    log h against the number of backward steps.
    """

    x: object
    plus: list
    minus: list
    chi_plus: float
    chi_plus_drift: float
    chi_minus: float
    chi_minus_drift: float
    method: str
    monotone_plus: bool
    monotone_minus: bool
    lipschitz: object
    lipschitz_ok: bool
    partial: bool
    notes: list = field(default_factory=list)

    @property
    def Lambda_plus(self):
        return {r.delta: r.value for r in self.plus}

    @property
    def lambda_minus(self):
        return {r.delta: r.value for r in self.minus}


def _fit(gs, which):
    ns, ys = [], []
    for r in gs.records:
        if r is None:
            continue
        q = r.H_exact if which == "H" else r.h_exact
        if q == 0:
            continue
        ns.append(r.n)
        ys.append(_log_ratio(q, gs.power))
    if len(ns) < 2:
        return RungFit(gs.delta, math.nan, math.nan, ns, True)
    if len(ns) == 2:
        slope = (ys[1] - ys[0]) / (ns[1] - ns[0])
        return RungFit(gs.delta, slope, 0.0, ns, True)
    res = _linregress(ns, ys)
    return RungFit(gs.delta, res[0], res[1], ns, False)


def _linregress(ns, ys):
    """Least-squares slope and the half-width of its 95% interval."""
    res = stats.linregress(ns, ys)
    df = len(ns) - 2
    half = float(stats.t.ppf(0.975, df) * res.stderr) if df > 0 else 0.0
    return float(res.slope), half


def _extrapolate(fits):
    vals = [f.value for f in fits if not math.isnan(f.value)]
    if not vals:
        return math.nan, math.nan
    drift = abs(vals[-1] - vals[-2]) if len(vals) > 1 else math.nan
    return vals[-1], drift


def _monotone(fits, direction):
    vals = [f.value for f in fits if not math.isnan(f.value)]
    tol = 1e-9
    if direction < 0:
        return all(b <= a + tol for a, b in zip(vals, vals[1:]))
    return all(b >= a - tol for a, b in zip(vals, vals[1:]))


def exponent_estimate(F, x, deltas, horizon, spec_template=None, backward_horizon=None,
                      lipschitz=None):
    """Lambda+_delta and lambda-_delta on a decreasing delta ladder.

    chi+ and chi- are the values on the last rung with a usable fit; the
    drift to the previous rung is reported as their uncertainty.
    ``lipschitz`` defaults to the forward estimate of
    :func:`classify_continuity`; slopes above log(lipschitz) are flagged.
    """
    deltas = [as_fraction(d) for d in deltas]
    if not deltas:
        raise DomainError("need at least one delta")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise DomainError("deltas must be strictly decreasing")
    Ks = _as_set(F, x)
    horizon = int(horizon)
    bh = horizon if backward_horizon is None else int(backward_horizon)
    tmpl = spec_template or NbhdSpec(deltas[0], horizon, family="singletons_on_grid")
    notes = []
    if lipschitz is None:
        lipschitz = classify_continuity(F, sample_budget=20_000).lipschitz_forward
    k = float(lipschitz) if lipschitz is not None else math.inf
    plus, minus = [], []
    quotient_ok = True
    for d in deltas:
        fw = growth_extremes(F, Ks, replace(tmpl, delta=d, horizon=horizon))
        plus.append(_fit(fw, "H"))
        for r in fw.records:
            if r is not None and r.H > k ** r.n * (1 + 1e-12):
                quotient_ok = False
        if bh > 0:
            bw = growth_extremes(F, Ks, replace(tmpl, delta=d, horizon=bh), backward=True)
            minus.append(_fit(bw, "h"))
            notes += [f"delta={d} backward: {m}" for m in bw.notes]
        notes += [f"delta={d}: {m}" for m in fw.notes]
    cp, dp = _extrapolate(plus)
    cm, dm = _extrapolate(minus)
    slope_ok = all(math.isnan(f.value) or f.value <= math.log(k) + 1e-9 for f in plus) \
        if k > 0 else False
    partial = any(f.partial for f in plus + minus) or math.isnan(cp)
    if partial:
        notes.append("some rungs have fewer than three usable horizons")
    return ExponentEstimate(Ks, plus, minus, cp, dp, cm, dm, "last_rung_with_drift",
                            _monotone(plus, -1), _monotone(minus, +1), lipschitz,
                            slope_ok and quotient_ok, partial, notes)


# -- subadditivity -------------------------------------------------------------

@dataclass
class SubadditivityRow:
    n: int
    k: int
    Y_nk: float
    Y_n: float
    Y_shift_k: float
    eps_stat: float
    holds: bool
    inclusion_ok: bool
    samples: int
    gap: bool = False


@dataclass
class SubadditivityReport:
    x: object
    delta: Fraction
    rows: list

    @property
    def holds(self):
        return all(r.holds and r.inclusion_ok for r in self.rows if not r.gap)

    @property
    def max_eps_stat(self):
        return max((r.eps_stat for r in self.rows if not r.gap), default=0.0)


def subadditivity_check(F, x, delta, pairs, sample_budget=64, seed=0, family="mixed"):
    """Y(d, x, n+k) <= Y(d, x, n) + Y(d, F^n x, k) + eps_stat on samples.

    The sample for B*_{F^n x}(d, k) is augmented with F^n(A) for every
    sampled A in B*_x(d, n+k); by the inclusion B*_x(d, n+k) -> B*_{F^n x}(d, k)
    these are admissible, which is checked. With the augmentation the
    inequality holds exactly for the sampled quantities. ``eps_stat`` is
    the log-gap the augmentation added to the unaugmented sup, a measure of
    how far the plain sample was from the sup it estimates.
    """
    space = F.space
    d = as_fraction(delta)
    Ks = _as_set(F, x)
    rows = []
    for n, k in pairs:
        n, k = int(n), int(k)
        if n < 1 or k < 1:
            raise DomainError("subadditivity pairs must be positive")
        spec = NbhdSpec(d, n + k, family=family, count=sample_budget, seed=seed)
        st = growth_extremes(F, Ks, spec)
        r_nk, r_n = st.record(n + k), st.record(n)
        if r_nk is None or r_n is None:
            rows.append(SubadditivityRow(n, k, math.nan, math.nan, math.nan, math.nan,
                                         False, False, 0, gap=True))
            continue
        adm = sample_bstar(F, Ks, spec)
        Kn = point_set(space, iterate_indices(F, n, Ks.indices))
        pushed = [iterate_indices(F, n, A.indices) for A in adm.sets]
        kspec = replace(spec, horizon=k, seed=seed + 1)
        raw = growth_extremes(F, Kn, kspec)
        aug = growth_extremes(F, Kn, kspec, extra=pushed)
        moved = [p for p in pushed if p.tobytes() != Kn.indices.tobytes()]
        inclusion_ok = True
        if moved:
            chk = _distances_along(F, Kn.indices, moved, k, False)[0]
            inclusion_ok = bool(np.all(_admissible_until(chk, space.units_floor(d)) >= k))
        ra, rr = aug.record(k), raw.record(k)
        power = st.power
        lhs = r_nk.H_exact
        holds = lhs <= r_n.H_exact * ra.H_exact
        y_raw = _log_ratio(rr.H_exact, power) if rr is not None else -math.inf
        y_aug = _log_ratio(ra.H_exact, power)
        eps = 0.0 if y_aug == y_raw else y_aug - y_raw
        rows.append(SubadditivityRow(n, k, _log_ratio(lhs, power), _log_ratio(r_n.H_exact, power),
                                     y_raw, eps, bool(holds), inclusion_ok, r_nk.sample_count))
    return SubadditivityReport(Ks, d, rows)


# -- measure-weighted growth ---------------------------------------------------

@dataclass
class WeightedGrowth:
    delta: Fraction
    a: list
    points: int
    skipped: int
    fekete_violations: list
    tolerance: float


def weighted_growth(F, weights, delta, horizon, n_points=32, seed=0, family="singletons_on_grid",
                    tolerance=1e-9):
    """a_n = mean of Y(delta, x, n) over points drawn from ``weights``.

    Points whose samples leave a gap at some n are skipped for that n.
    Reports every (n, k) with a_{n+k} > a_n + a_k + tolerance.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (F.space.n,) or np.any(w < 0) or not np.isclose(w.sum(), 1):
        raise DomainError("weights must be a probability vector on the space")
    rng = np.random.default_rng(seed)
    xs = rng.choice(F.space.n, size=int(n_points), p=w)
    d = as_fraction(delta)
    horizon = int(horizon)
    sums = np.zeros(horizon + 1)
    counts = np.zeros(horizon + 1, dtype=int)
    skipped = 0
    for xi in xs:
        st = growth_extremes(F, Point(F.space, int(xi)), NbhdSpec(d, horizon, family=family))
        for n in range(horizon + 1):
            y = st.Y(n)
            if y is None or y == -math.inf:
                skipped += 1
                continue
            sums[n] += y
            counts[n] += 1
    a = [float(s / c) if c else math.nan for s, c in zip(sums, counts)]
    bad = []
    for n in range(1, horizon + 1):
        for k in range(1, horizon + 1 - n):
            vals = (a[n + k], a[n], a[k])
            if not any(math.isnan(v) for v in vals) and a[n + k] > a[n] + a[k] + tolerance:
                bad.append((n, k, a[n + k] - a[n] - a[k]))
    return WeightedGrowth(d, a, int(xs.size), skipped, bad, tolerance)
