"""Set-valued maps stored as relations on a discretized space.

A map is a boolean adjacency structure in CSR form: row ``x`` lists the
indices of ``F(x)``. Analytic builtins (finite unions of affine branches
applied mod 1) are materialized on the grid at construction; they also keep
an exact evaluator for off-grid points, used by the continuity probes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import DomainError, TotalityError, UnsupportedError
from .hausdorff import hausdorff_units, pad_sets, paired_hausdorff_units
from .space import MetricSpace, Point, PointSet, _round_half_up, as_fraction, point_set


class SetValuedMap:
    """A relation ``F`` on ``space`` with forward rows ``F(x)``.

    ``indptr``/``targets`` follow the scipy CSR convention with sorted,
    duplicate-free rows. ``total`` records whether every row is nonempty;
    images of empty rows raise :class:`TotalityError`.
    """

    def __init__(self, space, indptr, targets, *, name="relation", evaluator=None,
                 meta=None, spec=None):
        self.space = space
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int64)
        if self.indptr.shape != (space.n + 1,):
            raise DomainError("relation rows do not match the space size")
        if self.targets.size and (self.targets.min() < 0 or self.targets.max() >= space.n):
            raise DomainError("relation refers to a point outside the space")
        self.indptr.setflags(write=False)
        self.targets.setflags(write=False)
        self.name = name
        self.meta = dict(meta or {})
        self.spec = spec
        self._evaluator = evaluator
        sizes = np.diff(self.indptr)
        self.row_sizes = sizes
        self.total = bool(np.all(sizes > 0))
        hit = np.zeros(space.n, dtype=bool)
        hit[self.targets] = True
        self.surjective = bool(hit.all())
        self._inverse = None
        self._padded = None

    # -- construction helpers ---------------------------------------------

    @classmethod
    def from_pairs(cls, space, pairs, **kw):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= space.n):
            raise DomainError("relation pair refers to a point outside the space")
        m = sp.csr_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])),
                          shape=(space.n, space.n))
        return cls._from_matrix(space, m, **kw)

    @classmethod
    def _from_matrix(cls, space, m, **kw):
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(space, m.indptr, m.indices, **kw)

    def matrix(self):
        """Boolean adjacency as a scipy CSR matrix."""
        data = np.ones(self.targets.size, dtype=np.int8)
        return sp.csr_matrix((data, self.targets, self.indptr), shape=(self.space.n, self.space.n))

    def pairs(self):
        rows = np.repeat(np.arange(self.space.n), self.row_sizes)
        return np.stack([rows, self.targets], axis=1)

    def __repr__(self):
        return f"SetValuedMap({self.name}, {self.space!r})"

    # -- images ------------------------------------------------------------

    def row(self, i):
        return self.targets[self.indptr[i]:self.indptr[i + 1]]

    def image_indices(self, idx, allow_empty=False):
        """Sorted union of the rows in ``idx``."""
        idx = np.unique(np.asarray(idx, dtype=np.int64))
        starts = self.indptr[idx]
        sizes = self.indptr[idx + 1] - starts
        if not allow_empty and np.any(sizes == 0):
            bad = int(idx[np.flatnonzero(sizes == 0)[0]])
            raise TotalityError(f"F({self._label(bad)}) is empty", point=Point(self.space, bad))
        total = int(sizes.sum())
        if total == 0:
            return np.zeros(0, dtype=np.int64)
        offs = np.repeat(starts - np.cumsum(sizes) + sizes, sizes) + np.arange(total)
        return np.unique(self.targets[offs])

    def _label(self, i):
        c = self.space.coords(i)
        return c if isinstance(c, str) else ", ".join(map(str, c))

    def inverse(self):
        """F^-1 as a relation: y -> {x : y in F(x)}. Rows may be empty."""
        if self._inverse is None:
            inv = SetValuedMap._from_matrix(self.space, self.matrix().T.tocsr(),
                                            name=f"{self.name}^-1")
            inv._inverse = self
            self._inverse = inv
        return self._inverse

    def padded_rows(self):
        """(n, w) array of rows padded with their first element."""
        if self._padded is None:
            if not self.total:
                raise TotalityError("padded rows need a total relation")
            self._padded = pad_sets([self.row(i) for i in range(self.space.n)]) \
                if self.row_sizes.max() != self.row_sizes.min() else \
                self.targets.reshape(self.space.n, -1)
        return self._padded

    def evaluate(self, coords):
        """Exact image of an off-grid coordinate tuple as coordinate tuples."""
        if self._evaluator is None:
            raise UnsupportedError(f"{self.name} has no exact evaluator")
        return self._evaluator(tuple(Fraction(c) for c in coords))

    @property
    def has_evaluator(self):
        return self._evaluator is not None


def _as_indices(F, A):
    if isinstance(A, Point):
        F.space.check(A)
        return np.array([A.index], dtype=np.int64)
    if isinstance(A, PointSet):
        if A.space is not F.space:
            raise DomainError("set belongs to a different space")
        return A.indices
    raise DomainError(f"expected a Point or point set, got {type(A).__name__}")


def image(F, A):
    """F(A) as a CompactSet."""
    idx = _as_indices(F, A)
    if not idx.size:
        raise DomainError("image of the empty set is not a compact set")
    return point_set(F.space, F.image_indices(idx))


def preimage(F, B):
    """F^-1(B) = {x : F(x) meets B}; an EmptySet when nothing maps into B."""
    idx = _as_indices(F, B)
    return point_set(F.space, F.inverse().image_indices(idx, allow_empty=True))


def star(F, B):
    """F*(B) = {x : F(x) is contained in B} (possibly empty)."""
    idx = _as_indices(F, B)
    inside = np.zeros(F.space.n, dtype=bool)
    inside[idx] = True
    rows = np.repeat(np.arange(F.space.n), F.row_sizes)
    bad = np.zeros(F.space.n, dtype=bool)
    bad[rows[~inside[F.targets]]] = True
    return point_set(F.space, np.flatnonzero(~bad))


def compose(G, F):
    """G o F, that is x -> G(F(x))."""
    if G.space is not F.space:
        raise DomainError("composition needs maps on the same space")
    m = F.matrix().astype(np.int64) @ G.matrix().astype(np.int64)
    return SetValuedMap._from_matrix(F.space, m, name=f"{G.name}o{F.name}")


def iterate_indices(F, n, idx):
    n = int(n)
    step = F if n >= 0 else F.inverse()
    cur = np.unique(np.asarray(idx, dtype=np.int64))
    for _ in range(abs(n)):
        cur = step.image_indices(cur, allow_empty=n < 0)
        if not cur.size:
            break
    return cur


def iterate(F, n, x):
    """F^n(x); negative ``n`` iterates F^-1, and F^0(x) = {x}.

    Backward iterates can be empty on non-surjective grids; the result is
    then an :class:`EmptySet`.
    """
    return point_set(F.space, iterate_indices(F, n, _as_indices(F, x)))


# -- builtins ----------------------------------------------------------------

def _branch_units(space, branches):
    """Grid images of every point under each branch, shape (n, nb)."""
    G = space.grid
    coords = space.unit_coords(np.arange(space.n))
    cols = []
    for br in branches:
        if len(br) != space.dim:
            raise DomainError(f"branch needs {space.dim} (slope, offset) pairs")
        parts = []
        for d, (slope, offset) in enumerate(br):
            off = as_fraction(offset) * G
            if off.denominator == 1:
                u = int(slope) * coords[:, d] + int(off)
            else:
                u = np.array([_round_half_up(int(slope) * int(c) + off) for c in coords[:, d]],
                             dtype=np.int64)
            parts.append(np.mod(u, G))
        if space.kind == "torus":
            cols.append(parts[0] * G + parts[1])
        else:
            cols.append(parts[0])
    return np.stack(cols, axis=1)


def affine_branches(space, branches, name="affine_branches"):
    """Union of affine branches ``x_d -> slope*x_d + offset (mod 1)``.

    ``branches`` is a list of branches, each a list of ``(slope, offset)``
    pairs, one per coordinate. Slopes must be integers so that branches are
    well defined on the circle and torus.
    """
    if space.kind == "finite":
        raise UnsupportedError("affine branches need a grid space")
    norm = []
    for br in branches:
        nb = []
        for slope, offset in br:
            if Fraction(as_fraction(slope)).denominator != 1:
                raise DomainError("branch slopes must be integers")
            nb.append((int(as_fraction(slope)), as_fraction(offset)))
        norm.append(tuple(nb))
    if not norm:
        raise DomainError("at least one branch is required")
    img = _branch_units(space, norm)
    n = space.n
    pairs = np.stack([np.repeat(np.arange(n), img.shape[1]), img.ravel()], axis=1)

    def evaluator(c):
        out = []
        for br in norm:
            out.append(tuple((s * x + o) % 1 for (s, o), x in zip(br, c)))
        return out

    spec = {"kind": "affine_branches",
            "branches": [[[s, str(o)] for s, o in br] for br in norm]}
    return SetValuedMap.from_pairs(space, pairs, name=name, evaluator=evaluator, spec=spec)


def doubling(space):
    """z -> {2z, 2z + 1/2} mod 1 on a circle (or interval) grid."""
    return affine_branches(space, [[(2, 0)], [(2, Fraction(1, 2))]], name="doubling")


def circle_squaring(space):
    """z -> {z^2, -z^2} on the unit circle, in angle coordinates.

    Squaring doubles the angle and the sign flip adds a half turn, so this
    coincides with :func:`doubling` on the circle.
    """
    if space.kind != "circle":
        raise DomainError("circle_squaring lives on the circle")
    return affine_branches(space, [[(2, 0)], [(2, Fraction(1, 2))]], name="circle_squaring")


def single_doubling(space):
    """The single-valued branch z -> 2z mod 1."""
    return affine_branches(space, [[(2, 0)]], name="single_doubling")


def torus_two_branch(space):
    """(x, y) -> {(2x, 2y), (2x, 2y + 1/2)} mod 1 on the torus."""
    if space.kind != "torus":
        raise DomainError("torus_two_branch lives on the torus")
    return affine_branches(space, [[(2, 0), (2, 0)], [(2, 0), (2, Fraction(1, 2))]],
                           name="torus_two_branch")


def identity(space):
    n = space.n
    ev = None if space.kind == "finite" else (lambda c: [c])
    return SetValuedMap(space, np.arange(n + 1), np.arange(n), name="identity",
                        evaluator=ev, spec={"kind": "identity"})


def step_map(space, threshold=Fraction(1, 2)):
    """F(x) = {0} for x < threshold and {0, 1} otherwise, on the interval.

    Upper but not lower semicontinuous at the threshold.
    """
    if space.kind != "interval":
        raise DomainError("step_map lives on the interval")
    t = as_fraction(threshold)
    G = space.grid
    pairs = []
    for i in range(space.n):
        pairs.append((i, 0))
        if Fraction(i, G) >= t:
            pairs.append((i, G))

    def evaluator(c):
        return [(Fraction(0),), (Fraction(1),)] if c[0] >= t else [(Fraction(0),)]

    return SetValuedMap.from_pairs(space, pairs, name="step_map", evaluator=evaluator,
                                   spec={"kind": "step_map", "threshold": str(t)})


def finite_relation(space, pairs, name="relation"):
    """Explicit relation from ``(i, j)`` index pairs meaning ``j in F(i)``.

    Rows left empty make the relation non-total; images of such rows raise
    :class:`TotalityError`.
    """
    pairs = [tuple(int(v) for v in p) for p in pairs]
    return SetValuedMap.from_pairs(space, pairs, name=name,
                                   spec={"kind": "relation", "pairs": [list(p) for p in pairs]})


def countable_example(J=30, c=0.3, alpha=0.05, snap=Fraction(1, 10**6)):
    """The countable positively expansive map with vanishing entropy.

    Points are the repeller R = 0, the attractor A = 1 and the orbit
    ``x_j = 1/(1 + exp(-c j))`` for ``-J <= j <= J``, snapped to multiples
    of ``snap``. F(A) = F(R) = {A, R} and F(x_j) = {A, R, x_{j+1}, x_{j-1}},
    with out-of-range neighbours clamped to A (above) or R (below).
    Returns the map; ``meta['x0']`` is the index of ``x_0``.
    """
    J = int(J)
    if J < 1:
        raise DomainError("J must be a positive integer")
    c = float(c)
    alpha = as_fraction(alpha)
    snap = as_fraction(snap)
    if c <= 0:
        raise DomainError("c must be positive")
    q = snap.denominator // snap.numerator if snap.numerator == 1 else None
    if q is None:
        raise DomainError("snap must be of the form 1/q")

    def logistic(j):
        return Fraction(_round_half_up(Fraction(1.0 / (1.0 + math.exp(-c * j))) * q), q)

    vals = [Fraction(0), Fraction(1)] + [logistic(j) for j in range(-J, J + 1)]
    labels = ["R", "A"] + [f"x{j}" for j in range(-J, J + 1)]
    if len(set(vals)) != len(vals):
        raise DomainError("orbit points collide after snapping; lower c or J")
    x0 = 2 + J
    if not 1 > 2 * alpha:
        raise DomainError("need dist(A, R) > 2*alpha")
    if vals[x0 + 1] - vals[x0] < alpha or vals[x0] - vals[x0 - 1] < alpha:
        raise DomainError(
            f"need dist(x0, f(x0)) >= alpha and dist(x0, f^-1(x0)) >= alpha; "
            f"spacing is {float(vals[x0 + 1] - vals[x0]):.4g} at c={c}")
    dist = [[abs(a - b) for b in vals] for a in vals]
    space = MetricSpace.finite(labels, dist)
    pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for k in range(-J, J + 1):
        i = x0 + k
        up = i + 1 if k < J else 1
        down = i - 1 if k > -J else 0
        pairs += [(i, 0), (i, 1), (i, up), (i, down)]
    F = SetValuedMap.from_pairs(space, pairs, name="countable_example",
                                meta={"x0": x0, "J": J, "c": c, "alpha": alpha},
                                spec={"kind": "countable_example", "J": J, "c": c,
                                      "alpha": str(alpha)})
    return F


# -- continuity --------------------------------------------------------------

CLASSES = ("hausdorff_continuous", "usc_only", "lsc_only", "neither")


@dataclass
class ContinuityReport:
    """Resolution-relative continuity summary.

    ``modulus_table`` lists ``(delta, omega(delta))``, the largest
    d_H(F(x), F(y)) over evaluated pairs with dist(x, y) <= delta.
    ``usc_defect`` / ``lsc_defect`` are the largest one-sided excesses
    e(F(y), F(x)) and e(F(x), F(y)) found next to each point.
    """

    modulus_table: list
    classification: str
    tolerance: Fraction
    lipschitz_forward: object
    lipschitz_inverse: object
    usc_defect: float
    lsc_defect: float
    pairs_evaluated: int
    exhaustive: bool
    notes: list = field(default_factory=list)


def _pair_sample(space, deltas_units_max, budget, rng):
    """Index pairs (i, j), i != j, with distance <= the largest delta."""
    n = space.n
    if n * (n - 1) // 2 <= max(budget, 1):
        i, j = np.triu_indices(n, 1)
        return i.astype(np.int64), j.astype(np.int64), True
    if space.kind in ("interval", "circle", "torus"):
        # all pairs along each grid direction up to the largest delta
        G = space.grid
        reach = max(1, deltas_units_max if not space.squared else math.isqrt(deltas_units_max))
        reach = min(reach, G // 2 if space.kind != "interval" else G)
        base = np.arange(n)
        I, Jj = [], []
        steps = [(0, s) for s in range(1, reach + 1)]
        if space.kind == "torus":
            steps = [(a, b) for a in range(-reach, reach + 1) for b in range(-reach, reach + 1)
                     if (a, b) > (0, 0)]
        est = len(steps) * n
        if est <= 4 * budget:
            for a, b in steps:
                if space.kind == "torus":
                    x, y = np.divmod(base, G)
                    other = ((x + a) % G) * G + (y + b) % G
                    I.append(base)
                    Jj.append(other)
                elif space.kind == "circle":
                    I.append(base)
                    Jj.append((base + b) % G)
                else:
                    keep = base + b <= G
                    I.append(base[keep])
                    Jj.append(base[keep] + b)
            i = np.concatenate(I)
            j = np.concatenate(Jj)
            keep = i != j
            return i[keep], j[keep], True
    i = rng.integers(0, n, size=budget)
    j = rng.integers(0, n, size=budget)
    keep = i != j
    return i[keep], j[keep], False


def _max_quotient(space, num_units, den_units):
    """Largest num/den over pairs, exact unless the space is L2."""
    if not num_units.size:
        return None
    if space.squared:
        return float(np.max(np.sqrt(num_units) / np.sqrt(den_units)))
    ratio = num_units / den_units
    top = np.flatnonzero(ratio >= ratio.max() * (1 - 1e-12))
    return max(Fraction(int(num_units[k]), int(den_units[k])) for k in top)


def _excess_exact(space, P, Q):
    return max(min(space.coord_distance(p, q) for q in Q) for p in P)


def classify_continuity(F, deltas=None, sample_budget=200_000, tolerance=Fraction(1, 10),
                        probe_levels=4, seed=0):
    """Modulus of continuity, Lipschitz estimates and a usc/lsc verdict.

    The verdict is relative to the grid: the map is reported
    hausdorff_continuous when omega(delta_min) <= tolerance. Otherwise the
    one-sided defects decide between usc_only, lsc_only and neither. Grid
    maps with an exact evaluator are probed off-grid at distances
    delta_min * 2^-m; finite relations use the pairs within delta_min.
    """
    if int(sample_budget) < 1:
        raise DomainError("sample_budget must be at least 1")
    if not F.total:
        raise TotalityError("continuity classification needs a total relation")
    space = F.space
    tau = as_fraction(tolerance)
    rng = np.random.default_rng(seed)
    if deltas is None:
        if space.kind == "finite":
            off = space._table[~np.eye(space.n, dtype=bool)]
            base = int(off.min()) if off.size else 1
            deltas = [Fraction(base * 2**k, space.denominator) for k in range(4)]
        else:
            deltas = [Fraction(2**k, space.grid) for k in range(4)]
    deltas = sorted(as_fraction(d) for d in deltas)
    if not deltas or deltas[0] <= 0:
        raise DomainError("deltas must be positive")
    dunits = [space.units_floor(d) for d in deltas]
    i, j, exhaustive = _pair_sample(space, dunits[-1], int(sample_budget), rng)
    d = space.dist_units(i, j)
    P = F.padded_rows()
    h = paired_hausdorff_units(space, P[i], P[j])
    table = []
    for dv, du in zip(deltas, dunits):
        sel = d <= du
        w = int(h[sel].max()) if sel.any() else 0
        table.append((dv, space.units_to_value(w)))
    # running max keeps the table monotone when sampled pairs are sparse
    mono = []
    cur = None
    for dv, w in table:
        cur = w if cur is None else max(cur, w)
        mono.append((dv, cur))
    lip_f = _max_quotient(space, h, d)
    inv = F.inverse()
    lip_i = None
    notes = []
    if inv.total:
        Pi = inv.padded_rows()
        hi = paired_hausdorff_units(space, Pi[i], Pi[j])
        lip_i = _max_quotient(space, hi, d)
    else:
        ok = (inv.row_sizes[i] > 0) & (inv.row_sizes[j] > 0)
        notes.append(f"F^-1 has {int(np.sum(inv.row_sizes == 0))} empty rows; "
                     "inverse Lipschitz estimate uses pairs with nonempty preimages")
        if ok.any():
            ii, jj = i[ok], j[ok]
            rows_i = pad_sets([inv.row(k) for k in ii])
            rows_j = pad_sets([inv.row(k) for k in jj])
            lip_i = _max_quotient(space, paired_hausdorff_units(space, rows_i, rows_j), d[ok])
    usc, lsc = _one_sided_defects(F, deltas[0], dunits[0], i, j, d, probe_levels,
                                  int(sample_budget), rng, notes)
    omega_min = float(mono[0][1])
    if omega_min <= tau:
        cls = "hausdorff_continuous"
    else:
        usc_ok, lsc_ok = usc <= tau, lsc <= tau
        if usc_ok and not lsc_ok:
            cls = "usc_only"
        elif lsc_ok and not usc_ok:
            cls = "lsc_only"
        else:
            cls = "neither"
            if usc_ok and lsc_ok:
                notes.append("one-sided probes are small but the grid modulus is not")
    return ContinuityReport(mono, cls, tau, lip_f, lip_i, usc, lsc, int(d.size), exhaustive, notes)


def _one_sided_defects(F, delta, du, i, j, d, levels, budget, rng, notes):
    space = F.space
    if not F.has_evaluator or space.kind == "finite":
        sel = d <= du
        if not sel.any():
            return 0.0, 0.0
        ii, jj = i[sel], j[sel]
        P = F.padded_rows()
        A, B = P[ii], P[jj]
        dist = space.dist_units(A[:, :, None], B[:, None, :])
        e_ab = dist.min(axis=2).max(axis=1)  # e(F(x), F(y))
        e_ba = dist.min(axis=1).max(axis=1)  # e(F(y), F(x))
        # each unordered pair is seen in both orientations
        usc = float(space.units_to_value(int(max(e_ab.max(), e_ba.max()))))
        return usc, usc
    pts = np.arange(space.n)
    if pts.size > budget:
        pts = np.sort(rng.choice(space.n, size=budget, replace=False))
        notes.append(f"one-sided probes sampled at {budget} points")
    dirs = [(1,), (-1,)] if space.dim == 1 else [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1),
                                                 (1, -1), (-1, 1)]
    usc = 0.0
    lsc = 0.0
    for x in pts:
        c = space.coords(int(x))
        Fx = F.evaluate(c)
        for m in range(1, levels + 1):
            h = delta / 2**m
            for dv in dirs:
                y = tuple(ci + h * s for ci, s in zip(c, dv))
                if space.kind == "interval" and not 0 <= y[0] <= 1:
                    continue
                Fy = F.evaluate(y)
                usc = max(usc, float(_excess_exact(space, Fy, Fx)))
                lsc = max(lsc, float(_excess_exact(space, Fx, Fy)))
    return usc, lsc


# -- connectedness and orbit families ----------------------------------------

def gap_components(space, idx, gap):
    """Number of components of ``idx`` under the graph dist <= gap."""
    idx = np.unique(np.asarray(idx, dtype=np.int64))
    if idx.size <= 1:
        return int(idx.size)
    t = space.units_floor(gap)
    if space.kind == "finite" or idx.size <= 2048:
        adj = space.dist_units(idx[:, None], idx[None, :]) <= t
        return int(connected_components(sp.csr_matrix(adj), directed=False)[0])
    X = space.unit_coords(idx).astype(float)
    box = None if space.kind == "interval" else space.grid
    r = math.sqrt(t) if space.squared else float(t)
    tree = cKDTree(X, boxsize=box)
    pr = tree.query_pairs(r + 0.5, p=2 if space.squared else np.inf, output_type="ndarray")
    if pr.size:
        pr = pr[space.dist_units(idx[pr[:, 0]], idx[pr[:, 1]]) <= t]
    m = sp.csr_matrix((np.ones(len(pr)), (pr[:, 0], pr[:, 1])), shape=(idx.size, idx.size))
    return int(connected_components(m, directed=False)[0])


def _arc_image_dense(F, idx, refine):
    """Grid image of the polygonal arc through ``idx``, sampled at
    spacing 1/(G*refine) along each edge and evaluated exactly."""
    space = F.space
    G = space.grid
    wrap = space.kind != "interval"
    out = [F.image_indices(idx)]
    U = space.unit_coords(idx)
    pts = []
    for a, b in zip(U[:-1], U[1:]):
        d = b - a
        if wrap:
            d = (d + G // 2) % G - G // 2
        m = int(np.abs(d).max()) * refine
        for s in range(1, m):
            c = tuple(Fraction(int(a[k]) * m + int(d[k]) * s, G * m) for k in range(space.dim))
            pts.append(tuple(v % 1 for v in c) if wrap else c)
    hits = []
    for c in pts:
        for y in F.evaluate(c):
            units = [_round_half_up(Fraction(v) * G) for v in y]
            hits.append(space.index_of_units(units))
    if hits:
        out.append(np.array(hits, dtype=np.int64))
    return np.unique(np.concatenate(out))


def image_connected(F, arc, gap, refine=8):
    """Whether F(arc) forms one component under the dist <= gap graph.

    The arc is the polygonal path through the given points. Maps with an
    exact evaluator are applied to sub-grid samples of every edge (spacing
    1/(G*refine)), so an expanding branch images the whole edge rather than
    only its grid endpoints; other maps use the grid points alone.
    """
    idx = np.array([F.space.check(p) or p.index for p in arc], dtype=np.int64)
    if not idx.size:
        raise DomainError("arc must be nonempty")
    if F.has_evaluator and F.space.kind != "finite" and int(refine) >= 1:
        img = _arc_image_dense(F, idx, int(refine))
    else:
        img = F.image_indices(idx)
    return gap_components(F.space, img, gap) == 1


@dataclass
class OrbitFamily:
    """The sets F^n(x) for the sampled x and |n| <= N."""

    sets: list
    entries: list
    closed_at_resolution: bool
    resolution: Fraction
    empty_backward: int


def orbit_closure_family(F, x_samples, N, resolution=None):
    """The family {F^n(x) : x in samples, |n| <= N} and a closedness flag.

    F^-n(x) is (F^-1)^n({x}); empty backward iterates are skipped and
    counted. The flag is a resolution-level test: the family is reported
    closed when no set reached at horizon 2N lies within ``resolution``
    (default: the smallest positive distance of the space) of the family
    without being a member of it.
    """
    N = int(N)
    if N < 0:
        raise DomainError("N must be nonnegative")
    space = F.space
    if resolution is None:
        resolution = space.units_to_value(1) if space.kind != "finite" else \
            space.units_to_value(int(space._table[~np.eye(space.n, dtype=bool)].min()
                                     if space.n > 1 else 0))

    def collect(horizon):
        seen = {}
        empty = 0
        for x in x_samples:
            space.check(x)
            for sign, step in ((1, F), (-1, F.inverse())):
                cur = np.array([x.index], dtype=np.int64)
                for n in range(0, horizon + 1):
                    if n:
                        cur = step.image_indices(cur, allow_empty=sign < 0)
                        if not cur.size:
                            empty += 1
                            break
                    key = cur.tobytes()
                    seen.setdefault(key, (cur.copy(), (x.index, sign * n)))
        return seen, empty

    fam, empty = collect(N)
    ext, _ = collect(2 * N)
    t = space.units_floor(resolution)
    closed = True
    members = [v[0] for v in fam.values()]
    for key, (K, _) in ext.items():
        if key in fam:
            continue
        if any(hausdorff_units(space, K, M) <= t for M in members):
            closed = False
            break
    sets = [point_set(space, v[0]) for v in fam.values()]
    entries = [v[1] for v in fam.values()]
    return OrbitFamily(sets, entries, closed, resolution, empty)


def csr_padded(m):
    """Rows of a boolean CSR matrix as a padded index array (rows nonempty)."""
    m = sp.csr_matrix(m)
    sizes = np.diff(m.indptr)
    if np.any(sizes == 0):
        raise TotalityError("a row became empty while iterating")
    w = int(sizes.max())
    first = m.indices[m.indptr[:-1]]
    out = np.repeat(first[:, None], w, axis=1).astype(np.int64)
    rows = np.repeat(np.arange(m.shape[0]), sizes)
    pos = np.arange(m.indices.size) - np.repeat(m.indptr[:-1], sizes)
    out[rows, pos] = m.indices
    return out


class ForwardLevels:
    """F^t(x) for every source point x and t = 0..T, built level by level.

    Level t is kept both as a boolean CSR matrix (sources x space) and as a
    padded index array for vectorized Hausdorff evaluation.
    """

    @classmethod
    def from_sets(cls, F, sets, backward=False):
        """Levels of F^t(A) for each index array ``A`` in ``sets``."""
        rows = np.repeat(np.arange(len(sets)), [len(a) for a in sets])
        cols = np.concatenate([np.asarray(a, dtype=np.int64) for a in sets]) if len(sets) \
            else np.zeros(0, dtype=np.int64)
        m = sp.csr_matrix((np.ones(cols.size, dtype=np.int32), (rows, cols)),
                          shape=(len(sets), F.space.n))
        m.sum_duplicates()
        m.data[:] = 1
        return cls(F, backward=backward, start=m)

    def __init__(self, F, sources=None, backward=False, start=None):
        self.F = F
        self.step = F.inverse() if backward else F
        n = F.space.n
        self._A = self.step.matrix().astype(np.int32)
        if start is not None:
            # arbitrary starting sets, one per row
            m = sp.csr_matrix(start, dtype=np.int32)
            m.sort_indices()
            self.sources = m.indices[m.indptr[:-1]].astype(np.int64)
        else:
            self.sources = np.arange(n) if sources is None else np.asarray(sources, dtype=np.int64)
            k = self.sources.size
            m = sp.csr_matrix((np.ones(k, dtype=np.int32), (np.arange(k), self.sources)),
                              shape=(k, n))
        self.mats = [m]
        self._padded = {}

    def extend(self, T):
        while len(self.mats) <= T:
            nxt = self.mats[-1] @ self._A
            nxt.data[:] = 1
            nxt.eliminate_zeros()
            nxt.sort_indices()
            self.mats.append(nxt)
        return self

    def padded(self, t):
        self.extend(t)
        if t not in self._padded:
            self._padded[t] = csr_padded(self.mats[t])
        return self._padded[t]

    def alive(self, t):
        """Sources whose level-t set is nonempty (backward levels can die)."""
        self.extend(t)
        return np.diff(self.mats[t].indptr) > 0

    def row(self, t, k):
        self.extend(t)
        m = self.mats[t]
        return m.indices[m.indptr[k]:m.indptr[k + 1]]

    def key(self, t, k):
        return self.row(t, k).astype(np.int64).tobytes()

    def sizes(self, t):
        self.extend(t)
        return np.diff(self.mats[t].indptr)
