"""``svd``: run one analysis from a JSON experiment config.

Exit status is 0 on success (a refutation is a successful analysis), 2 when
the verdict is inconclusive and 1 on errors. Every artifact embeds the tool
version, the config hash and the seed; the thread count is deliberately
left out so that outputs are byte-identical across parallelism levels.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import difflib
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InconclusiveError, SetDynError
from .space import MetricSpace, Point, PointSet, as_fraction

ANALYSES = ("iterate", "hausdorff", "paths", "expansive", "entropy", "lyapunov", "measure",
            "witness")
BUILTINS = ("doubling", "circle_squaring", "single_doubling", "torus_two_branch", "identity",
            "step_map", "relation", "affine_branches", "countable_example")


# -- schema ------------------------------------------------------------------

def _ratio(v):
    if isinstance(v, bool):
        raise ValueError
    return as_fraction(v)


def _check_ratio(lo=None, strict=True):
    def check(v):
        try:
            r = _ratio(v)
        except (ValueError, TypeError, ZeroDivisionError):
            return f"expected a number or 'p/q' string, got {v!r}"
        if lo is not None and (r <= lo if strict else r < lo):
            return f"must be {'>' if strict else '>='} {lo} (got {v})"
        return None
    return check


def _check_int(lo=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            return f"expected an integer, got {v!r}"
        if lo is not None and v < lo:
            return f"must be >= {lo} (got {v})"
        return None
    return check


def _check_enum(*choices):
    def check(v):
        if v not in choices:
            hint = difflib.get_close_matches(str(v), choices, n=1)
            extra = f"; did you mean {hint[0]!r}?" if hint else ""
            return f"must be one of {list(choices)} (got {v!r}){extra}"
        return None
    return check


def _check_bool(v):
    return None if isinstance(v, bool) else f"expected true or false, got {v!r}"


def _check_str(v):
    return None if isinstance(v, str) else f"expected a string, got {v!r}"


def _check_list(item=None, nonempty=True):
    def check(v):
        if not isinstance(v, list):
            return f"expected a list, got {type(v).__name__}"
        if nonempty and not v:
            return "must not be empty"
        if item is not None:
            for k, x in enumerate(v):
                e = item(x)
                if e:
                    return f"item {k}: {e}"
        return None
    return check


def _check_point(v):
    if isinstance(v, bool):
        return f"not a point: {v!r}"
    if isinstance(v, (int, float, str)):
        return None
    if isinstance(v, list) and v and all(_check_ratio()(c) is None for c in v):
        return None
    return f"not a point (coordinate, [x, y] or label): {v!r}"


def _check_pairs_mode(v):
    if v == "exhaustive":
        return None
    if isinstance(v, dict) and set(v) == {"sampled"}:
        return _check_int(1)(v["sampled"])
    return "must be \"exhaustive\" or {\"sampled\": count}"


def _check_subsets(v):
    if v == "exhaustive":
        return None
    if isinstance(v, dict) and set(v) == {"random"}:
        return _check_int(1)(v["random"])
    return "must be \"exhaustive\" or {\"random\": count}"


def _check_nk(v):
    if isinstance(v, list) and len(v) == 2 and all(_check_int(1)(x) is None for x in v):
        return None
    return f"expected [n, k] with positive integers, got {v!r}"


POS = _check_ratio(0)
NONNEG_INT = _check_int(0)
POS_INT = _check_int(1)

SCHEMA = {
    "space": {
        "kind": _check_enum("interval", "circle", "torus", "finite"),
        "grid": POS_INT,
        "metric": _check_enum("max", "l2"),
        "labels": _check_list(_check_str),
        "distances": _check_list(_check_list(_check_ratio(0, strict=False))),
    },
    "map": {
        "kind": _check_enum(*BUILTINS),
        "pairs": _check_list(_check_list(_check_point), nonempty=False),
        "threshold": _check_ratio(0, strict=False),
        "branches": _check_list(_check_list(_check_list(_check_ratio()))),
        "J": POS_INT,
        "c": POS,
        "alpha": POS,
        "snap": POS,
    },
    "iterate": {"point": _check_point, "set": _check_list(_check_point), "n": _check_int()},
    "hausdorff": {"A": _check_list(_check_point), "B": _check_list(_check_point),
                  "iterates": NONNEG_INT},
    "paths": {"start": _check_list(_check_point), "n": POS_INT, "cap": POS_INT,
              "backward": _check_bool},
    "expansive": {"alpha": POS, "horizon": NONNEG_INT, "pairs": _check_pairs_mode,
                  "strict": _check_bool, "rw_delta": POS, "rw_horizon": POS_INT,
                  "uniform_delta": POS},
    "entropy": {"epsilons": _check_list(POS), "ns": _check_list(POS_INT), "budget": POS_INT,
                "shift": _check_bool, "tail": NONNEG_INT},
    "lyapunov": {"point": _check_point, "deltas": _check_list(POS), "horizon": NONNEG_INT,
                 "backward_horizon": NONNEG_INT,
                 "family": _check_enum("singletons_on_grid", "perturbed_copies", "mixed"),
                 "count": NONNEG_INT, "subadditivity": _check_list(_check_nk)},
    "measure": {"scheme": _check_enum("uniform", "weighted"), "weights": _check_list(_check_ratio(0, False)),
                "subsets": _check_subsets, "tol": POS, "max_iters": POS_INT,
                "damping": _check_ratio(0)},
    "witness": {"from": _check_point, "to": _check_point, "depth": POS_INT, "k": NONNEG_INT,
                "mode": _check_enum("expansiveness", "exponent"), "alpha": POS,
                "N": POS_INT, "s": POS, "delta0": POS},
}
TOP = {"seed": NONNEG_INT, "output": _check_str}


def _unknown(key, allowed, where):
    hint = difflib.get_close_matches(key, list(allowed), n=1)
    extra = f"; did you mean {hint[0]!r}?" if hint else ""
    return f"{where}: unknown key {key!r}{extra}"


def parse_config(text):
    """Validated config dict, or ConfigError listing every schema problem."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"invalid JSON: {e}"]) from None
    if not isinstance(cfg, dict):
        raise ConfigError(["config must be a JSON object"])
    errors = []
    allowed = set(SCHEMA) | set(TOP)
    for key, val in cfg.items():
        if key not in allowed:
            errors.append(_unknown(key, allowed, "config"))
        elif key in TOP:
            e = TOP[key](val)
            if e:
                errors.append(f"{key}: {e}")
        elif not isinstance(val, dict):
            errors.append(f"{key}: expected an object")
        else:
            fields = SCHEMA[key]
            for k, v in val.items():
                if k not in fields:
                    errors.append(_unknown(k, fields, key))
                else:
                    e = fields[k](v)
                    if e:
                        errors.append(f"{key}.{k}: {e}")
    m = cfg.get("map", {})
    if not isinstance(m, dict) or "kind" not in m:
        errors.append("map.kind: required")
    elif m.get("kind") != "countable_example":
        s = cfg.get("space")
        if not isinstance(s, dict) or "kind" not in s:
            errors.append("space.kind: required")
        elif s["kind"] == "finite":
            for k in ("labels", "distances"):
                if k not in s:
                    errors.append(f"space.{k}: required for finite spaces")
        elif "grid" not in s:
            errors.append("space.grid: required for grid spaces")
    if errors:
        raise ConfigError(errors)
    return cfg


def config_hash(cfg):
    body = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- building objects ----------------------------------------------------------

def build_space(cfg):
    s = cfg["space"]
    kind = s["kind"]
    if kind == "finite":
        return MetricSpace.finite(s["labels"], s["distances"])
    if kind == "torus":
        return MetricSpace.torus(s["grid"], metric=s.get("metric", "max"))
    return getattr(MetricSpace, kind)(s["grid"])


def build_map(cfg):
    from . import relation as rel
    m = cfg["map"]
    b = m["kind"]
    if b == "countable_example":
        kw = {k: m[k] for k in ("J", "c", "alpha", "snap") if k in m}
        return rel.countable_example(**kw)
    space = build_space(cfg)
    if b == "relation":
        pairs = [(parse_point(space, a).index, parse_point(space, c).index)
                 for a, c in m.get("pairs", [])]
        return rel.finite_relation(space, pairs)
    if b == "affine_branches":
        return rel.affine_branches(space, [[tuple(p) for p in br] for br in m["branches"]])
    if b == "step_map":
        return rel.step_map(space, m.get("threshold", Fraction(1, 2)))
    return getattr(rel, b)(space)


def parse_point(space, v):
    if space.kind == "finite":
        return space.point(v if isinstance(v, str) else int(v))
    if isinstance(v, list):
        return space.point(*[_ratio(c) for c in v])
    return space.point(_ratio(v))


def _default_point(F):
    if "x0" in F.meta:
        return F.space.point_at(F.meta["x0"])
    return F.space.point_at(0)


# -- serialization -------------------------------------------------------------

def _num(x):
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return float(f"{x:.12g}")
    return x


def jsonable(obj):
    """Plain JSON data: fractions as "p/q" strings, floats at 12 digits."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, Point):
        return _coord(obj)
    if isinstance(obj, PointSet):
        return [_coord(p) for p in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(jsonable(k)) if not isinstance(k, str) else k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj):
        out = {}
        for f in dataclasses.fields(obj):
            if f.name in ("F", "index", "levels"):
                continue
            v = getattr(obj, f.name)
            if hasattr(v, "indptr") and hasattr(v, "targets"):
                continue
            out[f.name] = jsonable(v)
        return out
    return str(obj)


def _coord(p):
    c = p.space.coords(p.index)
    if isinstance(c, str):
        return c
    return str(c[0]) if len(c) == 1 else [str(v) for v in c]


class Artifacts:
    """Collects the JSON document and CSV tables of one run."""

    def __init__(self, analysis, cfg, seed):
        self.analysis = analysis
        self.header = {"tool": "svd", "version": __version__, "analysis": analysis,
                       "config_hash": config_hash(cfg), "seed": seed}
        self.result = {}
        self.tables = {}

    def table(self, name, header, rows):
        self.tables[name] = (list(header), [[_cell(v) for v in r] for r in rows])

    def write(self, out, fmt):
        out = Path(out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise SetDynError(f"cannot create output directory {out}: {e}") from None
        written = []
        if fmt in (None, "json"):
            doc = dict(self.header)
            doc["result"] = jsonable(self.result)
            if fmt == "json":
                doc["tables"] = {k: {"columns": h, "rows": r} for k, (h, r) in self.tables.items()}
            written.append(self._put(out / f"{self.analysis}.json",
                                     json.dumps(doc, indent=2, sort_keys=True) + "\n"))
        if fmt in (None, "csv"):
            for name, (h, rows) in self.tables.items():
                buf = io.StringIO()
                hd = self.header
                buf.write(f"# svd {hd['version']} analysis={hd['analysis']} "
                          f"config_hash={hd['config_hash']} seed={hd['seed']}\n")
                w = csv.writer(buf, lineterminator="\n")
                w.writerow(h)
                w.writerows(rows)
                written.append(self._put(out / f"{name}.csv", buf.getvalue()))
        return written

    @staticmethod
    def _put(path, text):
        try:
            path.write_text(text)
        except OSError as e:
            raise SetDynError(f"cannot write {path}: {e}") from None
        return path


def _point_cell(p):
    c = _coord(p)
    return c if isinstance(c, str) else "(" + ",".join(c) + ")"


def _cell(v):
    v = jsonable(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return v


# -- analyses ------------------------------------------------------------------

def run_iterate(F, p, art, seed, threads):
    from .relation import iterate_indices
    space = F.space
    if "set" in p:
        start = space.compact_set([parse_point(space, v) for v in p["set"]]).indices
    else:
        start = np.array([(parse_point(space, p["point"]) if "point" in p else
                           _default_point(F)).index])
    n = p.get("n", 5)
    rows = []
    cur = start
    for t in range(abs(n) + 1):
        if t:
            cur = iterate_indices(F, 1 if n > 0 else -1, cur)
        pts = [space.point_at(i) for i in cur]
        rows.append((t if n >= 0 else -t, len(pts), [_coord(q) for q in pts]))
        if not cur.size:
            break
    art.result = {"map": F.name, "n": n, "sizes": [r[1] for r in rows]}
    art.table("iterate", ["t", "size", "points"], rows)
    return 0


def run_hausdorff(F, p, art, seed, threads):
    from .hausdorff import hausdorff_brute, hausdorff_distance, directed_distance
    from .relation import iterate_indices
    space = F.space
    A = space.compact_set([parse_point(space, v) for v in p.get("A", [0])])
    B = space.compact_set([parse_point(space, v) for v in p.get("B", [0])])
    d = hausdorff_distance(space, A, B)
    art.result = {"d_H": d, "brute_force": hausdorff_brute(space, A, B),
                  "excess_AB": directed_distance(space, A, B),
                  "excess_BA": directed_distance(space, B, A)}
    rows = []
    a, b = A.indices, B.indices
    for t in range(p.get("iterates", 0) + 1):
        if t:
            a, b = F.image_indices(a), F.image_indices(b)
        rows.append((t, len(a), len(b), hausdorff_distance(space, a, b)))
    art.table("hausdorff", ["t", "size_A", "size_B", "d_H"], rows)
    return 0


def run_paths(F, p, art, seed, threads):
    from .paths import count_segments, enumerate_segments
    space = F.space
    A = space.compact_set([parse_point(space, v) for v in p["start"]]) if "start" in p \
        else space.whole()
    n = p.get("n", 4)
    ens = enumerate_segments(F, A, n, cap=p.get("cap", 10_000), backward=p.get("backward", False))
    art.result = {"n": n, "enumerated": len(ens), "exhaustive": ens.exhaustive,
                  "cap_hit": ens.cap_hit,
                  "count": count_segments(F, A, n) if not p.get("backward") else None}
    art.table("paths", ["k"] + [f"t{j}" for j in range(n)],
              [[k] + [_coord(space.point_at(i)) for i in row] for k, row in enumerate(ens.paths)])
    return 0


def run_expansive(F, p, art, seed, threads):
    from .expansive import (INCONCLUSIVE, check_positive_expansive, check_rw_expansive,
                            uniform_bounds)
    alpha = _ratio(p.get("alpha", "1/4"))
    N = p.get("horizon", 20)
    mode = p.get("pairs", "exhaustive")
    pairs = mode if mode == "exhaustive" else ("sampled", mode["sampled"], seed)
    v = check_positive_expansive(F, alpha, N, pairs=pairs, strict=p.get("strict", True),
                                 threads=threads)
    res = {"positive": {k: getattr(v, k) for k in
                        ("alpha", "horizon", "status", "pairs_checked", "exhaustive", "strict",
                         "n_counterexamples", "n_periodic", "max_witness_time", "notes")}}
    res["positive"]["counterexamples"] = jsonable(v.counterexamples[:20])
    code = 2 if v.status == INCONCLUSIVE else 0
    if "rw_delta" in p:
        rw = check_rw_expansive(F, _ratio(p["rw_delta"]), p.get("rw_horizon", 8))
        res["rw"] = {k: getattr(rw, k) for k in ("delta", "horizon", "status",
                                                  "necessary_condition", "states", "notes")}
        code = max(code, 2 if rw.status == INCONCLUSIVE else 0)
    if "uniform_delta" in p:
        try:
            ub = uniform_bounds(F, alpha, _ratio(p["uniform_delta"]), N, pairs=pairs,
                                threads=threads)
            res["uniform"] = ub
        except InconclusiveError as e:
            res["uniform"] = {"status": INCONCLUSIVE, "message": str(e)}
            code = 2
    times = v.witness_times
    rows = []
    if times is not None and len(times):
        hist = np.bincount(times[times >= 0]) if np.any(times >= 0) else np.zeros(0, int)
        res["positive"]["time_histogram"] = {str(t): int(c) for t, c in enumerate(hist) if c}
        res["positive"]["time_histogram"]["never"] = int(np.sum(times < 0))
        # one label per point, then one row per pair (-1: no separation within N)
        names = [_point_cell(F.space.point_at(i)) for i in range(F.space.n)]
        rows = [(names[a], names[b], int(t))
                for (a, b), t in zip(v.witness_pairs.tolist(), times.tolist())]
    art.result = res
    art.table("expansive", ["x", "y", "first_separation_time"], rows)
    return code


def run_entropy(F, p, art, seed, threads):
    from .entropy import entropy_estimate, shift_entropy_estimate
    eps = [_ratio(e) for e in p.get("epsilons", ["1/16", "1/32"])]
    ns = p.get("ns", list(range(1, 9)))
    budget = p.get("budget", 2_000_000)
    est = entropy_estimate(F, eps, ns, budget=budget)
    res = {"h_top": est.h_top, "mode": est.mode, "fits": est.fits, "partial": est.partial,
           "lower_bound": est.lower_bound, "monotone_in_eps": est.monotone_in_eps,
           "sandwich_violations": len(est.table.sandwich_violations()), "notes": est.notes}
    rows = [(r.n, r.epsilon, r.s_lower, r.r_upper, r.exhaustive, r.exact, r.source_size)
            for r in est.table.rows]
    art.table("entropy_counts", ["n", "epsilon", "s_lower", "r_upper", "exhaustive", "exact",
                                 "source_size"], rows)
    if p.get("shift", False):
        sh = shift_entropy_estimate(F, eps, ns, budget=budget, tail=p.get("tail", 2))
        res["shift"] = {"h_top": sh.h_top, "fits": sh.fits, "partial": sh.partial,
                        "tail_bound": sh.tail_bound, "notes": sh.notes}
        art.table("shift_counts", ["n", "epsilon", "s_lower", "r_upper", "exhaustive", "exact",
                                   "source_size"],
                  [(r.n, r.epsilon, r.s_lower, r.r_upper, r.exhaustive, r.exact, r.source_size)
                   for r in sh.table.rows])
    art.result = res
    return 0


def run_lyapunov(F, p, art, seed, threads):
    from .lyapunov import NbhdSpec, exponent_estimate, growth_extremes, subadditivity_check
    space = F.space
    x = parse_point(space, p["point"]) if "point" in p else _default_point(F)
    deltas = [_ratio(d) for d in p.get("deltas", ["1/8", "1/16", "1/32"])]
    horizon = p.get("horizon", 8)
    tmpl = NbhdSpec(deltas[0], horizon, family=p.get("family", "singletons_on_grid"),
                    count=p.get("count", 64), seed=seed)
    est = exponent_estimate(F, x, deltas, horizon, spec_template=tmpl,
                            backward_horizon=p.get("backward_horizon"))
    res = {"chi_plus": est.chi_plus, "chi_plus_drift": est.chi_plus_drift,
           "chi_minus": est.chi_minus, "chi_minus_drift": est.chi_minus_drift,
           "method": est.method, "Lambda_plus": est.plus, "lambda_minus": est.minus,
           "monotone_plus": est.monotone_plus, "monotone_minus": est.monotone_minus,
           "lipschitz": est.lipschitz, "lipschitz_ok": est.lipschitz_ok,
           "partial": est.partial, "notes": est.notes}
    rows = []
    for d in deltas:
        st = growth_extremes(F, x, dataclasses.replace(tmpl, delta=d))
        for n, r in enumerate(st.records):
            if r is None:
                rows.append((d, n, "", "", 0, 0))
            else:
                rows.append((d, n, r.H, r.h, r.sample_count, r.zero_convention_hits))
    art.table("growth", ["delta", "n", "H", "h", "samples", "zeros"], rows)
    if "subadditivity" in p:
        rep = subadditivity_check(F, x, deltas[0], [tuple(v) for v in p["subadditivity"]],
                                  sample_budget=p.get("count", 64), seed=seed)
        res["subadditivity"] = {"holds": rep.holds, "max_eps_stat": rep.max_eps_stat,
                                "rows": rep.rows}
    art.result = res
    return 0


def run_measure(F, p, art, seed, threads):
    from .measure import selection_kernel, stationary_distribution, verify_invariance
    k = selection_kernel(F, p.get("scheme", "uniform"), weights=p.get("weights"))
    mu = stationary_distribution(k, tol=float(_ratio(p.get("tol", "1/1000000000000"))),
                                 max_iters=p.get("max_iters", 100_000),
                                 damping=_ratio(p.get("damping", "1/2")))
    sub = p.get("subsets", "exhaustive" if F.space.n <= 12 else {"random": 1000})
    mode = sub if sub == "exhaustive" else ("random", sub["random"], seed)
    rep = verify_invariance(F, mu, mode)
    labels = [_coord(q) for q in F.space.points()]
    art.result = {"measure": {"weights": dict(zip(map(str, labels), mu.weights)),
                              "exact": dict(zip(map(str, labels), mu.exact)) if mu.exact else None,
                              "residual": mu.residual, "converged": mu.converged,
                              "iterations": mu.iterations, "notes": mu.notes},
                  "invariance": {"passed": rep.passed, "tested": rep.tested,
                                 "exhaustive": rep.exhaustive, "exact": rep.exact,
                                 "worst_subset": rep.worst_mask, "worst_margin": rep.worst_margin,
                                 "violations": len(rep.violations)}}
    art.table("invariance", ["subset", "mu_B", "mu_preimage_B", "margin"],
              rep.sample_rows + [r for r in rep.violations if r not in rep.sample_rows])
    return 0


def run_witness(F, p, art, seed, threads):
    from .entropy import witness_tree
    from .space import geodesic_arc
    space = F.space
    a = parse_point(space, p.get("from", 0))
    b = parse_point(space, p.get("to", "1/4"))
    arc = geodesic_arc(space, a, b, p.get("depth", 10))
    mode = p.get("mode", "expansiveness")
    kw = {"alpha": _ratio(p.get("alpha", "1/5")), "N": p.get("N", 20)} if mode == "expansiveness" \
        else {"s": float(_ratio(p.get("s", math.log(2)))),
              "delta0": _ratio(p["delta0"]) if "delta0" in p else None,
              "N": p.get("N")}
    tree = witness_tree(F, arc, p.get("k", 3), mode=mode, **kw)
    ok, bad = tree.validate()
    art.result = {"mode": mode, "requested_depth": tree.requested_depth, "depth": tree.depth,
                  "complete": tree.complete, "validated": ok, "failures": len(bad),
                  "threshold": tree.threshold, "params": tree.params,
                  "split_times": tree.split_times, "horizon": tree.horizon,
                  "entropy_lower_bound": tree.entropy_lower_bound(),
                  "diagnostics": tree.diagnostics}
    art.table("witness_points", ["label", "point"],
              [(l, _coord(q)) for l, q in zip(tree.labels, tree.points)])
    art.table("witness_certificates", ["i", "j", "time", "d_H"],
              [(c.i, c.j, c.time, c.value) for c in tree.certificates])
    return 0 if tree.complete and ok else 2


RUNNERS = {name: globals()[f"run_{name}"] for name in ANALYSES}


# -- entry point ---------------------------------------------------------------

def run(analysis, cfg, out=None, seed=None, threads=None, fmt=None):
    """Run ``analysis`` on a parsed config; returns (exit code, written paths)."""
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    seed = int(cfg.get("seed", 0))
    F = build_map(cfg)
    art = Artifacts(analysis, cfg, seed)
    code = RUNNERS[analysis](F, cfg.get(analysis, {}), art, seed, threads)
    out = out or cfg.get("output", ".")
    return code, art.write(out, fmt)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="svd", description="Set-valued dynamics toolkit")
    parser.add_argument("analysis", choices=ANALYSES)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--out", help="output directory (default: config 'output' or .)")
    parser.add_argument("--threads", type=int, help="worker threads (fallback: SVD_THREADS)")
    parser.add_argument("--format", choices=("csv", "json"), dest="fmt",
                        help="write only this artifact kind (default: both)")
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("SVD_THREADS"):
        try:
            threads = int(os.environ["SVD_THREADS"])
        except ValueError:
            print("svd: SVD_THREADS must be an integer", file=sys.stderr)
            return 1
    try:
        text = Path(args.config).read_text()
    except OSError as e:
        print(f"svd: cannot read config {args.config}: {e.strerror}", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(text)
        code, paths = run(args.analysis, cfg, out=args.out, seed=args.seed, threads=threads,
                          fmt=args.fmt)
    except ConfigError as e:
        for msg in e.errors:
            print(f"svd: config error: {msg}", file=sys.stderr)
        return 1
    except (SetDynError, ValueError) as e:
        print(f"svd: error: {e}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    if code == 2:
        print("svd: verdict inconclusive", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
