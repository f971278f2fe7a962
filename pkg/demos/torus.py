"""Two-branch torus map: where the expansiveness constant 1/4 sits.

Pairs that differ only in y keep d_H <= 1/4 forever, so the strict test
fails at 1/4 and passes just below it or with >=.
"""
from fractions import Fraction
from collections import Counter

from setdyn.expansive import check_positive_expansive
from setdyn.relation import torus_two_branch
from setdyn.space import MetricSpace

T = MetricSpace.torus(32)
M = torus_two_branch(T)

for alpha, strict in [(Fraction(1, 4), True), (Fraction(1, 4), False), (Fraction(1, 5), True)]:
    v = check_positive_expansive(M, alpha, 12, strict=strict)
    op = ">" if strict else ">="
    print(f"d_H {op} {alpha}: {v.status}, {v.n_counterexamples} pairs never separate")
    if v.counterexamples:
        print("   e.g.", v.counterexamples[0])
    else:
        hist = sorted(Counter(v.witness_times.tolist()).items())
        print("   first separation times:", dict(hist))
