"""The countable counterexample: orbit sizes, expansiveness and entropy.

Run with ``python3 demos/countable_example.py``. Takes about half a minute.
"""
from fractions import Fraction

from setdyn.entropy import entropy_estimate
from setdyn.expansive import check_positive_expansive
from setdyn.relation import countable_example, iterate

E = countable_example(J=30)
x0 = E.space.point_at(E.meta["x0"])
print(f"{E.space.n} points, alpha = {E.meta['alpha']}")
print("|F^n(x0)|, n = 1..15:", [len(iterate(E, n, x0)) for n in range(1, 16)])

for N in (10, 60):
    v = check_positive_expansive(E, E.meta["alpha"], N)
    print(f"horizon {N:2d}: {v.status}, max witness time {v.max_witness_time}")

# A and R map onto {A, R}, so every 0/1 word is a segment: counts grow like 2^n
est = entropy_estimate(E, [Fraction(1, 4)], range(1, 13))
for row in est.table.rows:
    print(f"n={row.n:2d}  s={row.s_lower:8d}  r={row.r_upper:8d}  exhaustive={row.exhaustive}")
print(f"slope {est.h_top:.4f}")
