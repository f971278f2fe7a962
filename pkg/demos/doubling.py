"""Doubling relation x -> {2x, 2x + 1/2} on the circle: expansiveness,
entropy of F and of the shift, and the Lyapunov exponents.
"""
import math
from fractions import Fraction

from setdyn.entropy import entropy_estimate, shift_entropy_estimate
from setdyn.expansive import check_positive_expansive
from setdyn.lyapunov import exponent_estimate
from setdyn.relation import classify_continuity, doubling
from setdyn.space import MetricSpace

S = MetricSpace.circle(256)
D = doubling(S)

cont = classify_continuity(D)
print(f"{cont.classification}, Lipschitz estimate {cont.lipschitz_forward}")

v = check_positive_expansive(D, Fraction(1, 5), 20)
print(f"expansive at 1/5: {v.status}, slowest pair needs {v.max_witness_time} steps")

eps, ns = [Fraction(1, 16), Fraction(1, 32)], range(1, 9)
h = entropy_estimate(D, eps, ns)
hs = shift_entropy_estimate(D, eps, ns)
print(f"h(F) = {h.h_top:.4f}, h(shift) = {hs.h_top:.4f}, log 2 = {math.log(2):.4f}")

ex = exponent_estimate(D, S.point(0), [Fraction(1, 8), Fraction(1, 16), Fraction(1, 32)], 6)
print(f"chi+ = {ex.chi_plus:.4f} (drift {ex.chi_plus_drift:.2g})")
print(f"chi- = {ex.chi_minus:.4f} (drift {ex.chi_minus_drift:.2g})")
