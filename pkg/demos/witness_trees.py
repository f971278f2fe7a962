"""2^k mutually separated points grown along an arc by binary splitting."""
import math
from fractions import Fraction

from setdyn.entropy import witness_tree
from setdyn.relation import doubling
from setdyn.space import MetricSpace, geodesic_arc

S = MetricSpace.circle(2 ** 20)
D = doubling(S)
arc = geodesic_arc(S, S.point(0), S.point(Fraction(1, 4)), 18)

for kw in ({"mode": "expansiveness", "alpha": Fraction(1, 5), "N": 20},
           {"mode": "exponent", "s": math.log(2)}):
    tree = witness_tree(D, arc, 5, **kw)
    ok, _ = tree.validate()
    print(f"{kw['mode']}: depth {tree.depth}, {len(tree.points)} points, certificates valid: {ok}")
    print("   first points:", [str(p.coords[0]) for p in tree.points[:4]])
