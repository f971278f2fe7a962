"""Invariant measure of a small relation from its uniform Markov selection."""
import numpy as np

from setdyn.measure import selection_kernel, stationary_distribution, verify_invariance
from setdyn.relation import finite_relation
from setdyn.space import MetricSpace

pos = [0, 3, 4, 9, 12, 20]
S = MetricSpace.finite([f"p{i}" for i in range(len(pos))],
                       np.abs(np.subtract.outer(pos, pos)).tolist())
R = finite_relation(S, [(0, 1), (0, 2), (1, 3), (2, 0), (3, 3), (3, 4), (4, 5), (5, 3), (5, 0)])

mu = stationary_distribution(selection_kernel(R))
print("mu =", [str(w) for w in mu.exact])
rep = verify_invariance(R, mu)
print(f"{rep.tested} subsets, passed={rep.passed}, tightest margin {rep.worst_margin} "
      f"at mask {rep.worst_mask:0{S.n}b}")
