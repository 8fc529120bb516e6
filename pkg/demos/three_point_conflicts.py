"""Three points, three classes: how overlap structure sets the optimal loss.

Place one point from each of three classes at the corners of a unit
equilateral triangle. The pairwise distance is 1, so at any budget
eps >= 0.5 every pair of closed eps-balls intersects. But a common point
of all three balls needs the enclosing-ball radius 1/sqrt(3) = 0.577,
so the triple overlap only appears at larger budgets.

That difference is worth 1/6 of loss to the adversary.
"""

import numpy as np

from optloss.bounds import extract_strategy, optimal_loss
from optloss.data import from_arrays

pts = np.array([(0.0, 0.0), (1.0, 0.0), (0.5, np.sqrt(3) / 2)])
ds = from_arrays(pts, [0, 1, 2])

print("equilateral triangle, side 1, one class per corner, uniform masses\n")

for eps in (0.40, 0.55, 0.60):
    loss, sol, graph = optimal_loss(ds, eps, m=3)
    counts = graph.edge_counts()
    print(f"eps = {eps:.2f}: edges by degree {counts or '{}'}")
    print(f"  optimal loss          = {loss:.6f}")
    print(f"  per-vertex packing q  = {np.round(sol.q, 6)}")
    strategy = extract_strategy(sol, graph)
    print(f"  adversary cover cost  = {strategy.cover_cost:.6f}")
    for vs in strategy.per_vertex[:1]:
        plays = ", ".join(
            f"{'self' if e is None else e} w.p. {p:.3f}"
            for e, p in zip(vs.edges, vs.probabilities)
        )
        print(f"  vertex 0 plays: {plays}")
    print()

print("with only pairwise overlaps the classifier can answer (1/2, 1/2, 0)")
print("on each contested region and keep half the mass; once the triple")
print("overlap exists, one shared point caps the three packing values at a")
print("total of 1, and the loss jumps from 1/2 to 2/3.\n")

print("unbalanced masses: a heavy class changes the answer")
heavy = from_arrays(pts, [0, 1, 2], masses=[0.6, 0.2, 0.2])
for eps in (0.55, 0.60):
    loss, sol, graph = optimal_loss(heavy, eps, m=3)
    print(f"eps = {eps:.2f}: loss = {loss:.6f} "
          f"(correct probability {1 - loss:.3f} = heavy mass), q = {np.round(sol.q, 3)}")
