"""How the one-way rates of a Werner state fall off with its fidelity.

For each fidelity F the state is F Phi+ plus (1-F)/3 of each other Bell state.
The hashing rate 1 - H(p) is achievable by the plain protocol; the optimized
single-copy instrument value d1 can only be larger.
"""

from qdistill.info import BellMixture, hashing_rate, rates_summary
from qdistill.optimizers import d1

print(f"{'F':>5} {'hashing':>9} {'d1':>9} {'comm cost':>10}")
for f in (1.0, 0.95, 0.9, 0.85, 0.8, 0.75):
    m = BellMixture([f] + [(1 - f) / 3] * 3)
    r = d1(m.density(), restarts=2, seed=0)
    print(f"{f:5.2f} {hashing_rate(m):9.4f} {r.value:9.4f} {rates_summary(m)['comm_cost_ent']:10.4f}")

# Below F ~ 0.81 the hashing rate turns negative while d1 stays at or above 0:
# discarding everything is always an admissible one-way strategy.
