"""Survival of a critical branching process in a random environment.

Offspring laws are geometric with mean e^X, X standard normal.  Survival
decays like n^{-1/2}; survival jointly with a low final walk value decays
like n^{-3/2}, and the quenched formula 1 / sum e^{-S_k} gives the same
numbers with much less noise.
"""

from walklab import bpre
from walklab.rng import RandomStream
from walklab.walk import gaussian

env = bpre.EnvironmentModel("geometric", gaussian())
st = RandomStream(5)

free = bpre.survival_unconstrained(env, [32, 64, 128, 256], 1 << 18, st.child("free"))
for n, e in zip(free.n_grid, free.survival):
    print(f"P(Z_{n} > 0) = {e.value:.5f} +- {e.stderr:.5f}")
print(f"log-log slope {free.slope():.3f}\n")

rep = bpre.survival_constrained(env, [64, 128, 256], 0.0, 1 << 19, 16, st.child("low"))
for i, n in enumerate(rep.n_grid):
    q = rep.quenched[i]
    print(f"n={n}: P(Z_n>0, S_n<=0) = {rep.raw[i].value:.2e} (quenched {q.value:.2e})  "
          f"normalized {rep.normalized[i]:.3f}  min-time buckets "
          f"{rep.bucket_left[i] / rep.raw[i].value:.2f}/{rep.mid_fraction(i):.2f}/"
          f"{rep.bucket_right[i] / rep.raw[i].value:.2f}")
