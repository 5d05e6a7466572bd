"""Walks conditioned to stay nonnegative or negative.

Reweighting by U(S_n) on {L_n >= 0} defines a probability measure: the
mean of g = 1 stays 1 at every n.  Under it a BPRE started from q
particles survives with a probability that grows with q, and the
martingale W_j has constant mean.
"""

import numpy as np

from walklab import bpre
from walklab.renewal import estimate_U, estimate_V
from walklab.rng import RandomStream
from walklab.walk import gaussian

model = gaussian()
st = RandomStream(6)
grid = np.arange(0.0, 30.0 + 1e-9, 0.25)
U = estimate_U(model, grid, 1 << 16, 100_000, st.child("U"))
V = estimate_V(model, grid, 1 << 16, 100_000, st.child("V"))

for n in (1, 16, 64):
    p = bpre.plus_measure_expectation(model, bpre.ConstantOne(), 1.0, n, 1 << 17, U, st.child("p", n))
    m = bpre.minus_measure_expectation(model, bpre.ConstantOne(), -1.0, n, 1 << 17, V, st.child("m", n))
    print(f"n={n:>2}: E+[1] = {p.value:.4f}+-{p.stderr:.4f}   E-[1] = {m.value:.4f}+-{m.stderr:.4f}")

for q in (1, 2, 4):
    e = bpre.plus_measure_expectation(model, bpre.EmbeddedSurvival("geometric", q), 0.0, 64, 1 << 15, U,
                                      st.child("q", q))
    print(f"q={q}: P+(Z_64 > 0) = {e.value:.3f}+-{e.stderr:.3f}")

track = bpre.martingale_W_track(bpre.EnvironmentModel("geometric", model), 0.0, [2, 16, 64, 128], 1 << 17, U,
                                st.child("W"))
print("E+[W_j]:", "  ".join(f"j={j}: {e.value:.3f}+-{e.stderr:.3f}" for j, e in zip(track.checkpoints, track)))
print(f"P+(W > {track.threshold:g}) = {track.positive_frac.value:.3f}")
