"""Local asymptotics for exponential functionals of the running minimum.

Estimates E[e^{S_tau}; S_n <= K] for a Gaussian walk and divides by the
limit predicted from the renewal tables.  The ratio should creep toward 1.
"""

import numpy as np

from walklab.functionals import run_ratio_experiment
from walklab.renewal import estimate_U, estimate_V, estimate_V0
from walklab.rng import RandomStream
from walklab.walk import gaussian

model = gaussian()
st = RandomStream(4)
grid = np.arange(0.0, 30.0 + 1e-9, 0.25)
tables = {w: f(model, grid, 1 << 16, 100_000, st.child(w))
          for w, f in (("U", estimate_U), ("V", estimate_V), ("V0", estimate_V0))}

for K in (-1.0, 0.0, 1.0):
    rep = run_ratio_experiment("theorem4", model, {"theta": 1.0, "K": K}, [32, 64, 128, 256], 1 << 20,
                               st.child("lhs", K), tables)
    cells = "  ".join(f"n={n}: {r:.3f}+-{s:.3f}" for n, r, s in zip(rep.n_grid, rep.ratio, rep.ratio_stderr))
    print(f"K={K:+.0f}  {cells}")
