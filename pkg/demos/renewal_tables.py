"""Renewal functions U, V and V0 from stopped walks.

For Gaussian steps U and V grow linearly and V0(0) = 1.  The fitted
tail exponent is compared with alpha * rho.
"""

import numpy as np

from walklab.renewal import estimate_U, estimate_V, estimate_V0
from walklab.rng import RandomStream
from walklab.walk import gaussian, tail_equivalent

grid = np.arange(0.0, 20.0 + 1e-9, 0.5)
st = RandomStream(3)
for model in (gaussian(), tail_equivalent(1.5, 0.0, crossover=2.0)):
    print(model.spec())
    for which, fn in (("U", estimate_U), ("V", estimate_V), ("V0", estimate_V0)):
        t = fn(model, grid, 1 << 15, 50_000, st.child(which, model.kind))
        kappa = t.tail_fit[0]
        print(f"  {which:>2}: value(0)={t.values[0]:.4f} value(10)={t(10.0):.3f}+-{t.stderr_at(10.0):.3f} "
              f"tail exponent {kappa:.3f} (index {t.expected_exponent:.3f}) censored {t.censor_frac:.1e}")
