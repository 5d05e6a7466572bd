"""Distribution-free persistence: P(L_n >= 0) = C(2n, n) / 4^n.

Any walk with symmetric continuous steps obeys the same law, so a Gaussian
walk and a 1.5-stable walk should give the same column.
"""

from scipy import special

from walklab.functionals import StayNonneg, lhs_panel
from walklab.rng import RandomStream
from walklab.walk import exact_stable, gaussian

ns = [1, 2, 5, 10, 20, 50]
cols = {}
for name, model in (("gaussian", gaussian()), ("stable1.5", exact_stable(1.5, 0.0))):
    est = lhs_panel(model, [StayNonneg()], ns, 1 << 19, RandomStream(2).child(name))
    cols[name] = [est[(0, n)] for n in ns]

print(f"{'n':>4} {'exact':>9} {'gaussian':>18} {'stable1.5':>18}")
for i, n in enumerate(ns):
    g, s = cols["gaussian"][i], cols["stable1.5"][i]
    print(f"{n:>4} {special.comb(2 * n, n) / 4**n:9.5f} {g.value:9.5f}+-{g.stderr:.5f} {s.value:9.5f}+-{s.stderr:.5f}")
