"""Local Kendall's tau on corners and shrinking rectangles.

Run with ``python3 demos/local_kendall_tau.py``.
"""
# %%
import numpy as np

from reldep import copulas as cop
from reldep import kendall as kd
from reldep import local_dep as ld

# %% lower-left tau for Clayton is the same for every corner square
clayton = cop.make_copula("clayton", theta=5.0)
for p in (0.5, 0.2, 0.05):
    print(f"Clayton theta=5, tau_LL({p}, {p}) = {kd.tau_LL(clayton, p, p):.6f}   (5/7 = {5/7:.6f})")

# %% FGM loses its corner concordance as the square shrinks
est = kd.lambda_LL_kendall(cop.make_copula("fgm", theta=1.0))
print("FGM theta=1 tau_LL(p, p):", dict(zip(est.parameters.tolist(), np.round(est.values, 6).tolist())))

# %% the quadrature value checked against the four-fold sign integral
frank = cop.make_copula("frank", theta=3.0)
print(f"Frank tau_LL(0.7, 0.7): 2D {kd.tau_LL(frank, 0.7, 0.7):.6f},"
      f" brute force {kd.tau_LL_bruteforce(frank, 0.7, 0.7, order=12):.6f}")

# %% naive rectangle tau vanishes like eps^2; dividing by mass^3 keeps it finite
sides = [0.16, 0.08, 0.04, 0.02]
naive = kd.shrinking_squares(frank, (0.4, 0.6), sides, modified=False)
modified = kd.shrinking_squares(frank, (0.4, 0.6), sides, modified=True)
for e, a, b in zip(sides, naive, modified):
    print(f"  side {e:.2f}: naive {a:.3e}   modified {b:.5f}")
lim = kd.modified_limit(frank, (0.4, 0.6)).value
print(f"Richardson limit {lim:.5f} vs r / 18 = {ld.relative_local_dependence(frank, 0.5, 0.5) / 18:.5f}")
