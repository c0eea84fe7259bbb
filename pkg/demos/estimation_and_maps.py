"""Kernel estimates of r and bootstrap dependence maps.

Run with ``python3 demos/estimation_and_maps.py`` (about ten seconds).
"""
# %%
import numpy as np

from reldep import copulas as cop
from reldep import estimation as es
from reldep import local_dep as ld
from reldep.numerics import RngStream

# %% naive and local Frank estimates on a Frank sample
frank = cop.make_copula("frank", theta=3.0)
sample = frank.sample(5000, RngStream(11, 0))
truth = lambda x, y: ld.relative_local_dependence(frank, x, y)
for method in ("naive", "local-frank"):
    rep = es.estimate_grid(sample, method=method)
    kept = rep.r_hat[~rep.masked]
    print(f"{method:11s}: grid mean r_hat {np.mean(kept):6.2f} (truth 6),"
          f" squared error {es.error_metric(rep, truth):8.1f}")

# %% a parabola Y = X^2 + noise is uncorrelated yet dependent; the map shows where
par = es.simulate_parabola(250, RngStream(1, 0))
print(f"parabola Pearson correlation: {np.corrcoef(par.x, par.y)[0, 1]:+.3f}")
rep = es.dependence_map(par.ranks, rng=RngStream(1, 1))
symbol = {"positive": "+", "negative": "-", "neutral": ".", "low-density": " "}
grid = rep.label.reshape(9, 9)
print("dependence map (x across, y up):")
for j in range(8, -1, -1):
    print("  " + " ".join(symbol[grid[i, j]] for i in range(9)))
