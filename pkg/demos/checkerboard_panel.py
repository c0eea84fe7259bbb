"""Checkerboard solutions of c^-k d^2 log c / du dv = zeta.

Run with ``python3 demos/checkerboard_panel.py`` (about ten seconds).
"""
# %%
import numpy as np

from reldep import checkerboard as cb
from reldep import copulas as cop

# %% the (k, zeta) lattice at n = 5: more zeta, more mass on the diagonal
panel = cb.panel_sweep()
print("diagonal mass   " + "  ".join(f"zeta={z:g}" for z in panel.zetas))
for k in panel.ks:
    row = [panel.cells[k, z].matrix.diagonal_mass() for z in panel.zetas]
    print(f"  k={k:+d}         " + "  ".join(f"{d:.4f}" for d in row))

# %% k = 1 is the Frank family, k = 0 the minimum information copula
res = cb.greedy_solve(cb.PdeSpec(1, 6.0, 16, relaxation=1.7))
exact = cb.discretize(cop.make_copula("frank", theta=3.0), 16)
print(f"k=1 zeta=6: {res.sweeps} sweeps, max density gap to Frank(3) "
      f"{np.max(np.abs(res.matrix.density - exact.density)):.2e}")
res0 = cb.greedy_solve(cb.PdeSpec(0, 2.0, 16, relaxation=1.7))
print(f"k=0 zeta=2: max mass gap to the IPF solution "
      f"{np.max(np.abs(res0.matrix.mass - cop.mics_density(2.0, 16).masses)):.2e}")

# %% raising the k-solution to the power k lands back on a Frank copula
resm = cb.greedy_solve(cb.PdeSpec(-1, 2.0, 16, relaxation=1.7))
pt, Z = cb.power_transform_checkerboard(resm.matrix, -1)
r = cb.implied_relative_log_odds(pt)
print(f"k=-1: implied r in [{r.min():.4f}, {r.max():.4f}],"
      f" predicted {2 * cb.frank_param_from_scaling(-1, 2.0, Z):.4f}")
