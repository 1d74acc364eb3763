"""
Moderateness: for a = delta_eps the coefficient grows like eps^-1 in sup norm
and delta_eps^2 like eps^-2. The solution norms grow no faster than that.
"""
import numpy as np

from fracwave.experiments import moderateness_sweep
from fracwave.grid import Field, Grid
from fracwave.mollify import coefficient_net

grid = Grid(1, 512, 0.5)
eps = [2.0**-k for k in range(3, 8)]


def data(e):
    return Field(grid, np.exp(-((grid.x[0] / 0.05) ** 2))), grid.zeros()


for kind in ("delta", "delta_squared"):
    res = moderateness_sweep(coefficient_net(kind, grid), data, eps, 1.0, 0.2, 1e-3)
    print(f"{kind:14s} N_a = {res.exponents['a']:.4f}  N_solution = {res.N_solution:.4f}  budget = {res.budget:.4f}")
    for r in res.records:
        print(f"    eps={r.eps:.5f}  |a|_inf={r.coef_linf:10.3f}  sup|u|={r.sup_norm1:.4f}")
