"""
Negligibility: perturbing the coefficient by exp(-1/eps) changes the solution
by an amount whose log-log slope in eps blows up, i.e. faster than any power.
An eps^2 perturbation is the control: slope 2, and the study fails.
"""
import numpy as np

from fracwave.experiments import negligibility_sweep
from fracwave.grid import Field, Grid
from fracwave.mollify import coefficient_net, exp_negligible, negligible_perturbation

grid = Grid(1, 512, 0.5)
eps = [2.0**-k for k in range(3, 8)]
base = coefficient_net("delta", grid)


def data(e):
    return Field(grid, np.exp(-((grid.x[0] / 0.05) ** 2))), grid.zeros()


for label, size in (("exp(-1/eps)", exp_negligible), ("eps^2", lambda e: e * e)):
    res = negligibility_sweep(negligible_perturbation(base, size=size, label=label), data, eps, 1.0, 0.2, 1e-3)
    slopes = ", ".join(f"{v:.2f}" for v in res.slopes)
    print(f"{label:12s} local slopes [{slopes}]  -> {'PASS' if res.passed else 'FAIL'}")
