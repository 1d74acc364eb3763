"""
Free fractional wave: with a = b = 0 every Fourier mode oscillates at
frequency |k|^s, and the split step reproduces that to rounding error.
"""
import math

import numpy as np

from fracwave.grid import Field, Grid
from fracwave.propagate import SolverState, StepperConfig, evolve

grid = Grid(1, 64, math.pi)
z = grid.zeros()
for s in (0.25, 0.5, 1.0):
    k = 3
    w = k**s
    u0 = Field(grid, np.cos(k * grid.x[0]))
    T = 2 * math.pi / w
    run = evolve(SolverState(u0, z), StepperConfig(s, T / 400, z, z), T, keep_states=False)
    err = np.abs(run.final.u.values - u0.values).max()
    print(f"s={s:4.2f}  omega={w:.4f}  one period later, max |u(T) - u0| = {err:.2e}")
