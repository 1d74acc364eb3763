"""
Energy law: E(t) + int_0^t 2 int b u_t^2 = E(0). Run a damped, variable
coefficient problem, audit the energy, and halve dt to see the residual
fall like dt^2.
"""
import math

import numpy as np

from fracwave.experiments import energy_audit
from fracwave.grid import Field, Grid
from fracwave.propagate import SolverState, StepperConfig, evolve

grid = Grid(1, 128, math.pi)
x = grid.x[0]
s = 0.6
a = Field(grid, 1 + 0.9 * np.cos(x))
b = Field(grid, 0.4 + 0.3 * np.cos(3 * x))
u0 = Field(grid, np.exp(-4 * x**2))
u1 = grid.zeros()

coarse = evolve(SolverState(u0, u1), StepperConfig(s, 0.01, a, b), 2.0, stride=1)
fine = evolve(SolverState(u0, u1), StepperConfig(s, 0.005, a, b), 2.0, stride=1)
audit = energy_audit(coarse, a, b, s, refined=fine)
rec = audit.records
print(f"E(0) = {rec[0].E:.6f}   E(T) = {rec[-1].E:.6f}   dissipated = {rec[-1].dissipated:.6f}")
print(f"max rise above running minimum: {audit.max_increase:.2e}")
print(f"residual order under dt halving: {audit.order:.3f}")
print("verdict:", "PASS" if audit.passed else "FAIL")
