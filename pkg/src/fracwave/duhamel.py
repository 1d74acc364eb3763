"""
Nonhomogeneous problems ``u_tt + (-Delta)^s u + a u + b u_t = f(t, x)``.

Two independent routes:

* :func:`duhamel_solve` superposes the homogeneous flow ``w`` and auxiliary
  flows ``v(.; tau)`` launched at each quadrature node with data
  ``(0, f(tau))``, integrated in ``tau`` by the composite trapezoid rule.
* :func:`direct_source_solve` steps the forced equation directly.

The Duhamel route costs ``M`` full solves; it is an oracle for small grids.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import QuadratureUnderResolved
from .grid import Field, Grid
from .propagate import SolverState, StepperConfig, evolve, step_count

__all__ = ["SourceTerm", "duhamel_solve", "direct_source_solve", "quadrature_nodes", "zero_source"]


@dataclass(frozen=True)
class SourceTerm:
    """Forcing ``f(t, x)``; ``evaluator(t, grid)`` returns a :class:`Field`."""

    evaluator: Callable[[float, Grid], Field]
    description: str = ""
    is_zero: bool = False

    def __call__(self, t: float, grid: Grid) -> Field:
        return self.evaluator(t, grid)

    def bind(self, grid: Grid) -> Callable[[float], Field]:
        return lambda t: self.evaluator(t, grid)


def zero_source() -> SourceTerm:
    return SourceTerm(lambda t, grid: grid.zeros(), "zero", is_zero=True)


def quadrature_nodes(T: float, dt: float, M: int) -> np.ndarray:
    """``M`` trapezoid nodes on ``[0, T]`` snapped to the time grid ``k dt``."""
    if M < 3:
        raise QuadratureUnderResolved(f"need at least 3 quadrature nodes, got {M}")
    n = step_count(T, dt)
    ks = np.unique(np.rint(np.linspace(0, n, M)).astype(int))
    if ks.size < 3:
        raise QuadratureUnderResolved("too few distinct time steps for the quadrature")
    return ks


def duhamel_solve(
    u0: Field,
    u1: Field,
    cfg: StepperConfig,
    source: SourceTerm,
    T: float,
    M: int,
    threads: int = 1,
) -> SolverState:
    """``u(T) = w(T) + int_0^T v(T; tau) dtau`` with an ``M``-node trapezoid rule."""
    ks = quadrature_nodes(T, cfg.dt, M)
    w = evolve(SolverState(u0, u1), cfg, T, keep_states=False).final
    if source.is_zero:
        return w
    grid = u0.grid
    taus = ks * cfg.dt

    def aux(k):
        tau = k * cfg.dt
        start = SolverState(grid.zeros(), source(tau, grid), tau)
        return evolve(start, cfg, T - tau, keep_states=False).final

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            finals = list(pool.map(aux, ks))
    else:
        finals = [aux(k) for k in ks]

    # composite trapezoid weights on the (possibly uneven) snapped nodes
    gaps = np.diff(taus)
    weights = np.zeros(taus.size)
    weights[:-1] += 0.5 * gaps
    weights[1:] += 0.5 * gaps

    u = np.zeros(grid.shape)
    ut = np.zeros(grid.shape)
    for wgt, v in zip(weights, finals):  # fixed order keeps the sum deterministic
        u += wgt * v.u.values
        ut += wgt * v.ut.values
    return SolverState(w.u + u, w.ut + ut, T)


def direct_source_solve(
    u0: Field,
    u1: Field,
    cfg: StepperConfig,
    source: SourceTerm,
    T: float,
) -> SolverState:
    """Step the forced equation with midpoint source kicks."""
    forcing = None if source.is_zero else source.bind(u0.grid)
    return evolve(SolverState(u0, u1), cfg, T, keep_states=False, source=forcing).final
