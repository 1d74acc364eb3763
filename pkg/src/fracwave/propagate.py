"""
Time stepping for ``u_tt + (-Delta)^s u + a u + b u_t = 0`` on the torus.

The generator ``[[0, 1], [-(-Delta)^s - a, -b]]`` is split three ways::

    G = F + Loc - D,   F = [[0, 1], [-(-Delta)^s, 0]],
                       Loc = [[0, 1], [-a, -b]],   D = [[0, 1], [0, 0]]

``F`` (free wave) is solved exactly per Fourier bin, ``Loc`` exactly per grid
point and ``D`` is a plain drift. One step is the symmetric composition ::

    Loc(dt/2) D(-dt/2) F(dt) D(-dt/2) Loc(dt/2)

(read left to right in order of application), which is second order and exact both for ``a = b = 0`` (``Loc = D``)
and for spatially constant problems without ``(-Delta)^s`` (``F = D``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.fft

from .errors import CFLViolation, GridMismatch, InvalidTimeStep, NegativeCoefficient, NonFinite, Unstable
from .fracops import l2_norm, symbol
from .grid import Field, Grid, SpectralField

__all__ = [
    "SolverState",
    "StepperConfig",
    "cfl_bound",
    "free_flow",
    "local_flow",
    "local_propagator",
    "kick_propagator",
    "strang_step",
    "leapfrog_step",
    "modal_oracle",
    "modal_propagator",
    "evolve",
    "Trajectory",
    "step_count",
]

CFL_THETA = 0.5
DEFECTIVE_RTOL = 1e-9
UNSTABLE_FACTOR = 1e12


@dataclass(frozen=True)
class SolverState:
    u: Field
    ut: Field
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.ut.grid:
            raise GridMismatch("u and u_t live on different grids")
        if not np.isfinite(self.t):
            raise NonFinite("time is not finite")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "SolverState":
        return cls(grid.zeros(), grid.zeros(), t)


def cfl_bound(grid: Grid, s: float, a: Field | None = None, b: Field | None = None) -> float:
    """Largest admissible step ``theta / max(|xi_max|^s, sqrt(||a||_inf), ||b||_inf)``."""
    rates = [grid.xi_max**s]
    if a is not None:
        rates.append(np.sqrt(a.max_abs()))
    if b is not None:
        rates.append(b.max_abs())
    return CFL_THETA / max(rates)


@dataclass(frozen=True)
class StepperConfig:
    s: float
    dt: float
    a_eps: Field
    b_eps: Field
    scheme: str = "strang_split"
    workers: int | None = None
    check_cfl: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError(f"fractional order must be positive, got {self.s}")
        if not self.dt > 0:
            raise InvalidTimeStep(f"dt must be positive, got {self.dt}")
        if self.scheme not in ("strang_split", "leapfrog"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.a_eps.grid != self.b_eps.grid:
            raise GridMismatch("a_eps and b_eps live on different grids")
        if self.a_eps.values.min() < 0 or self.b_eps.values.min() < 0:
            raise NegativeCoefficient("coefficients must be nonnegative")
        if self.check_cfl:
            bound = cfl_bound(self.grid, self.s, self.a_eps, self.b_eps)
            if self.dt > bound * (1 + 1e-12):
                raise CFLViolation(
                    f"dt={self.dt:.6g} exceeds the CFL bound {bound:.6g} "
                    f"(theta={CFL_THETA} / max(|xi_max|^s, sqrt|a|_inf, |b|_inf))"
                )

    @property
    def grid(self) -> Grid:
        return self.a_eps.grid

    def kick(self, tau: float, leading: bool = True):
        key = ("kick", tau, leading)
        if key not in self._cache:
            self._cache[key] = kick_propagator(self.a_eps.values, self.b_eps.values, tau, leading)
        return self._cache[key]

    def free(self, tau: float):
        key = ("free", tau)
        if key not in self._cache:
            omega = np.sqrt(symbol(self.grid, self.s))
            self._cache[key] = modal_propagator(omega, tau)
        return self._cache[key]


# --------------------------------------------------------------------------- #
# exact sub-flows
# --------------------------------------------------------------------------- #

def modal_propagator(omega: np.ndarray, t: float):
    """Entries ``(c, s, -w^2 s, c)`` of the rotation solving ``y'' + w^2 y = 0``.

    ``s = sin(w t) / w``, which tends to ``t`` at ``w = 0``.
    """
    wt = omega * t
    c = np.cos(wt)
    with np.errstate(invalid="ignore", divide="ignore"):
        sn = np.where(omega > 0, np.sin(wt) / np.where(omega > 0, omega, 1.0), t)
    return c, sn, -omega * np.sin(wt), c


def free_flow(state: SolverState, dt: float, s: float, workers: int | None = None) -> SolverState:
    """Exact free-wave flow over ``dt`` (``dt`` may be negative)."""
    omega = np.sqrt(symbol(state.grid, s))
    return _apply_free(state, modal_propagator(omega, dt), dt, workers)


def _apply_free(state, prop, dt, workers):
    c, sn, ms, c2 = prop
    U = scipy.fft.fftn(state.u.values, workers=workers)
    P = scipy.fft.fftn(state.ut.values, workers=workers)
    U1 = c * U + sn * P
    P1 = ms * U + c2 * P
    u = scipy.fft.ifftn(U1, workers=workers).real
    ut = scipy.fft.ifftn(P1, workers=workers).real
    return SolverState(Field(state.grid, u), Field(state.grid, ut), state.t + dt)


def local_propagator(a, b, tau: float):
    """Per-point entries of ``expm(tau [[0, 1], [-a, -b]])``.

    With ``lam = b/2`` and ``disc = b^2 - 4a`` the exponential is
    ``e^{-lam tau} (C I + S (M + lam I))`` where ``(C, S)`` is
    ``(cos W tau, sin(W tau)/W)`` for ``disc < 0``, ``(cosh m tau, sinh(m tau)/m)``
    for ``disc > 0`` and ``(1, tau)`` in the defective case
    ``|disc| < 1e-9 max(1, b^2)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise NegativeCoefficient("local flow needs a >= 0 and b >= 0")
    a, b = np.broadcast_arrays(a, b)
    lam = 0.5 * b
    disc = b * b - 4.0 * a
    defective = np.abs(disc) < DEFECTIVE_RTOL * np.maximum(1.0, b * b)
    under = (disc < 0) & ~defective
    over = (disc > 0) & ~defective

    # damped C and S, i.e. already multiplied by exp(-lam tau)
    C = np.empty_like(a)
    S = np.empty_like(a)

    damp = np.exp(-lam * tau)
    C[defective] = damp[defective]
    S[defective] = damp[defective] * tau

    if under.any():
        W = np.sqrt(-disc[under]) / 2.0
        C[under] = damp[under] * np.cos(W * tau)
        S[under] = damp[under] * np.sin(W * tau) / W

    if over.any():
        m = np.sqrt(disc[over]) / 2.0
        lo = lam[over]
        # e^{-lam tau} cosh(m tau) and e^{-lam tau} sinh(m tau)/m without overflow
        slow = np.exp((m - lo) * tau)
        fast_ratio = np.exp(-2.0 * m * tau)
        C[over] = 0.5 * slow * (1.0 + fast_ratio)
        S[over] = slow * (-np.expm1(-2.0 * m * tau)) / (2.0 * m)

    e11 = C + S * lam
    e12 = S
    e21 = -a * S
    e22 = C - S * lam
    return e11, e12, e21, e22


def local_flow(state: SolverState, dt: float, a_eps: Field, b_eps: Field) -> SolverState:
    """Exact pointwise flow of ``v_tt + a v + b v_t = 0`` over ``dt``."""
    if a_eps.grid != state.grid or b_eps.grid != state.grid:
        raise GridMismatch("coefficients live on a different grid")
    e11, e12, e21, e22 = local_propagator(a_eps.values, b_eps.values, dt)
    u, p = state.u.values, state.ut.values
    return SolverState(
        Field(state.grid, e11 * u + e12 * p),
        Field(state.grid, e21 * u + e22 * p),
        state.t + dt,
    )


def kick_propagator(a, b, tau: float, leading: bool = True):
    """Matrix entries of the drift-compensated local half step.

    ``leading=True`` applies ``Loc(tau)`` then ``D(-tau)``; ``False`` applies
    ``D(-tau)`` then ``Loc(tau)``, its mirror image in the symmetric step. Both
    are the identity when ``a = b = 0``.
    """
    e11, e12, e21, e22 = local_propagator(a, b, tau)
    if leading:
        return e11 - tau * e21, e12 - tau * e22, e21, e22
    return e11, e12 - tau * e11, e21, e22 - tau * e21


def _apply_kick(state, prop, dt_time=0.0):
    k11, k12, k21, k22 = prop
    u, p = state.u.values, state.ut.values
    return SolverState(
        Field(state.grid, k11 * u + k12 * p),
        Field(state.grid, k21 * u + k22 * p),
        state.t + dt_time,
    )


def strang_step(state: SolverState, cfg: StepperConfig, source=None) -> SolverState:
    """One symmetric step ``Loc(dt/2) D(-dt/2) F(dt) D(-dt/2) Loc(dt/2)``.

    ``source(t) -> Field`` adds a forcing ``f(t, x)`` to the velocity equation
    through two half kicks evaluated at the step midpoint, placed symmetrically
    around the free flow.
    """
    dt = cfg.dt
    half = 0.5 * dt
    st = _apply_kick(state, cfg.kick(half, leading=True))
    if source is not None:
        f_mid = source(state.t + half)
        st = SolverState(st.u, st.ut + half * f_mid, st.t)
    st = _apply_free(st, cfg.free(dt), dt, cfg.workers)
    if source is not None:
        st = SolverState(st.u, st.ut + half * f_mid, st.t)
    return _apply_kick(st, cfg.kick(half, leading=False))


def leapfrog_step(state: SolverState, cfg: StepperConfig, source=None) -> SolverState:
    """Stormer-Verlet cross-check scheme with implicit-midpoint damping."""
    dt = cfg.dt
    half = 0.5 * dt
    a = cfg.a_eps.values
    b = cfg.b_eps.values
    sym = symbol(cfg.grid, cfg.s)
    workers = cfg.workers

    def force(u):
        lap = scipy.fft.ifftn(sym * scipy.fft.fftn(u, workers=workers), workers=workers).real
        return -lap - a * u

    u, p = state.u.values, state.ut.values
    f0 = source(state.t + half).values if source is not None else 0.0
    p_half = (p + half * (force(u) + f0)) / (1.0 + half * b)
    u_new = u + dt * p_half
    p_new = (1.0 - half * b) * p_half + half * (force(u_new) + f0)
    return SolverState(Field(cfg.grid, u_new), Field(cfg.grid, p_new), state.t + dt)


# --------------------------------------------------------------------------- #
# constant-coefficient oracle
# --------------------------------------------------------------------------- #

def _cos_sinc(z, t):
    """``cos(sqrt(z) t)`` and ``sin(sqrt(z) t)/sqrt(z)`` as entire functions of ``z``."""
    z = np.asarray(z, dtype=complex)
    r = np.sqrt(z)
    small = np.abs(z) * t * t < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.cos(r * t)
        sn = np.where(small, 0.0, np.sin(r * t) / np.where(small, 1.0, r))
    zt2 = z * t * t
    c = np.where(small, 1.0 - zt2 / 2.0 + zt2 * zt2 / 24.0, c)
    sn = np.where(small, t * (1.0 - zt2 / 6.0 + zt2 * zt2 / 120.0), sn)
    return c.real, sn.real


def modal_oracle(u0_hat: SpectralField, u1_hat: SpectralField, a0: float, b0: float, s: float, t: float):
    """Closed-form solution of ``y'' + b0 y' + (|xi|^{2s} + a0) y = 0`` per mode.

    Returns the pair ``(u_hat(t), u_t_hat(t))``.
    """
    if a0 < 0 or b0 < 0:
        raise NegativeCoefficient("oracle needs a0 >= 0 and b0 >= 0")
    grid = u0_hat.grid
    lam = 0.5 * b0
    z = symbol(grid, s) + a0 - lam * lam
    c, sn = _cos_sinc(z, t)
    damp = np.exp(-lam * t)
    U0, U1 = u0_hat.coeffs, u1_hat.coeffs
    u = damp * (c * U0 + sn * (U1 + lam * U0))
    # d/dt of the above, using d/dt sn = c and d/dt c = -z sn
    ut = damp * (c * U1 - sn * (z * U0 + lam * (U1 + lam * U0)))
    return SpectralField(grid, u), SpectralField(grid, ut)


# --------------------------------------------------------------------------- #
# evolution driver
# --------------------------------------------------------------------------- #

def step_count(T: float, dt: float) -> int:
    """Number of steps, requiring ``dt`` to divide ``T`` to 1e-12."""
    if T < 0:
        raise InvalidTimeStep("T must be nonnegative")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-12 * max(1.0, T):
        raise InvalidTimeStep(f"dt={dt!r} does not divide T={T!r}")
    return n


@dataclass
class Trajectory:
    """States sampled every ``stride`` steps (first and last always included)."""

    states: list
    records: list
    stride: int
    dt: float

    @property
    def final(self) -> SolverState:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([st.t for st in self.states])


def evolve(
    state: SolverState,
    cfg: StepperConfig,
    T: float,
    observers: Iterable[Callable[[SolverState], object]] = (),
    stride: int = 10,
    source=None,
    keep_states: bool = True,
) -> Trajectory:
    """Advance ``state`` by ``T`` with the configured scheme.

    ``observers`` are called on every sampled state; their return values are
    collected in ``Trajectory.records`` as one tuple per sample. Raises
    :class:`Unstable` when the L2 norm of ``u`` or ``u_t`` exceeds ``1e12``
    times its initial size.
    """
    if state.grid != cfg.grid:
        raise GridMismatch("state and coefficients live on different grids")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = step_count(T, cfg.dt)
    step = strang_step if cfg.scheme == "strang_split" else leapfrog_step
    observers = tuple(observers)

    ref = max(l2_norm(state.u), l2_norm(state.ut))
    limit = UNSTABLE_FACTOR * ref if ref > 0 else np.inf
    t0 = state.t

    def sample(st):
        return tuple(obs(st) for obs in observers)

    states = [state]
    records = [sample(state)] if observers else []
    st = state
    for k in range(1, n + 1):
        try:
            st = step(st, cfg, source)
        except NonFinite:
            raise Unstable(f"non-finite values at t={t0 + k * cfg.dt:.6g}") from None
        if k % stride == 0 or k == n:
            st = SolverState(st.u, st.ut, t0 + k * cfg.dt)
            if max(l2_norm(st.u), l2_norm(st.ut)) > limit:
                raise Unstable(f"solution blew up at t={st.t:.6g}")
            if keep_states or k == n:
                states.append(st)
            if observers:
                records.append(sample(st))
    return Trajectory(states, records, stride, cfg.dt)
