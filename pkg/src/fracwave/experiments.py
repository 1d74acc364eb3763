"""
Executable studies: energy audit, energy-bound audits, moderateness and
negligibility sweeps over the regularization parameter, and coherence.

Thresholds used by the verdicts are conventions of this package; the
quantities they judge come from the energy identity
``dE/dt = -2 ||b^{1/2} u_t||^2`` and the bounds on ``||u||_1``, ``||u||_2``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import EpsilonUnderResolved, GridMismatch, OrderTooLarge
from .fracops import frac_laplacian, hs_norm, l2_norm, lp_norm, norm1, norm2, sobolev_check, symbol
from .grid import Field, Grid, boundary_mass_fraction, psum
from .mollify import (
    MIN_CELLS_PER_EPS,
    CoefficientNet,
    fit_moderateness,
    mollifying_net,
    regularize,
)
from .propagate import (
    SolverState,
    StepperConfig,
    Trajectory,
    cfl_bound,
    evolve,
    local_propagator,
    modal_propagator,
)

__all__ = [
    "EnergyRecord",
    "EnergyMonitor",
    "EnergyAudit",
    "energy",
    "energy_records",
    "energy_audit",
    "energy_refinement_order",
    "RunSpec",
    "random_suite",
    "lemma1_ratio",
    "lemma2_ratio",
    "lemma1_audit",
    "lemma2_audit",
    "BoundAudit",
    "SweepRecord",
    "ModeratenessResult",
    "moderateness_sweep",
    "NegligibilityResult",
    "negligibility_sweep",
    "difference_solve",
    "local_slopes",
    "CoherenceResult",
    "coherence_study",
    "admissible_dt",
    "holder_suite",
    "sobolev_suite",
    "random_trig_field",
    "verdict",
    "ENERGY_BAND",
    "DuhamelCheck",
    "duhamel_check",
    "RESIDUAL_BAND",
    "LEMMA1_R_STAR",
    "LEMMA2_R_STAR",
]

#: ``E`` may rise above its running minimum by at most ``ENERGY_BAND (dt Lambda)^2 E(0)``.
ENERGY_BAND = 1e-2
#: Identity residual allowance ``RESIDUAL_BAND (dt Lambda)^2 E(0)``; worst seen on the
#: 100-run suite is 0.025, so this keeps a 4x margin.
RESIDUAL_BAND = 1e-1
#: Frozen regression bounds for the randomized energy-bound suites (seed 2024, 100 runs).
LEMMA1_R_STAR = 2.0
LEMMA2_R_STAR = 2.0
#: Slope that operationalizes "faster than every power" at finite eps.
NEGLIGIBLE_SLOPE = 5.0
MODERATENESS_SLACK = 0.25
COHERENCE_MIN_ORDER = 0.9
EXACT_TOL = 1e-12


def _map(func, items, threads: int):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(it) for it in items]


def verdict(study: str, passed: bool, metrics: dict, thresholds: dict, paper_ref: str) -> dict:
    """Machine-readable verdict document."""
    return {
        "study": study,
        "pass": bool(passed),
        "metrics": metrics,
        "thresholds": thresholds,
        "paper_ref": paper_ref,
    }


# --------------------------------------------------------------------------- #
# energy
# --------------------------------------------------------------------------- #

def energy(u: Field, ut: Field, a: Field, s: float) -> float:
    """``||u_t||^2 + ||(-Delta)^{s/2} u||^2 + ||a^{1/2} u||^2``."""
    g = u.grid
    return (
        l2_norm(ut) ** 2
        + l2_norm(frac_laplacian(u, s / 2.0)) ** 2
        + g.cell_volume * psum(a.values * u.values**2)
    )


def dissipation_rate(ut: Field, b: Field) -> float:
    """``2 ||b^{1/2} u_t||^2``."""
    return 2.0 * ut.grid.cell_volume * psum(b.values * ut.values**2)


@dataclass
class EnergyRecord:
    t: float
    E: float
    dissipated: float
    norm1: float
    norm2: float
    l2_u: float
    l2_ut: float
    linf_u: float
    linf_ut: float


class EnergyMonitor:
    """Observer for :func:`~fracwave.propagate.evolve` that builds
    :class:`EnergyRecord` rows on the fly.

    The dissipated energy ``2 int_0^t ||b^{1/2} u_t||^2`` is a trapezoid sum
    over the observed samples, so sample every step when auditing.
    """

    def __init__(self, a: Field, b: Field, s: float):
        self.a, self.b, self.s = a, b, s
        self.records: list[EnergyRecord] = []
        self.boundary_mass = 0.0
        self._prev = None
        self._dissipated = 0.0

    def __call__(self, st: SolverState) -> EnergyRecord:
        rate = dissipation_rate(st.ut, self.b)
        if self._prev is not None:
            prev_rate, prev_t = self._prev
            self._dissipated += 0.5 * (rate + prev_rate) * (st.t - prev_t)
        self._prev = (rate, st.t)
        rec = EnergyRecord(
            t=st.t,
            E=energy(st.u, st.ut, self.a, self.s),
            dissipated=self._dissipated,
            norm1=norm1(st.u, st.ut, self.s),
            norm2=norm2(st.u, st.ut, self.s),
            l2_u=l2_norm(st.u),
            l2_ut=l2_norm(st.ut),
            linf_u=st.u.max_abs(),
            linf_ut=st.ut.max_abs(),
        )
        self.boundary_mass = max(self.boundary_mass, boundary_mass_fraction(st.u))
        self.records.append(rec)
        return rec


def energy_records(states: Sequence[SolverState], a: Field, b: Field, s: float) -> list[EnergyRecord]:
    """Energy series with the running dissipation ``2 int_0^t ||b^{1/2} u_t||^2``.

    The time integral uses the trapezoid rule over the sampled states.
    """
    mon = EnergyMonitor(a, b, s)
    for st in states:
        mon(st)
    return mon.records


@dataclass
class EnergyAudit:
    records: list[EnergyRecord]
    passed: bool
    max_increase: float
    increase_tol: float
    residual: float
    residual_tol: float
    residual_const: float
    order: float | None = None
    boundary_mass: float = 0.0

    def as_verdict(self) -> dict:
        return verdict(
            "energy_audit",
            self.passed,
            {
                "max_increase": self.max_increase,
                "residual": self.residual,
                "residual_over_dt2": self.residual_const,
                "residual_order": self.order,
                "E0": self.records[0].E if self.records else 0.0,
                "boundary_mass_max": self.boundary_mass,
            },
            {
                "increase_tol": self.increase_tol,
                "residual_tol": self.residual_tol,
                "min_residual_order": 1.9,
                "energy_band": ENERGY_BAND,
                "residual_band": RESIDUAL_BAND,
            },
            "energy identity dE/dt = -2||b^{1/2} u_t||^2 and E(t) <= E(0)",
        )


def _stiffness(grid: Grid, s: float, a: Field, b: Field) -> float:
    return max(grid.xi_max**s, math.sqrt(a.max_abs()), b.max_abs())


def _residual(records):
    E0 = records[0].E
    return max(abs(E0 - r.E - r.dissipated) for r in records)


def energy_audit(
    trajectory: Trajectory | Sequence[SolverState] | Sequence[EnergyRecord],
    a_eps: Field,
    b_eps: Field,
    s: float,
    dt: float | None = None,
    refined: Trajectory | None = None,
) -> EnergyAudit:
    """Audit a trajectory against the energy identity.

    PASS requires (i) ``E`` never rises more than ``ENERGY_BAND (dt Lambda)^2 E(0)``
    above its running minimum, with ``Lambda`` the CFL stiffness rate, and
    (ii) the identity residual ``|E(0) - E(t) - dissipated(t)|`` stays below
    ``RESIDUAL_BAND (dt Lambda)^2 E(0)``. When ``refined`` (the same run at
    ``dt/2``) is supplied, (ii) additionally requires the residual to shrink at
    order >= 1.9. Both trajectories must be sampled every step, since the
    dissipated energy is a trapezoid sum over the samples.
    """
    bmass = 0.0
    if isinstance(trajectory, Trajectory):
        dt = trajectory.dt if dt is None else dt
        trajectory = trajectory.states
    items = list(trajectory)
    if dt is None:
        raise ValueError("dt is required unless a Trajectory is passed")
    if items and isinstance(items[0], EnergyRecord):
        recs = items
    else:
        recs = energy_records(items, a_eps, b_eps, s)
        bmass = max((boundary_mass_fraction(st.u) for st in items), default=0.0)
    E = np.array([r.E for r in recs])
    E0 = E[0]
    scale = (dt * _stiffness(a_eps.grid, s, a_eps, b_eps)) ** 2 * E0
    band = ENERGY_BAND * scale
    rtol = RESIDUAL_BAND * scale
    increase = float(np.max(E - np.minimum.accumulate(E))) if E.size else 0.0
    resid = _residual(recs)
    passed = increase <= band + EXACT_TOL * E0 and resid <= rtol + EXACT_TOL * E0
    order = None
    if refined is not None:
        fine = refined.states if isinstance(refined, Trajectory) else list(refined)
        if fine and not isinstance(fine[0], EnergyRecord):
            fine = energy_records(fine, a_eps, b_eps, s)
        r_fine = _residual(fine)
        if resid > EXACT_TOL * max(E0, 1e-300) and r_fine > 0:
            order = math.log2(resid / r_fine)
            passed = passed and order >= 1.9
    return EnergyAudit(
        recs, bool(passed), increase, band, resid, rtol, resid / dt**2 if dt else 0.0, order, bmass
    )


def energy_refinement_order(u0, u1, a, b, s, T, dt) -> tuple[float, float, float]:
    """Residuals at ``dt`` and ``dt/2`` and the observed order."""
    res = []
    for k in (1, 2):
        cfg = StepperConfig(s, dt / k, a, b)
        tr = evolve(SolverState(u0, u1), cfg, T, stride=1)
        res.append(_residual(energy_records(tr.states, a, b, s)))
    order = math.log2(res[0] / res[1]) if res[1] > 0 else float("inf")
    return res[0], res[1], order


# --------------------------------------------------------------------------- #
# randomized suites
# --------------------------------------------------------------------------- #

def random_trig_field(rng: np.random.Generator, kmax: int, decay: float = 1.0, mean_zero: bool = False):
    """Random real trig polynomial on the ``2 pi``-periodic box, as a callable.

    Returned callable takes the coordinate arrays of a grid with ``L = pi``
    scaled to unit angular frequency (it uses ``x pi / L`` internally).
    """
    terms = []
    for k in range(1, kmax + 1):
        amp = (1.0 + k) ** (-decay)
        terms.append((k, amp * rng.standard_normal(), amp * rng.standard_normal()))
    c0 = 0.0 if mean_zero else float(rng.standard_normal())

    def f(grid: Grid):
        x = grid.x[0] * (math.pi / grid.L)
        out = np.full(grid.shape, c0)
        for k, ca, cb in terms:
            if grid.d == 1:
                out = out + ca * np.cos(k * x) + cb * np.sin(k * x)
            else:
                phase = sum(xi * (math.pi / grid.L) for xi in grid.x)
                out = out + ca * np.cos(k * phase) + cb * np.sin(k * phase)
        return Field(grid, out)

    return f


@dataclass
class RunSpec:
    """One randomized run; fields are callables ``grid -> Field`` so the
    same continuous problem can be sampled on several grids."""

    run_id: int
    s: float
    T: float
    u0: Callable[[Grid], Field]
    u1: Callable[[Grid], Field]
    a: Callable[[Grid], Field]
    b: Callable[[Grid], Field]


def _nonneg_coefficient(rng, kmax, scale):
    p = random_trig_field(rng, kmax, decay=1.5, mean_zero=True)
    # sup taken on a fine reference grid so the field is the same function on every grid
    sup = float(np.abs(p(Grid(1, 4096, math.pi)).values).max())

    def f(grid):
        v = p(grid).values
        if sup == 0:
            return grid.constant(scale)
        return Field(grid, scale * (1.0 + 0.9 * np.clip(v / sup, -1.0, 1.0)))

    return f


def random_suite(n_runs: int = 100, seed: int = 2024, s_range=(0.3, 1.0), T: float = 1.0, kmax: int = 6) -> list[RunSpec]:
    """Deterministic randomized suite of smooth nonnegative-coefficient problems."""
    rng = np.random.default_rng(seed)
    runs = []
    for i in range(n_runs):
        s = float(rng.uniform(*s_range))
        a = _nonneg_coefficient(rng, kmax, float(rng.uniform(0.0, 3.0)))
        b = _nonneg_coefficient(rng, kmax, float(rng.uniform(0.05, 1.0)))
        u0 = random_trig_field(rng, kmax, decay=2.0)
        u1 = random_trig_field(rng, kmax, decay=1.0)
        runs.append(RunSpec(i, s, T, u0, u1, a, b))
    return runs


def admissible_dt(T: float, dt: float, grid: Grid, s: float, a: Field, b: Field) -> float:
    """Largest ``T/n <= dt`` that also satisfies the CFL bound."""
    bound = cfl_bound(grid, s, a, b)
    n = max(int(round(T / dt)), int(math.ceil(T / bound - 1e-9)), 1)
    return T / n


def _sup_norms(u0, u1, a, b, s, T, dt, stride=1):
    cfg = StepperConfig(s, admissible_dt(T, dt, a.grid, s, a, b), a, b)
    sup1 = [norm1(u0, u1, s)]
    sup2 = [norm2(u0, u1, s)]
    bm = [boundary_mass_fraction(u0)]

    def obs(st):
        sup1.append(norm1(st.u, st.ut, s))
        sup2.append(norm2(st.u, st.ut, s))
        bm.append(boundary_mass_fraction(st.u))

    evolve(SolverState(u0, u1), cfg, T, observers=(obs,), stride=stride, keep_states=False)
    return max(sup1), max(sup2), max(bm), cfg.dt


def lemma1_ratio(u0, u1, a, b, s, T, dt, stride=1) -> float:
    """``sup_t ||u||_1 / ((1+||a||_inf)(1+||b||_inf)(||u0||_{H^s} + ||u1||_{L^2}))``."""
    data = hs_norm(u0, s) + l2_norm(u1)
    if data == 0.0:
        return 0.0
    sup1, _, _, _ = _sup_norms(u0, u1, a, b, s, T, dt, stride)
    return sup1 / ((1.0 + a.max_abs()) * (1.0 + b.max_abs()) * data)


def _lp_or_nan(f, p):
    return lp_norm(f, p) if p >= 1 else float("nan")


def lemma2_ratio(u0, u1, a, b, s, T, dt, stride=1) -> float:
    """``sup_t ||u||_2`` over the ``L^{d/s}``, ``L^{d/2s}`` weighted data size."""
    d = u0.grid.d
    if d <= 2 * s:
        raise OrderTooLarge(f"needs d > 2s (d={d}, s={s})")
    data = hs_norm(u0, 2 * s) + hs_norm(u1, s)
    if data == 0.0:
        return 0.0
    _, sup2, _, _ = _sup_norms(u0, u1, a, b, s, T, dt, stride)
    weight = (
        (1.0 + lp_norm(a, d / s))
        * (1.0 + lp_norm(a, d / (2 * s)))
        * (1.0 + lp_norm(b, d / s)) ** 2
    )
    return sup2 / (weight * data)


@dataclass
class BoundAudit:
    ratios: list[float]
    worst: float
    r_star: float
    passed: bool
    study: str

    def as_verdict(self) -> dict:
        return verdict(
            self.study,
            self.passed,
            {"worst_ratio": self.worst, "n_runs": len(self.ratios), "mean_ratio": float(np.mean(self.ratios)) if self.ratios else 0.0},
            {"r_star": self.r_star},
            "||u||_1 <~ (1+|a|_inf)(1+|b|_inf)(|u0|_Hs + |u1|_L2)"
            if self.study == "lemma1_audit"
            else "||u||_2 <~ (1+|a|_{d/s})(1+|a|_{d/2s})(1+|b|_{d/s})^2 (|u0|_H2s + |u1|_Hs)",
        )


def _suite_ratios(runs, grid, ratio_fn, dt=None, threads=1):
    def one(run: RunSpec):
        a, b = run.a(grid), run.b(grid)
        step = dt if dt is not None else cfl_bound(grid, run.s, a, b)
        return ratio_fn(run.u0(grid), run.u1(grid), a, b, run.s, run.T, step)

    return _map(one, runs, threads)


def lemma1_audit(runs: Sequence[RunSpec], grid: Grid, r_star: float = LEMMA1_R_STAR, dt=None, threads: int = 1) -> BoundAudit:
    ratios = _suite_ratios(runs, grid, lemma1_ratio, dt, threads)
    worst = max(ratios, default=0.0)
    return BoundAudit(ratios, worst, r_star, worst <= r_star, "lemma1_audit")


def lemma2_audit(runs: Sequence[RunSpec], grid: Grid, r_star: float = LEMMA2_R_STAR, dt=None, threads: int = 1) -> BoundAudit:
    for run in runs:
        if grid.d <= 2 * run.s:
            raise OrderTooLarge(f"run {run.run_id}: d={grid.d} <= 2s={2 * run.s}")
    ratios = _suite_ratios(runs, grid, lemma2_ratio, dt, threads)
    worst = max(ratios, default=0.0)
    return BoundAudit(ratios, worst, r_star, worst <= r_star, "lemma2_audit")


# --------------------------------------------------------------------------- #
# sweeps over eps
# --------------------------------------------------------------------------- #

DataNet = Callable[[float], tuple[Field, Field]]


@dataclass
class SweepRecord:
    eps: float
    coef_linf: float
    coef_lds: float
    coef_ld2s: float
    data_hs: float
    data_l2: float
    sup_norm1: float
    sup_norm2: float
    terminal_err: float
    b_linf: float = 0.0
    data_h2s: float = 0.0
    dt: float = 0.0
    boundary_mass: float = 0.0

    CSV_FIELDS = (
        "eps",
        "coef_linf",
        "coef_lds",
        "coef_ld2s",
        "data_hs",
        "data_l2",
        "sup_norm1",
        "sup_norm2",
        "terminal_err",
    )

    def csv_row(self):
        return [getattr(self, k) for k in self.CSV_FIELDS]


def _check_eps_list(eps_list, grid):
    eps = [float(e) for e in eps_list]
    if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    for e in eps:
        if not 0 < e <= 1:
            raise ValueError(f"eps={e} outside (0, 1]")
        if e < MIN_CELLS_PER_EPS * grid.h * (1 - 1e-12):
            raise EpsilonUnderResolved(f"eps={e:g} < {MIN_CELLS_PER_EPS} h = {MIN_CELLS_PER_EPS * grid.h:g}")
    return eps


def _fit_or_zero(eps, values):
    vals = np.asarray(values, dtype=float)
    if np.all(vals == 0):
        return 0.0
    return fit_moderateness(eps, vals).N_hat


@dataclass
class ModeratenessResult:
    records: list[SweepRecord]
    exponents: dict
    N_solution: float
    N_solution2: float
    budget: float
    passed: bool

    def as_verdict(self) -> dict:
        return verdict(
            "moderateness_sweep",
            self.passed,
            {
                "N_solution": self.N_solution,
                "N_solution_norm2": self.N_solution2,
                "budget": self.budget,
                **{f"N_{k}": v for k, v in self.exponents.items()},
                "boundary_mass_max": max(r.boundary_mass for r in self.records),
            },
            {"slack": MODERATENESS_SLACK},
            "sup_t ||u_eps||_1 <~ eps^{-(N1+N2+max(N3,N4))}",
        )


def moderateness_sweep(
    net: CoefficientNet,
    data: DataNet,
    eps_list,
    s: float,
    T: float,
    dt: float,
    stride: int = 1,
    threads: int = 1,
) -> ModeratenessResult:
    """Solve the regularized problem for each ``eps`` and fit growth exponents.

    PASS iff the fitted exponent of ``sup_t ||u_eps||_1`` is at most
    ``N1 + N2 + max(N3, N4) + 0.25`` where ``N1..N4`` are fitted from
    ``||a_eps||_inf``, ``||b_eps||_inf``, ``||u0_eps||_{H^s}``, ``||u1_eps||_{L^2}``.
    """
    grid = net.grid
    eps = _check_eps_list(eps_list, grid)
    d = grid.d

    def one(e):
        a, b = net(e)
        u0, u1 = data(e)
        sup1, sup2, bm, used_dt = _sup_norms(u0, u1, a, b, s, T, dt, stride)
        return SweepRecord(
            eps=e,
            coef_linf=a.max_abs(),
            coef_lds=_lp_or_nan(a, d / s),
            coef_ld2s=_lp_or_nan(a, d / (2 * s)),
            data_hs=hs_norm(u0, s),
            data_l2=l2_norm(u1),
            sup_norm1=sup1,
            sup_norm2=sup2,
            terminal_err=float("nan"),
            b_linf=b.max_abs(),
            data_h2s=hs_norm(u0, 2 * s),
            dt=used_dt,
            boundary_mass=bm,
        )

    recs = _map(one, eps, threads)
    ex = {
        "a": _fit_or_zero(eps, [r.coef_linf for r in recs]),
        "b": _fit_or_zero(eps, [r.b_linf for r in recs]),
        "u0": _fit_or_zero(eps, [r.data_hs for r in recs]),
        "u1": _fit_or_zero(eps, [r.data_l2 for r in recs]),
    }
    n_sol = _fit_or_zero(eps, [r.sup_norm1 for r in recs])
    n_sol2 = _fit_or_zero(eps, [r.sup_norm2 for r in recs])
    budget = ex["a"] + ex["b"] + max(ex["u0"], ex["u1"])
    return ModeratenessResult(recs, ex, n_sol, n_sol2, budget, n_sol <= budget + MODERATENESS_SLACK)


# --------------------------------------------------------------------------- #
# negligibility
# --------------------------------------------------------------------------- #

def _block_exp(a, b, da, db, tau):
    """Per-point ``expm`` of the 4x4 local generator acting on ``(U, U_t, u, u_t)``."""
    n = a.size
    G = np.zeros((n, 4, 4))
    G[:, 0, 1] = 1.0
    G[:, 1, 0] = -(a + da)
    G[:, 1, 1] = -(b + db)
    G[:, 1, 2] = da
    G[:, 1, 3] = db
    G[:, 2, 3] = 1.0
    G[:, 3, 2] = -a
    G[:, 3, 3] = -b
    return scipy.linalg.expm(tau * G)


def difference_solve(
    u0: Field,
    u1: Field,
    a: Field,
    b: Field,
    da: float,
    db: float,
    dU0: Field,
    dU1: Field,
    s: float,
    T: float,
    dt: float,
    stride: int = 1,
    workers: int | None = None,
):
    """Evolve ``u`` together with ``U = u - u~`` without cancellation.

    ``u`` solves the problem with ``(a, b)`` and data ``(u0, u1)``; ``u~``
    solves it with ``(a + da, b + db)`` and data ``(u0 - dU0, u1 - dU1)``.
    ``U`` obeys ``U_tt + (-Delta)^s U + (a+da) U + (b+db) U_t = da u + db u_t``
    and is advanced by the same drift-compensated Strang splitting as
    :func:`~fracwave.propagate.strang_step`, applied to the coupled system.

    Returns ``(times, ||U(t)||_{L^2}, final (U, U_t, u, u_t) fields)``.
    """
    grid = u0.grid
    n = int(round(T / dt))
    half = 0.5 * dt
    E = _block_exp(a.values.ravel(), b.values.ravel(), da, db, half)
    # drift compensation D(-tau) on both (U, U_t) and (u, u_t)
    Dm = np.eye(4)
    Dm[0, 1] = -half
    Dm[2, 3] = -half
    lead = np.einsum("ij,njk->nik", Dm, E)
    trail = np.einsum("nij,jk->nik", E, Dm)
    omega = np.sqrt(symbol(grid, s))
    c, sn, ms, c2 = modal_propagator(omega, dt)

    X = np.stack([dU0.values.ravel(), dU1.values.ravel(), u0.values.ravel(), u1.values.ravel()])

    def kick(M, X):
        return np.einsum("nij,jn->in", M, X)

    def free(X):
        Y = np.empty_like(X)
        for i in (0, 2):
            U = scipy.fft.fftn(X[i].reshape(grid.shape), workers=workers)
            P = scipy.fft.fftn(X[i + 1].reshape(grid.shape), workers=workers)
            Y[i] = scipy.fft.ifftn(c * U + sn * P, workers=workers).real.ravel()
            Y[i + 1] = scipy.fft.ifftn(ms * U + c2 * P, workers=workers).real.ravel()
        return Y

    def l2(v):
        return math.sqrt(grid.cell_volume * psum(v * v))

    times = [0.0]
    norms = [l2(X[0])]
    for k in range(1, n + 1):
        X = kick(trail, free(kick(lead, X)))
        if k % stride == 0 or k == n:
            times.append(k * dt)
            norms.append(l2(X[0]))
    fields = tuple(Field(grid, X[i].reshape(grid.shape)) for i in range(4))
    return np.array(times), np.array(norms), fields


def local_slopes(eps, values) -> np.ndarray:
    """Log-log slopes ``log(D_i / D_{i+1}) / log(eps_i / eps_{i+1})``."""
    e = np.asarray(eps, dtype=float)
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(v[:-1] / v[1:]) / np.log(e[:-1] / e[1:])


@dataclass
class NegligibilityResult:
    eps: list[float]
    D: list[float]
    slopes: list[float]
    records: list[SweepRecord]
    passed: bool
    label: str
    threshold_eps: float
    k: float

    def as_verdict(self) -> dict:
        return verdict(
            "negligibility_sweep",
            self.passed,
            {"eps": self.eps, "D": self.D, "slopes": self.slopes, "perturbation": self.label},
            {"k": self.k, "threshold_eps": self.threshold_eps, "require_increasing": True},
            "||u_eps - u~_eps||_L2 <~ eps^k for all k",
        )


def negligibility_sweep(
    net: CoefficientNet,
    data: DataNet,
    eps_list,
    s: float,
    T: float,
    dt: float,
    data_perturbation: Callable[[float], tuple[Field, Field]] | None = None,
    stride: int = 1,
    threads: int = 1,
    k: float = NEGLIGIBLE_SLOPE,
    threshold_eps: float = 2.0**-5,
) -> NegligibilityResult:
    """Compare solutions with ``net`` and with its attached perturbation.

    ``D(eps) = sup_t ||u_eps - u~_eps||_{L^2}``. PASS iff the local log-log
    slopes strictly increase along decreasing ``eps`` and the slope of every
    interval ending at or below ``threshold_eps`` exceeds ``k``.
    ``data_perturbation(eps)`` returns ``(u0 - u0~, u1 - u1~)``.
    """
    grid = net.grid
    eps = _check_eps_list(eps_list, grid)

    def one(e):
        a, b = net.unperturbed(e)
        da, db = net.perturbation_sizes(e)
        u0, u1 = data(e)
        dU0, dU1 = data_perturbation(e) if data_perturbation else (grid.zeros(), grid.zeros())
        step = admissible_dt(T, dt, grid, s, a + da, b + db)
        times, norms, final = difference_solve(u0, u1, a, b, da, db, dU0, dU1, s, T, step, stride)
        rec = SweepRecord(
            eps=e,
            coef_linf=a.max_abs(),
            coef_lds=_lp_or_nan(a, grid.d / s),
            coef_ld2s=_lp_or_nan(a, grid.d / (2 * s)),
            data_hs=hs_norm(u0, s),
            data_l2=l2_norm(u1),
            sup_norm1=float("nan"),
            sup_norm2=float("nan"),
            terminal_err=l2_norm(final[0]),
            b_linf=b.max_abs(),
            data_h2s=hs_norm(u0, 2 * s),
            dt=step,
            boundary_mass=boundary_mass_fraction(final[2]),
        )
        return float(norms.max()), rec

    out = _map(one, eps, threads)
    D = [o[0] for o in out]
    recs = [o[1] for o in out]
    slopes = local_slopes(eps, D)
    ok = bool(np.all(np.isfinite(slopes))) and bool(np.all(np.diff(slopes) > 0))
    ends = np.array(eps[1:])
    tail = slopes[ends <= threshold_eps * (1 + 1e-12)]
    ok = ok and tail.size > 0 and bool(np.all(tail > k))
    label = net.perturbation.label if net.perturbation else "none"
    if all(v == 0 for v in D):
        ok = False
    return NegligibilityResult(eps, D, [float(x) for x in slopes], recs, ok, label, threshold_eps, k)


# --------------------------------------------------------------------------- #
# coherence
# --------------------------------------------------------------------------- #

@dataclass
class CoherenceResult:
    eps: list[float]
    errors: list[float]
    order: float
    monotone: bool
    exact: bool
    passed: bool

    def as_verdict(self) -> dict:
        return verdict(
            "coherence_study",
            self.passed,
            {"eps": self.eps, "l2_err": self.errors, "order": self.order, "monotone": self.monotone, "exact": self.exact},
            {"min_order": COHERENCE_MIN_ORDER, "exact_tol": EXACT_TOL},
            "u_eps -> u in L2 as eps -> 0 for bounded a, b",
        )


def coherence_study(
    a: Field,
    b: Field,
    u0: Field,
    u1: Field,
    eps_list,
    s: float,
    T: float,
    dt: float,
    regularize_data: bool = False,
    threads: int = 1,
) -> CoherenceResult:
    """``||u_eps(T) - u(T)||_{L^2}`` with ``a_eps = a * psi_eps``, ``b_eps = b * psi_eps``.

    The reference ``u`` uses the unregularized coefficients on the same grid
    with the same time step, so time-discretization error cancels to leading
    order and only the eps-effect remains. PASS iff errors decrease strictly
    and the fitted order is >= 0.9, or all errors are below 1e-12.
    """
    grid = a.grid
    if b.grid != grid or u0.grid != grid or u1.grid != grid:
        raise GridMismatch("inputs live on different grids")
    eps = _check_eps_list(eps_list, grid)
    step = admissible_dt(T, dt, grid, s, a, b)
    ref = evolve(SolverState(u0, u1), StepperConfig(s, step, a, b), T, keep_states=False).final

    def one(e):
        psi = mollifying_net(None, e, grid)
        ae, be = regularize(a, psi), regularize(b, psi)
        d0, d1 = (regularize(u0, psi), regularize(u1, psi)) if regularize_data else (u0, u1)
        fin = evolve(SolverState(d0, d1), StepperConfig(s, step, ae, be), T, keep_states=False).final
        return l2_norm(fin.u - ref.u)

    errs = _map(one, eps, threads)
    exact = all(e <= EXACT_TOL for e in errs)
    monotone = all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    if exact or min(errs) <= 0:
        order = float("nan")
    else:
        # order in eps: errors ~ eps^order, i.e. minus the moderateness slope
        order = -fit_moderateness(eps, errs).N_hat if len(eps) >= 4 else float(
            np.polyfit(np.log(eps), np.log(errs), 1)[0]
        )
    passed = exact or (monotone and order >= COHERENCE_MIN_ORDER)
    return CoherenceResult(eps, [float(e) for e in errs], float(order), monotone, exact, bool(passed))


# --------------------------------------------------------------------------- #
# inequality suites
# --------------------------------------------------------------------------- #

def holder_suite(grid: Grid, n: int = 1000, seed: int = 7) -> dict:
    """Check ``||fg||_r <= ||f||_p ||g||_q`` with ``1/r = 1/p + 1/q`` on random triples."""
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for _ in range(n):
        p = float(rng.uniform(1.0, 8.0))
        q = float(rng.uniform(1.0, 8.0))
        if rng.random() < 0.1:
            q = math.inf
        r = 1.0 / (1.0 / p + (0.0 if math.isinf(q) else 1.0 / q))
        f = Field(grid, rng.standard_normal(grid.shape) * rng.uniform(0.1, 10))
        g = Field(grid, rng.standard_normal(grid.shape) * rng.uniform(0.1, 10))
        if r < 1.0:
            # lp_norm needs exponents >= 1; rescale to a valid triple
            p, q, r = 2.0 * p, 2.0 * q, 2.0 * r
        lhs = lp_norm(f * g, r)
        rhs = lp_norm(f, p) * lp_norm(g, q)
        worst = max(worst, lhs / rhs)
        if lhs > rhs:
            violations += 1
    return {"n": n, "violations": violations, "worst_ratio": worst}


def sobolev_suite(grid: Grid, s: float, n: int = 1000, seed: int = 11, kmax: int = 8) -> dict:
    """Empirical ``max ||f||_{L^q} / ||(-Delta)^{s/2} f||_{L^2}`` over random
    mean-zero trig polynomials (the same functions on every grid)."""
    rng = np.random.default_rng(seed)
    ratios = []
    q = None
    for _ in range(n):
        f = random_trig_field(rng, kmax, decay=float(rng.uniform(0.0, 2.0)), mean_zero=True)(grid)
        res = sobolev_check(f, s)
        q = res.q
        if res.defined:
            ratios.append(res.ratio)
    return {"n": n, "q": q, "max_ratio": max(ratios), "mean_ratio": float(np.mean(ratios))}


# --------------------------------------------------------------------------- #
# Duhamel vs direct stepping
# --------------------------------------------------------------------------- #

#: Allowed relative drift of the fitted constants between refinement levels.
DUHAMEL_STABILITY = 0.10
DUHAMEL_MARGIN = 0.10


@dataclass
class DuhamelCheck:
    errors: dict
    C1: list[float]
    C2: list[float]
    passed: bool
    stable: bool
    bounded: bool

    def as_verdict(self) -> dict:
        return verdict(
            "duhamel_check",
            self.passed,
            {
                "errors": {f"n={n},M={M}": e for (n, M), e in self.errors.items()},
                "C1": self.C1,
                "C2": self.C2,
            },
            {"stability": DUHAMEL_STABILITY, "margin": DUHAMEL_MARGIN},
            "u = w + int_0^t v(.; tau) dtau agrees with direct stepping",
        )


def _rel_spread(vals):
    vals = np.asarray(vals, dtype=float)
    top = np.max(np.abs(vals))
    return 0.0 if top == 0 else float(np.ptp(vals) / top)


def duhamel_check(
    u0: Field,
    u1: Field,
    a: Field,
    b: Field,
    source,
    s: float,
    T: float,
    steps=(64, 128, 256),
    nodes=(9, 17, 33),
    threads: int = 1,
) -> DuhamelCheck:
    """Compare :func:`duhamel_solve` against :func:`direct_source_solve`.

    The difference vector is modeled as ``dt^2 V1 + (T/(M-1))^2 V2``.
    ``C1 = ||V1||`` is estimated from consecutive ``dt`` at fixed ``M`` and
    ``C2 = ||V2||`` from consecutive ``M`` at fixed ``dt``. PASS iff each
    constant varies by at most 10% over the levels and every measured
    difference lies within ``1.1 (C1 dt^2 + C2 (T/(M-1))^2)``.
    ``M - 1`` must divide every step count so nodes fall on the time grid.
    """
    from .duhamel import direct_source_solve, duhamel_solve

    grid = u0.grid
    for n in steps:
        for M in nodes:
            if n % (M - 1):
                raise ValueError(f"M-1={M - 1} does not divide n={n}")

    def diff(n, M, direct):
        cfg = StepperConfig(s, T / n, a, b)
        dh = duhamel_solve(u0, u1, cfg, source, T, M, threads=threads)
        return np.concatenate([(dh.u - direct.u).values.ravel(), (dh.ut - direct.ut).values.ravel()])

    vec = {}
    for n in steps:
        direct = direct_source_solve(u0, u1, StepperConfig(s, T / n, a, b), source, T)
        for M in nodes:
            vec[(n, M)] = diff(n, M, direct) * math.sqrt(grid.cell_volume)

    def l2(v):
        return math.sqrt(psum(v * v))

    hq = {M: T / (M - 1) for M in nodes}
    C2 = [
        l2((vec[(n, m1)] - vec[(n, m2)]) / (hq[m1] ** 2 - hq[m2] ** 2))
        for n in steps
        for m1, m2 in zip(nodes, nodes[1:])
    ]
    C1 = [
        l2((vec[(n1, M)] - vec[(n2, M)]) / ((T / n1) ** 2 - (T / n2) ** 2))
        for M in nodes
        for n1, n2 in zip(steps, steps[1:])
    ]
    errors = {k: l2(v) for k, v in vec.items()}
    c1, c2 = max(C1), max(C2)
    bounded = all(
        e <= (1 + DUHAMEL_MARGIN) * (c1 * (T / n) ** 2 + c2 * hq[M] ** 2) for (n, M), e in errors.items()
    )
    stable = _rel_spread(C1) <= DUHAMEL_STABILITY and _rel_spread(C2) <= DUHAMEL_STABILITY
    return DuhamelCheck(errors, C1, C2, bounded and stable, stable, bounded)
