"""
Acceptance criteria 1-9. Each test prints one ``criterion N: PASS|FAIL`` line
(collected again in the terminal summary) and asserts the criterion at its
stated tolerance and runtime budget.
"""
import functools
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fracwave.cli import main
from fracwave.duhamel import SourceTerm
from fracwave.experiments import (
    admissible_dt,
    coherence_study,
    duhamel_check,
    energy_audit,
    holder_suite,
    moderateness_sweep,
    negligibility_sweep,
    random_suite,
    sobolev_suite,
)
from fracwave.fracops import l2_norm
from fracwave.grid import Field, Grid, forward, inverse
from fracwave.mollify import coefficient_net, exp_negligible, negligible_perturbation
from fracwave.propagate import SolverState, StepperConfig, evolve, modal_oracle, strang_step

pytestmark = pytest.mark.acceptance

SWEEP_GRID = Grid(1, 512, 0.5)
SWEEP_EPS = [2.0**-k for k in range(3, 8)]


def criterion(number, title, budget=None):
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            t0 = time.perf_counter()
            detail = ""
            ok = False
            try:
                detail = fn(*args, **kwargs) or ""
                ok = True
            except AssertionError as exc:
                detail = str(exc).splitlines()[0] if str(exc) else "assertion failed"
                raise
            finally:
                dt = time.perf_counter() - t0
                if ok and budget is not None and dt > budget:
                    ok = False
                    detail += f" [over budget {budget:g} s]"
                line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({dt:.2f} s) {detail}"
                ACCEPTANCE_LINES.append(line)
                print(line)
            assert dt <= budget if budget is not None else True, f"runtime {dt:.1f} s over {budget} s"

        return inner

    return wrap


def _sweep_data(e):
    g = SWEEP_GRID
    return Field(g, np.exp(-((g.x[0] / 0.05) ** 2))), g.zeros()


@criterion(1, "free-propagator exactness", budget=1.0)
def test_criterion_1_free_propagator():
    worst_step = 0.0
    worst_period = 0.0
    for grid, ks, s in [
        (Grid(1, 64, math.pi), [(1,), (3,), (17,)], 0.5),
        (Grid(1, 64, math.pi), [(2,), (5,)], 0.9),
        (Grid(2, 32, math.pi), [(1, 2), (4, 3)], 0.75),
    ]:
        z = grid.zeros()
        for k in ks:
            arg = sum(ki * xi for ki, xi in zip(k, grid.x))
            u0 = Field(grid, np.cos(arg))
            w = math.sqrt(sum(ki * ki for ki in k)) ** s
            T = 2 * math.pi / w
            n = 200
            cfg = StepperConfig(s, T / n, z, z, check_cfl=False)
            st = SolverState(u0, z)
            for j in range(1, n + 1):
                st = strang_step(st, cfg)
                t = j * cfg.dt
                err = max(
                    np.abs(st.u.values - math.cos(w * t) * u0.values).max(),
                    np.abs(st.ut.values + w * math.sin(w * t) * u0.values).max() / w,
                )
                worst_step = max(worst_step, err)
            worst_period = max(worst_period, np.abs(st.u.values - u0.values).max())
    assert worst_step <= 1e-12, f"per-step error {worst_step:.3g}"
    assert worst_period <= 1e-10, f"period return error {worst_period:.3g}"
    return f"step err {worst_step:.2e}, period err {worst_period:.2e}"


@criterion(2, "constant-coefficient oracle order", budget=10.0)
def test_criterion_2_oracle_order():
    g = Grid(1, 128, math.pi)
    s, a0, b0, T = 0.75, 1.3, 0.4, 1.0
    u0 = Field(g, np.exp(-(g.x[0] ** 2) / 0.25))
    u1 = Field(g, np.sin(g.x[0]))
    U, _ = modal_oracle(forward(u0), forward(u1), a0, b0, s, T)
    ref = inverse(U)
    errs = []
    for n in (256, 512, 1024):
        cfg = StepperConfig(s, T / n, g.constant(a0), g.constant(b0))
        errs.append(l2_norm(evolve(SolverState(u0, u1), cfg, T, keep_states=False).final.u - ref))
    orders = [math.log2(e1 / e2) for e1, e2 in zip(errs, errs[1:])]
    assert all(1.9 <= o <= 2.1 for o in orders), f"orders {orders}"
    return f"orders {orders[0]:.4f}, {orders[1]:.4f}"


@criterion(3, "energy law on 100 randomized runs", budget=120.0)
def test_criterion_3_energy_law():
    g = Grid(1, 128, math.pi)
    fails = []
    min_order = math.inf
    max_inc = 0.0
    for run in random_suite(100, seed=2024):
        a, b, u0, u1 = run.a(g), run.b(g), run.u0(g), run.u1(g)
        dt = admissible_dt(run.T, 0.02, g, run.s, a, b)
        coarse = evolve(SolverState(u0, u1), StepperConfig(run.s, dt, a, b), run.T, stride=1)
        fine = evolve(SolverState(u0, u1), StepperConfig(run.s, dt / 2, a, b), run.T, stride=1)
        au = energy_audit(coarse, a, b, run.s, refined=fine)
        max_inc = max(max_inc, au.max_increase / au.records[0].E)
        if au.order is not None:
            min_order = min(min_order, au.order)
        if not au.passed or au.order is None or au.order < 1.9:
            fails.append(run.run_id)
    assert not fails, f"runs failing the audit: {fails}"
    return f"min residual order {min_order:.4f}, max relative increase {max_inc:.2e}"


@criterion(4, "Duhamel equivalence, refinement-stable constants", budget=60.0)
def test_criterion_4_duhamel():
    g = Grid(1, 64, math.pi)
    x = g.x[0]
    a = Field(g, 1 + 0.5 * np.cos(x))
    b = Field(g, 0.3 + 0.2 * np.sin(2 * x) ** 2)
    u0 = Field(g, np.exp(np.cos(x)) - 1)
    u1 = Field(g, np.sin(x))
    src = SourceTerm(lambda t, gr: Field(gr, np.cos(2 * t) * np.cos(3 * gr.x[0]) + t * np.sin(gr.x[0])))
    res = duhamel_check(u0, u1, a, b, src, 0.75, 1.0, steps=(64, 128, 256), nodes=(9, 17, 33))
    assert res.stable, f"constants drift: C1 {res.C1}, C2 {res.C2}"
    assert res.bounded, "difference exceeds C1 dt^2 + C2 (T/M)^2"
    return f"C1 in [{min(res.C1):.4f}, {max(res.C1):.4f}], C2 in [{min(res.C2):.4f}, {max(res.C2):.4f}]"


@criterion(5, "moderateness exponents", budget=180.0)
def test_criterion_5_moderateness():
    g = SWEEP_GRID
    delta = coefficient_net("delta", g, other=g.constant(0.5))
    sq = coefficient_net("delta_squared", g)
    r1 = moderateness_sweep(delta, _sweep_data, SWEEP_EPS, 1.0, 0.2, 1e-3)
    r2 = moderateness_sweep(sq, _sweep_data, SWEEP_EPS, 1.0, 0.2, 1e-3)
    assert abs(r1.exponents["a"] - 1.0) <= 0.05, f"delta exponent {r1.exponents['a']}"
    assert abs(r2.exponents["a"] - 2.0) <= 0.05, f"delta^2 exponent {r2.exponents['a']}"
    assert r1.passed and r2.passed, f"solution exponents {r1.N_solution}, {r2.N_solution}"
    return (
        f"N_delta {r1.exponents['a']:.4f}, N_delta2 {r2.exponents['a']:.4f}, "
        f"N_sol {r1.N_solution:.3f}/{r1.budget:.3f}, {r2.N_solution:.3f}/{r2.budget:.3f}"
    )


@criterion(6, "negligibility slopes and eps^2 control", budget=180.0)
def test_criterion_6_negligibility():
    g = SWEEP_GRID
    base = coefficient_net("delta", g)
    exp_net = negligible_perturbation(base, size=exp_negligible, label="exp(-1/eps)")
    ctl_net = negligible_perturbation(base, size=lambda e: e * e, label="eps^2")
    r = negligibility_sweep(exp_net, _sweep_data, SWEEP_EPS, 1.0, 0.2, 1e-3)
    c = negligibility_sweep(ctl_net, _sweep_data, SWEEP_EPS, 1.0, 0.2, 1e-3)
    slopes = np.array(r.slopes)
    assert np.all(np.diff(slopes) > 0), f"slopes not increasing {r.slopes}"
    ends = np.array(SWEEP_EPS[1:])
    assert np.all(slopes[ends <= 2.0**-5] > 5), f"slopes {r.slopes}"
    assert r.passed
    assert all(abs(s - 2.0) <= 0.2 for s in c.slopes), f"control slopes {c.slopes}"
    assert not c.passed, "control must FAIL"
    return f"slopes {', '.join(f'{s:.2f}' for s in r.slopes)}; control {', '.join(f'{s:.3f}' for s in c.slopes)} (FAIL as designed)"


@criterion(7, "coherence", budget=120.0)
def test_criterion_7_coherence():
    g = Grid(1, 512, 1.0)
    x = g.x[0]
    eps = [2.0**-k for k in range(3, 7)]
    u0 = Field(g, np.exp(-((x / 0.1) ** 2)))
    z = g.zeros()
    a = Field(g, 1 + np.cos(np.pi * x) ** 2)
    smooth = coherence_study(a, z, u0, z, eps, 0.75, 0.5, 1e-3)
    b = Field(g, 0.5 * (1 + np.sin(np.pi * x)))
    damped = coherence_study(a, b, u0, z, eps, 0.75, 0.5, 1e-3)
    const = coherence_study(g.constant(2.0), g.constant(0.3), u0, z, eps, 0.75, 0.5, 1e-3)
    for res in (smooth, damped):
        assert res.monotone and res.order >= 0.9, f"errors {res.errors}, order {res.order}"
    assert max(const.errors) <= 1e-12, f"constant-coefficient errors {const.errors}"
    return f"orders {smooth.order:.3f}, {damped.order:.3f}; constant max err {max(const.errors):.1e}"


@criterion(8, "Holder and Sobolev inequality suites", budget=60.0)
def test_criterion_8_inequalities():
    h = holder_suite(Grid(1, 128, math.pi), n=1000)
    assert h["violations"] == 0, f"{h['violations']} Holder violations"
    s1 = sobolev_suite(Grid(1, 64, math.pi), 0.25, n=1000)
    s2 = sobolev_suite(Grid(1, 128, math.pi), 0.25, n=1000)
    assert s1["q"] == 4.0
    assert np.isfinite(s1["max_ratio"]) and np.isfinite(s2["max_ratio"])
    change = abs(s2["max_ratio"] - s1["max_ratio"]) / s1["max_ratio"]
    assert change < 0.05, f"Sobolev ratio changed {change:.3%} under N -> 2N"
    return f"Holder worst {h['worst_ratio']:.4f}; Sobolev max ratio {s1['max_ratio']:.4f} -> {s2['max_ratio']:.4f} ({change:.1e})"


@criterion(9, "byte-identical CSVs across thread counts", budget=None)
def test_criterion_9_determinism(tmp_path):
    pi = math.pi
    configs = {
        "solve": {
            "grid": {"d": 1, "N": 128, "L": pi},
            "s": 0.6,
            "T": 0.5,
            "dt": 0.005,
            "coefficients": {"a": {"kind": "cosine", "mean": 1.0, "amplitude": 0.9}, "b": {"kind": "cosine", "mean": 0.4, "amplitude": 0.3, "k": 3}},
            "data": {"u0": {"preset": "random_trig", "kmax": 6}, "u1": {"preset": "random_trig", "kmax": 6}},
            "seed": 99,
            "stride": 5,
        },
        "sweep-moderateness": {
            "grid": {"d": 1, "N": 256, "L": 0.5},
            "s": 1.0,
            "T": 0.05,
            "dt": 0.001,
            "coefficients": {"a": {"kind": "delta"}, "b": {"kind": "constant", "value": 0.2}},
            "data": {"u0": {"preset": "random_trig", "kmax": 4}},
            "eps_list": [0.25, 0.125, 0.0625, 0.03125],
            "seed": 7,
        },
        "sweep-negligibility": {
            "grid": {"d": 1, "N": 256, "L": 0.5},
            "s": 1.0,
            "T": 0.05,
            "dt": 0.001,
            "coefficients": {"a": {"kind": "delta"}},
            "data": {"u0": {"preset": "gaussian", "width": 0.05}},
            "eps_list": [0.25, 0.125, 0.0625, 0.03125],
            "negligibility": {"targets": ["a", "u0"]},
        },
        "coherence": {
            "grid": {"d": 1, "N": 256, "L": 1.0},
            "s": 0.75,
            "T": 0.1,
            "dt": 0.001,
            "coefficients": {"a": {"kind": "cosine", "mean": 1.5, "amplitude": 0.5, "k": 2}},
            "data": {"u0": {"preset": "random_trig", "kmax": 5}},
            "eps_list": [0.25, 0.125, 0.0625, 0.03125],
            "seed": 3,
        },
    }
    csv_name = {"solve": "energy.csv", "sweep-moderateness": "sweep.csv", "sweep-negligibility": "sweep.csv", "coherence": "coherence.csv"}
    checked = 0
    for cmd, doc in configs.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(doc))
        blobs = []
        for threads in (1, 2, 8, 1):
            out = tmp_path / f"{cmd}-{threads}-{len(blobs)}"
            assert main([cmd, "--config", str(path), "--out", str(out), "--threads", str(threads)]) == 0
            blobs.append((out / csv_name[cmd]).read_bytes())
        assert all(b == blobs[0] for b in blobs), f"{cmd}: CSV differs across thread counts"
        checked += 1
    return f"{checked} subcommands, threads 1/2/8 plus a repeat run"
