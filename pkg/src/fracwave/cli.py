"""
Command-line entry point.

    fracwave solve               --config run.json [--out DIR] [--threads N]
    fracwave sweep-moderateness  --config run.json ...
    fracwave sweep-negligibility --config run.json ...
    fracwave coherence           --config run.json ...
    fracwave duhamel-check       --config run.json ...

Exit codes: 0 success (whatever the verdict), 2 configuration error,
3 solver instability.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .config import (
    PERTURBATIONS,
    RunConfig,
    build_coefficient,
    build_data,
    build_net,
    build_source,
    is_eps_dependent,
    load_config,
)
from .errors import ConfigError, FracWaveError, Unstable
from .experiments import (
    EnergyMonitor,
    coherence_study,
    duhamel_check,
    energy_audit,
    moderateness_sweep,
    negligibility_sweep,
)
from .mollify import negligible_perturbation
from .propagate import SolverState, StepperConfig, evolve

__all__ = ["main", "cmd_solve", "cmd_sweep", "cmd_coherence", "cmd_duhamel_check"]

log = logging.getLogger("fracwave")

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE = 0, 2, 3


def _outdir(cfg: RunConfig, out: str | None) -> Path:
    d = Path(out if out is not None else cfg.output)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _data(cfg: RunConfig, eps=None):
    return (
        build_data(cfg.data["u0"], cfg.grid, cfg.seed, eps),
        build_data(cfg.data["u1"], cfg.grid, cfg.seed + 1, eps),
    )


def _report(v: dict, outdir: Path) -> None:
    io.write_verdict(outdir / "verdict.json", v)
    print(f"{v['study']}: {'PASS' if v['pass'] else 'FAIL'} -> {outdir}")


def cmd_solve(cfg: RunConfig, out: str | None = None, threads: int = 1) -> int:
    """Evolve, audit the energy law, write ``energy.csv``, snapshots and the verdict."""
    a = build_coefficient(cfg.coefficients["a"], cfg.grid, cfg.eps)
    b = build_coefficient(cfg.coefficients["b"], cfg.grid, cfg.eps)
    u0, u1 = _data(cfg)
    step = StepperConfig(cfg.s, cfg.dt, a, b, scheme=cfg.scheme, workers=threads)
    outdir = _outdir(cfg, out)

    snaps = []

    def snapshot(st):
        k = int(round(st.t / cfg.dt))
        if cfg.snapshots and k % cfg.snapshots == 0:
            snaps.append((k, st))

    mon = EnergyMonitor(a, b, cfg.s)
    final = evolve(SolverState(u0, u1), step, cfg.T, observers=(mon, snapshot), stride=1, keep_states=False).final
    fine = EnergyMonitor(a, b, cfg.s)
    half = StepperConfig(cfg.s, cfg.dt / 2, a, b, scheme=cfg.scheme, workers=threads)
    evolve(SolverState(u0, u1), half, cfg.T, observers=(fine,), stride=1, keep_states=False)
    audit = energy_audit(mon.records, a, b, cfg.s, dt=cfg.dt, refined=fine.records)
    audit.boundary_mass = mon.boundary_mass

    n = len(mon.records) - 1
    rows = [
        [r.t, r.E, r.dissipated, r.norm1, r.norm2, r.l2_u, r.l2_ut]
        for k, r in enumerate(mon.records)
        if k % cfg.stride == 0 or k == n
    ]
    io.write_csv(outdir / "energy.csv", io.ENERGY_HEADER, rows)
    io.write_fwf(outdir / "u_final.fwf", final.u, final.t)
    io.write_fwf(outdir / "ut_final.fwf", final.ut, final.t)
    if snaps:
        sdir = outdir / "snapshots"
        sdir.mkdir(exist_ok=True)
        for k, st in snaps:
            io.write_fwf(sdir / f"u_{k:06d}.fwf", st.u, st.t)
    _report(audit.as_verdict(), outdir)
    return EXIT_OK


def _sweep_rows(records):
    return [r.csv_row() for r in records]


def cmd_sweep(cfg: RunConfig, mode: str, out: str | None = None, threads: int = 1) -> int:
    """Moderateness or negligibility sweep over ``eps_list``; writes ``sweep.csv``."""
    if len(cfg.eps_list) < 4:
        raise ConfigError(f"eps_list needs at least 4 values for a fit, got {len(cfg.eps_list)}")
    net = build_net(cfg)

    def data(e):
        return _data(cfg, e)

    outdir = _outdir(cfg, out)
    if mode == "moderateness":
        res = moderateness_sweep(net, data, cfg.eps_list, cfg.s, cfg.T, cfg.dt, stride=cfg.stride, threads=threads)
    elif mode == "negligibility":
        opts = cfg.negligibility
        size, label = PERTURBATIONS[opts["perturbation"]]
        # four independent toggles: a, b (additive constants) and u0, u1
        # (relative perturbation u~ = (1 + size) u, so u - u~ = -size * u)
        coef_targets = tuple(t for t in opts["targets"] if t in ("a", "b"))
        data_targets = tuple(t for t in opts["targets"] if t in ("u0", "u1"))
        pnet = negligible_perturbation(net, coef_targets, size, label) if coef_targets else net
        dpert = None
        if data_targets:
            def dpert(e):
                u0, u1 = data(e)
                z = cfg.grid.zeros()
                return (
                    -size(e) * u0 if "u0" in data_targets else z,
                    -size(e) * u1 if "u1" in data_targets else z,
                )
        res = negligibility_sweep(
            pnet,
            data,
            cfg.eps_list,
            cfg.s,
            cfg.T,
            cfg.dt,
            data_perturbation=dpert,
            stride=cfg.stride,
            threads=threads,
            k=opts["k"],
            threshold_eps=opts["threshold_eps"],
        )
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    io.write_csv(outdir / "sweep.csv", io.SWEEP_HEADER, _sweep_rows(res.records))
    _report(res.as_verdict(), outdir)
    return EXIT_OK


def cmd_coherence(cfg: RunConfig, out: str | None = None, threads: int = 1) -> int:
    """Coherence study for static coefficients; writes ``coherence.csv``."""
    for k in ("a", "b"):
        if is_eps_dependent(cfg.coefficients[k]):
            raise ConfigError(f"coherence needs a static coefficient {k}, got kind {cfg.coefficients[k]['kind']!r}")
    if len(cfg.eps_list) < 2:
        raise ConfigError("eps_list needs at least 2 values")
    a = build_coefficient(cfg.coefficients["a"], cfg.grid)
    b = build_coefficient(cfg.coefficients["b"], cfg.grid)
    u0, u1 = _data(cfg)
    res = coherence_study(
        a, b, u0, u1, cfg.eps_list, cfg.s, cfg.T, cfg.dt, regularize_data=cfg.regularize_data, threads=threads
    )
    outdir = _outdir(cfg, out)
    io.write_csv(outdir / "coherence.csv", io.COHERENCE_HEADER, list(zip(res.eps, res.errors)))
    _report(res.as_verdict(), outdir)
    return EXIT_OK


def cmd_duhamel_check(cfg: RunConfig, out: str | None = None, threads: int = 1) -> int:
    """Duhamel superposition against direct forced stepping; writes ``duhamel.csv``."""
    a = build_coefficient(cfg.coefficients["a"], cfg.grid, cfg.eps)
    b = build_coefficient(cfg.coefficients["b"], cfg.grid, cfg.eps)
    u0, u1 = _data(cfg)
    res = duhamel_check(
        u0, u1, a, b, build_source(cfg), cfg.s, cfg.T, cfg.duhamel["steps"], cfg.duhamel["nodes"], threads=threads
    )
    outdir = _outdir(cfg, out)
    rows = [[n, M, e] for (n, M), e in res.errors.items()]
    io.write_csv(outdir / "duhamel.csv", ("steps", "nodes", "l2_diff"), rows)
    _report(res.as_verdict(), outdir)
    return EXIT_OK


COMMANDS = {
    "solve": lambda cfg, out, th: cmd_solve(cfg, out, th),
    "sweep-moderateness": lambda cfg, out, th: cmd_sweep(cfg, "moderateness", out, th),
    "sweep-negligibility": lambda cfg, out, th: cmd_sweep(cfg, "negligibility", out, th),
    "coherence": lambda cfg, out, th: cmd_coherence(cfg, out, th),
    "duhamel-check": lambda cfg, out, th: cmd_duhamel_check(cfg, out, th),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracwave", description="Fractional telegraph equation solver and studies.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (overrides config 'output')")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args.out, args.threads)
    except Unstable as exc:
        print(f"error: solver unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (FracWaveError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
