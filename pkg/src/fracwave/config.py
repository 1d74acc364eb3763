"""
Run configuration: a single JSON document, fail-closed on unknown keys.

Example::

    {
      "grid": {"d": 1, "N": 128, "L": 3.141592653589793},
      "s": 0.5, "T": 1.0, "dt": 0.01,
      "coefficients": {"a": {"kind": "delta", "scale": 1.0}, "b": {"kind": "constant", "value": 0.2}},
      "eps": 0.125,
      "data": {"u0": {"preset": "gaussian", "width": 0.3}, "u1": {"preset": "zero"}},
      "stride": 10
    }

Coefficient kinds: ``zero``, ``constant``, ``cosine`` (static) and ``delta``,
``delta_squared``, ``mollified`` (depend on eps), ``file`` (static FWF1).
Data presets: ``zero``, ``gaussian``, ``cosine_mode``, ``delta_like``,
``random_trig``, ``file``. A ``delta_like`` preset with ``"eps": "sweep"``
follows the sweep parameter.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigError
from .grid import Field, Grid
from .mollify import (
    CoefficientNet,
    _continuum_alpha,
    bump,
    exp_negligible,
    mollifying_net,
    regularize,
)

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "build_coefficient",
    "build_net",
    "build_data",
    "build_source",
    "PERTURBATIONS",
]

TOP_KEYS = {
    "grid",
    "s",
    "T",
    "dt",
    "scheme",
    "coefficients",
    "eps",
    "data",
    "eps_list",
    "stride",
    "output",
    "seed",
    "source",
    "duhamel",
    "negligibility",
    "snapshots",
    "regularize_data",
}
REQUIRED = {"grid", "s", "T", "dt"}

COEF_KEYS = {
    "zero": set(),
    "constant": {"value"},
    "cosine": {"mean", "amplitude", "k", "phase"},
    "delta": {"scale", "center"},
    "delta_squared": {"scale", "center"},
    "mollified": {"base"},
    "file": {"path"},
}
DATA_KEYS = {
    "zero": set(),
    "gaussian": {"amplitude", "width", "center"},
    "cosine_mode": {"amplitude", "k"},
    "delta_like": {"eps", "scale", "center"},
    "random_trig": {"kmax", "decay", "amplitude"},
    "file": {"path"},
}
SOURCE_KEYS = {"time", "omega", "space"}
DUHAMEL_KEYS = {"steps", "nodes"}
NEGL_KEYS = {"perturbation", "targets", "k", "threshold_eps"}

PERTURBATIONS: dict[str, tuple[Callable[[float], float], str]] = {
    "exp": (exp_negligible, "exp(-1/eps)"),
    "eps2": (lambda e: e * e, "eps^2"),
}


def _fail(msg):
    raise ConfigError(msg)


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        _fail(f"{where}: expected an object")
    extra = set(obj) - set(allowed)
    if extra:
        _fail(f"{where}: unknown keys {sorted(extra)}")


def _num(obj, key, where, default=None, positive=False, nonneg=False):
    if key not in obj:
        if default is None:
            _fail(f"{where}: missing '{key}'")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"{where}.{key}: expected a finite number, got {v!r}")
    if positive and v <= 0:
        _fail(f"{where}.{key}: must be positive")
    if nonneg and v < 0:
        _fail(f"{where}.{key}: must be nonnegative")
    return float(v)


def _int(obj, key, where, default=None):
    v = obj.get(key, default)
    if v is None:
        _fail(f"{where}: missing '{key}'")
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{where}.{key}: expected an integer, got {v!r}")
    return v


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    s: float
    T: float
    dt: float
    scheme: str = "strang_split"
    coefficients: dict = field(default_factory=dict)
    eps: float | None = None
    data: dict = field(default_factory=dict)
    eps_list: tuple[float, ...] = ()
    stride: int = 10
    output: str = "out"
    seed: int = 0
    source: dict | None = None
    duhamel: dict = field(default_factory=dict)
    negligibility: dict = field(default_factory=dict)
    snapshots: int = 0
    regularize_data: bool = False
    base_dir: Path = Path(".")


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        _fail(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        _fail(f"{p}: invalid JSON ({exc})")
    return parse_config(doc, base_dir=p.parent)


def _resolve(path, base_dir):
    q = Path(path)
    if not q.is_absolute():
        q = base_dir / q
    if not q.is_file():
        _fail(f"referenced file not found: {q}")
    return str(q)


def _check_coef(spec, where, base_dir):
    if not isinstance(spec, dict) or "kind" not in spec:
        _fail(f"{where}: expected an object with 'kind'")
    kind = spec["kind"]
    if kind not in COEF_KEYS:
        _fail(f"{where}: unknown kind {kind!r}")
    _check_keys(spec, COEF_KEYS[kind] | {"kind"}, where)
    out = dict(spec)
    if kind == "constant":
        _num(spec, "value", where, nonneg=True)
    elif kind == "cosine":
        mean = _num(spec, "mean", where)
        amp = _num(spec, "amplitude", where, default=0.0)
        _num(spec, "k", where, default=1.0)
        _num(spec, "phase", where, default=0.0)
        if mean - abs(amp) < 0:
            _fail(f"{where}: mean - |amplitude| < 0 gives a negative coefficient")
    elif kind in ("delta", "delta_squared"):
        _num(spec, "scale", where, default=1.0, nonneg=True)
    elif kind == "mollified":
        out["base"] = _check_coef(spec.get("base"), where + ".base", base_dir)
        if out["base"]["kind"] in ("delta", "delta_squared", "mollified"):
            _fail(f"{where}.base must be a static coefficient")
    elif kind == "file":
        if "path" not in spec:
            _fail(f"{where}: missing 'path'")
        out["path"] = _resolve(spec["path"], base_dir)
    return out


def _check_data(spec, where, base_dir):
    if not isinstance(spec, dict) or "preset" not in spec:
        _fail(f"{where}: expected an object with 'preset'")
    preset = spec["preset"]
    if preset not in DATA_KEYS:
        _fail(f"{where}: unknown preset {preset!r}")
    _check_keys(spec, DATA_KEYS[preset] | {"preset"}, where)
    out = dict(spec)
    if preset == "gaussian":
        _num(spec, "width", where, default=1.0, positive=True)
    elif preset == "cosine_mode":
        k = spec.get("k", 1)
        ks = k if isinstance(k, list) else [k]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in ks):
            _fail(f"{where}.k: wavenumber index must be an integer (lattice xi = pi k / L)")
    elif preset == "delta_like":
        if spec.get("eps") != "sweep":
            _num(spec, "eps", where, positive=True)
    elif preset == "random_trig":
        _int(spec, "kmax", where, default=4)
    elif preset == "file":
        if "path" not in spec:
            _fail(f"{where}: missing 'path'")
        out["path"] = _resolve(spec["path"], base_dir)
    return out


def parse_config(doc: dict, base_dir=".") -> RunConfig:
    """Validate a config document and return a :class:`RunConfig`."""
    base_dir = Path(base_dir)
    _check_keys(doc, TOP_KEYS, "config")
    missing = REQUIRED - set(doc)
    if missing:
        _fail(f"config: missing keys {sorted(missing)}")
    g = doc["grid"]
    _check_keys(g, {"d", "N", "L"}, "grid")
    try:
        grid = Grid(_int(g, "d", "grid"), _int(g, "N", "grid"), _num(g, "L", "grid", positive=True))
    except ConfigError:
        raise
    except Exception as exc:
        _fail(f"grid: {exc}")
    s = _num(doc, "s", "config", positive=True)
    T = _num(doc, "T", "config", positive=True)
    dt = _num(doc, "dt", "config", positive=True)
    scheme = doc.get("scheme", "strang_split")
    if scheme not in ("strang_split", "leapfrog"):
        _fail(f"config.scheme: unknown scheme {scheme!r}")

    coefs = doc.get("coefficients", {})
    _check_keys(coefs, {"a", "b"}, "coefficients")
    coefs = {k: _check_coef(coefs.get(k, {"kind": "zero"}), f"coefficients.{k}", base_dir) for k in ("a", "b")}

    data = doc.get("data", {})
    _check_keys(data, {"u0", "u1"}, "data")
    data = {k: _check_data(data.get(k, {"preset": "zero"}), f"data.{k}", base_dir) for k in ("u0", "u1")}

    eps = None
    if "eps" in doc:
        eps = _num(doc, "eps", "config", positive=True)
        if eps > 1:
            _fail("config.eps must lie in (0, 1]")
    eps_list = doc.get("eps_list", [])
    if not isinstance(eps_list, list) or not all(
        isinstance(e, (int, float)) and not isinstance(e, bool) for e in eps_list
    ):
        _fail("config.eps_list: expected a list of numbers")
    eps_list = tuple(float(e) for e in eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        _fail("config.eps_list must be strictly decreasing")
    if any(not 0 < e <= 1 for e in eps_list):
        _fail("config.eps_list entries must lie in (0, 1]")

    stride = _int(doc, "stride", "config", default=10)
    if stride < 1:
        _fail("config.stride must be >= 1")
    snapshots = _int(doc, "snapshots", "config", default=0)
    seed = _int(doc, "seed", "config", default=0)
    output = doc.get("output", "out")
    if not isinstance(output, str):
        _fail("config.output must be a string")

    source = None
    if "source" in doc:
        src = doc["source"]
        _check_keys(src, SOURCE_KEYS, "source")
        if src.get("time", "constant") not in ("constant", "cos", "sin", "linear"):
            _fail("source.time must be one of constant, cos, sin, linear")
        _num(src, "omega", "source", default=1.0)
        source = dict(src)
        source["space"] = _check_data(src.get("space", {"preset": "zero"}), "source.space", base_dir)

    duh = doc.get("duhamel", {})
    _check_keys(duh, DUHAMEL_KEYS, "duhamel")
    duh = {"steps": tuple(duh.get("steps", (64, 128, 256))), "nodes": tuple(duh.get("nodes", (9, 17, 33)))}
    for key in ("steps", "nodes"):
        if not all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in duh[key]):
            _fail(f"duhamel.{key}: expected positive integers")
        if len(duh[key]) < 2:
            _fail(f"duhamel.{key}: need at least two refinement levels")
    if min(duh["nodes"]) < 3:
        _fail(f"duhamel.nodes: quadrature needs M >= 3, got {min(duh['nodes'])}")

    neg = doc.get("negligibility", {})
    _check_keys(neg, NEGL_KEYS, "negligibility")
    neg = dict(neg)
    neg.setdefault("perturbation", "exp")
    if neg["perturbation"] not in PERTURBATIONS:
        _fail(f"negligibility.perturbation must be one of {sorted(PERTURBATIONS)}")
    neg["targets"] = tuple(neg.get("targets", ["a"]))
    if not neg["targets"] or not set(neg["targets"]) <= {"a", "b", "u0", "u1"}:
        _fail("negligibility.targets must be a nonempty subset of ['a', 'b', 'u0', 'u1']")
    neg["k"] = _num(neg, "k", "negligibility", default=5.0)
    neg["threshold_eps"] = _num(neg, "threshold_eps", "negligibility", default=2.0**-5, positive=True)

    return RunConfig(
        grid=grid,
        s=s,
        T=T,
        dt=dt,
        scheme=scheme,
        coefficients=coefs,
        eps=eps,
        data=data,
        eps_list=eps_list,
        stride=stride,
        output=output,
        seed=seed,
        source=source,
        duhamel=duh,
        negligibility=neg,
        snapshots=snapshots,
        regularize_data=bool(doc.get("regularize_data", False)),
        base_dir=base_dir,
    )


# --------------------------------------------------------------------------- #
# builders
# --------------------------------------------------------------------------- #

def _read_field(path, grid):
    from .io import read_fwf

    f, _ = read_fwf(path)
    if f.grid != grid:
        _fail(f"{path}: grid {f.grid} does not match config grid {grid}")
    return f


def _r2(grid, center):
    if center is None:
        return grid.r2
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.d,))
    return sum((xi - ci) ** 2 for xi, ci in zip(grid.x, c))


def is_eps_dependent(spec: dict) -> bool:
    return spec["kind"] in ("delta", "delta_squared", "mollified")


def build_coefficient(spec: dict, grid: Grid, eps: float | None = None) -> Field:
    """Evaluate a coefficient spec; eps-dependent kinds need ``eps``."""
    kind = spec["kind"]
    if is_eps_dependent(spec) and eps is None:
        _fail(f"coefficient kind {kind!r} needs 'eps' (or an eps_list)")
    if kind == "zero":
        return grid.zeros()
    if kind == "constant":
        return grid.constant(float(spec["value"]))
    if kind == "cosine":
        arg = sum(grid.x) * (math.pi * float(spec.get("k", 1.0)) / grid.L) + float(spec.get("phase", 0.0))
        vals = float(spec["mean"]) + float(spec.get("amplitude", 0.0)) * np.cos(arg)
        return Field(grid, np.maximum(vals, 0.0))
    if kind == "file":
        f = _read_field(spec["path"], grid)
        if f.values.min() < 0:
            _fail(f"{spec['path']}: coefficient must be nonnegative")
        return f
    center = spec.get("center")
    scale = float(spec.get("scale", 1.0))
    if kind == "delta":
        return scale * mollifying_net(None, eps, grid, center)
    if kind == "delta_squared":
        mollifying_net(None, eps, grid, center)
        prof = _continuum_alpha(grid.d) * bump(_r2(grid, center) / eps**2) / eps**grid.d
        return Field(grid, scale * prof**2)
    if kind == "mollified":
        return regularize(build_coefficient(spec["base"], grid), mollifying_net(None, eps, grid))
    _fail(f"unknown coefficient kind {kind!r}")


def build_net(cfg: RunConfig) -> CoefficientNet:
    """``eps -> (a_eps, b_eps)`` from the configured coefficient specs."""
    ca, cb = cfg.coefficients["a"], cfg.coefficients["b"]
    grid = cfg.grid

    def pair(eps):
        return build_coefficient(ca, grid, eps), build_coefficient(cb, grid, eps)

    kinds = {ca["kind"], cb["kind"]} - {"zero"}
    kind = kinds.pop() if len(kinds) == 1 else "custom"
    return CoefficientNet(kind, grid, pair, meta={"a": ca, "b": cb})


def build_data(spec: dict, grid: Grid, seed: int = 0, eps: float | None = None) -> Field:
    preset = spec["preset"]
    amp = float(spec.get("amplitude", 1.0))
    if preset == "zero":
        return grid.zeros()
    if preset == "gaussian":
        w = float(spec.get("width", 1.0))
        return Field(grid, amp * np.exp(-_r2(grid, spec.get("center")) / w**2))
    if preset == "cosine_mode":
        k = spec.get("k", 1)
        ks = k if isinstance(k, list) else [k] + [0] * (grid.d - 1)
        if len(ks) != grid.d:
            _fail(f"cosine_mode.k needs {grid.d} entries")
        arg = sum(ki * xi for ki, xi in zip(ks, grid.x)) * (math.pi / grid.L)
        return Field(grid, amp * np.cos(arg))
    if preset == "delta_like":
        e = spec["eps"]
        if e == "sweep":
            if eps is None:
                _fail("delta_like with eps='sweep' is only valid in sweeps")
            e = eps
        return float(spec.get("scale", 1.0)) * mollifying_net(None, float(e), grid, spec.get("center"))
    if preset == "random_trig":
        rng = np.random.default_rng(seed)
        kmax = int(spec.get("kmax", 4))
        decay = float(spec.get("decay", 1.0))
        arg = sum(grid.x) * (math.pi / grid.L)
        vals = np.zeros(grid.shape)
        for k in range(0, kmax + 1):
            ca, cb = rng.standard_normal(2) * (1.0 + k) ** (-decay)
            vals = vals + ca * np.cos(k * arg) + cb * np.sin(k * arg)
        return Field(grid, amp * vals)
    if preset == "file":
        return amp * _read_field(spec["path"], grid)
    _fail(f"unknown data preset {preset!r}")


def build_source(cfg: RunConfig):
    """Separable forcing ``g(t) * phi(x)`` from the ``source`` block."""
    from .duhamel import SourceTerm, zero_source

    src = cfg.source
    if src is None or src["space"]["preset"] == "zero":
        return zero_source()
    omega = float(src.get("omega", 1.0))
    law = src.get("time", "constant")
    time_fn: Callable[[float], float] = {
        "constant": lambda t: 1.0,
        "cos": lambda t: math.cos(omega * t),
        "sin": lambda t: math.sin(omega * t),
        "linear": lambda t: t,
    }[law]
    # filled up front so concurrent Duhamel solves only read it
    cache: dict[Any, Field] = {cfg.grid: build_data(src["space"], cfg.grid, cfg.seed + 1)}

    def evaluator(t, grid):
        if grid not in cache:
            cache[grid] = build_data(src["space"], grid, cfg.seed + 1)
        return time_fn(t) * cache[grid]

    return SourceTerm(evaluator, f"{law}(omega={omega}) x {src['space']['preset']}")
