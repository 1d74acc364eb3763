import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracwave.config import build_coefficient, build_data, build_net, build_source, parse_config
from fracwave.errors import ConfigError, FormatError
from fracwave.grid import Field, Grid
from fracwave.io import format_float, read_csv, read_fwf, read_verdict, write_csv, write_fwf, write_verdict

BASE = {"grid": {"d": 1, "N": 64, "L": 3.141592653589793}, "s": 0.5, "T": 1.0, "dt": 0.01}


def cfg(**kw):
    doc = json.loads(json.dumps(BASE))
    doc.update(kw)
    return doc


@pytest.mark.parametrize("d,N", [(1, 16), (2, 8), (3, 4)])
def test_fwf_round_trip(tmp_path, rng, d, N):
    g = Grid(d, N, 1.25)
    f = Field(g, rng.standard_normal(g.shape))
    write_fwf(tmp_path / "f.fwf", f, 0.75)
    back, t = read_fwf(tmp_path / "f.fwf")
    assert back.grid == g and t == 0.75
    assert np.array_equal(back.values, f.values)


def test_fwf_layout(tmp_path):
    g = Grid(2, 4, 1.0)
    f = Field(g, np.arange(16.0).reshape(4, 4))
    write_fwf(tmp_path / "f.fwf", f, 2.0)
    raw = (tmp_path / "f.fwf").read_bytes()
    assert raw[:4] == b"FWF1"
    assert struct.unpack_from("<II", raw, 4) == (1, 2)
    assert struct.unpack_from("<2Q", raw, 12) == (4, 4)
    assert struct.unpack_from("<2d", raw, 28) == (1.0, 1.0)
    assert struct.unpack_from("<d", raw, 44) == (2.0,)
    assert struct.unpack_from("<3d", raw, 52) == (0.0, 1.0, 2.0)  # row-major
    assert len(raw) == 52 + 16 * 8


@pytest.mark.parametrize("mangle", [lambda r: b"XXXX" + r[4:], lambda r: r[:-8], lambda r: r[:10], lambda r: r[:4] + struct.pack("<I", 2) + r[8:]])
def test_fwf_malformed(tmp_path, mangle):
    g = Grid(1, 8, 1.0)
    write_fwf(tmp_path / "f.fwf", g.constant(1.0))
    (tmp_path / "f.fwf").write_bytes(mangle((tmp_path / "f.fwf").read_bytes()))
    with pytest.raises(FormatError):
        read_fwf(tmp_path / "f.fwf")


@given(x=st.floats(allow_nan=False))
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


def test_csv_round_trip(tmp_path):
    rows = [[0.1, 1 / 3, 1e-300], [np.pi, -2.5, float("nan")]]
    write_csv(tmp_path / "x.csv", ("a", "b", "c"), rows)
    h, v = read_csv(tmp_path / "x.csv")
    assert h == ("a", "b", "c")
    assert v[0, 1] == 1 / 3 and v[1, 0] == np.pi and np.isnan(v[1, 2])
    text = (tmp_path / "x.csv").read_text().splitlines()
    assert text[1].split(",")[1] == "0.33333333333333331"


def test_csv_ragged(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1\n")
    with pytest.raises(FormatError):
        read_csv(tmp_path / "x.csv")


def test_verdict_nan_to_null(tmp_path):
    write_verdict(tmp_path / "v.json", {"study": "s", "pass": True, "metrics": {"x": float("nan")}, "thresholds": {}, "paper_ref": "r"})
    assert read_verdict(tmp_path / "v.json")["metrics"]["x"] is None
    with pytest.raises(FormatError):
        write_verdict(tmp_path / "v.json", {"study": "s"})


def test_parse_minimal():
    c = parse_config(cfg())
    assert c.grid == Grid(1, 64, np.pi) and c.stride == 10
    assert c.coefficients["a"] == {"kind": "zero"}


@pytest.mark.parametrize(
    "doc",
    [
        cfg(bogus=1),
        cfg(grid={"d": 1, "N": 60, "L": 1.0}),
        cfg(grid={"d": 1, "N": 64, "L": 1.0, "x": 0}),
        cfg(s=-1),
        cfg(dt="fast"),
        cfg(eps_list=[0.1, 0.2]),
        cfg(eps_list=[2.0, 0.5]),
        cfg(coefficients={"a": {"kind": "cosine", "mean": 0.1, "amplitude": 0.5}}),
        cfg(coefficients={"a": {"kind": "delta", "width": 1}}),
        cfg(coefficients={"c": {"kind": "zero"}}),
        cfg(data={"u0": {"preset": "cosine_mode", "k": 1.5}}),
        cfg(data={"u0": {"preset": "file", "path": "/nonexistent.fwf"}}),
        cfg(duhamel={"nodes": [2, 3]}),
        cfg(negligibility={"perturbation": "cubic"}),
        cfg(negligibility={"targets": ["c"]}),
        cfg(scheme="euler"),
        {"grid": {"d": 1, "N": 8, "L": 1.0}},
    ],
)
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_build_coefficients():
    c = parse_config(cfg(coefficients={"a": {"kind": "delta"}, "b": {"kind": "cosine", "mean": 1.0, "amplitude": 1.0}}, eps=0.5))
    a, b = build_net(c)(0.5)
    assert a.grid.cell_volume * a.values.sum() == pytest.approx(1.0)
    assert b.values.min() >= 0 and b.values.max() == pytest.approx(2.0, rel=1e-3)
    with pytest.raises(ConfigError):
        build_coefficient(c.coefficients["a"], c.grid)


def test_mollified_kind():
    c = parse_config(cfg(coefficients={"a": {"kind": "mollified", "base": {"kind": "constant", "value": 3.0}}}))
    a = build_coefficient(c.coefficients["a"], c.grid, 0.5)
    assert np.allclose(a.values, 3.0)


def test_data_presets(tmp_path):
    g = Grid(1, 64, np.pi)
    write_fwf(tmp_path / "u.fwf", g.constant(4.0))
    c = parse_config(cfg(data={"u0": {"preset": "file", "path": "u.fwf"}, "u1": {"preset": "cosine_mode", "k": 2}}), base_dir=tmp_path)
    assert np.allclose(build_data(c.data["u0"], g).values, 4.0)
    assert np.allclose(build_data(c.data["u1"], g).values, np.cos(2 * g.x[0]))
    dl = build_data({"preset": "delta_like", "eps": "sweep"}, g, eps=0.5)
    assert dl.grid.cell_volume * dl.values.sum() == pytest.approx(1.0)
    r1 = build_data({"preset": "random_trig", "kmax": 3}, g, seed=5)
    r2 = build_data({"preset": "random_trig", "kmax": 3}, g, seed=5)
    assert np.array_equal(r1.values, r2.values)


def test_source_builder():
    c = parse_config(cfg(source={"time": "cos", "omega": 2.0, "space": {"preset": "cosine_mode", "k": 1}}))
    f = build_source(c)
    assert np.allclose(f(0.5, c.grid).values, np.cos(1.0) * np.cos(c.grid.x[0]))
    assert build_source(parse_config(cfg())).is_zero
