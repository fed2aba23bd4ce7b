import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from graphelastic import io
from graphelastic.graph import PAPER_LAPLACIAN, build_graph
from graphelastic.homogenization import build_dataset
from graphelastic.microstructure import generate_polycrystal
from graphelastic.nn import Architecture, Normalization, init_params


def test_graph_round_trip(tmp_path):
    g = build_graph(5, [(0, 1), (1, 2), (2, 3), (2, 4), (3, 4)])
    io.write_graph(g, tmp_path / "g.graph")
    assert io.read_graph(tmp_path / "g.graph") == g


def test_graph_parse_errors(tmp_path):
    p = tmp_path / "bad.graph"
    p.write_text("e 0 1\n")
    with pytest.raises(io.FormatError):
        io.read_graph(p)
    p.write_text("n 2\nx 0 1\n")
    with pytest.raises(io.FormatError):
        io.read_graph(p)


def test_polycrystal_round_trip(tmp_path):
    p = generate_polycrystal(3, 7, (6, 5, 4))
    io.write_polycrystal(p, tmp_path / "a.pxtl")
    q = io.read_polycrystal(tmp_path / "a.pxtl")
    assert q.grid == p.grid and q.seed == p.seed
    np.testing.assert_array_equal(q.labels, p.labels)
    np.testing.assert_array_equal(q.orientations, p.orientations)


def test_polycrystal_rejects_corruption(tmp_path):
    p = generate_polycrystal(3, 4, (4, 4, 4))
    path = tmp_path / "a.pxtl"
    io.write_polycrystal(p, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(io.FormatError):
        io.read_polycrystal(path)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(io.FormatError):
        io.read_polycrystal(path)


def test_dataset_round_trip_bitwise(tmp_path):
    ds = build_dataset([generate_polycrystal(s, 3, (5, 5, 5)) for s in range(2)], 4, seed=2)
    io.write_dataset(ds, tmp_path / "d.csv")
    back = io.read_dataset(tmp_path / "d.csv")
    for a, b in ((ds.rve_id, back.rve_id), (ds.C, back.C), (ds.psi, back.psi), (ds.S, back.S)):
        np.testing.assert_array_equal(a, b)
    assert back.meta == ds.meta
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == ",".join(io.DATASET_HEADER)


def test_dataset_bad_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(io.FormatError):
        io.read_dataset(p)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(1, 20), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_float_format_round_trips(x):
    assert all(float(io.FLOAT_FMT % v) == v for v in x)


def _params(mode=None):
    arch = Architecture(n_max=5, gcn_channels=(3, 2), encoder_hidden=(4,), encoded_dim=2, mlp_hidden=(5,),
                        **({"propagation_mode": mode} if mode else {}))
    p = init_params(arch, 4)
    p.norm = Normalization(np.arange(6) * 0.1, np.ones(6) * 0.3, 0.2, 3.0)
    return p


def test_checkpoint_round_trip(tmp_path):
    p = _params()
    io.save_checkpoint(p, tmp_path / "m.ckpt", {"note": 1})
    q = io.load_checkpoint(tmp_path / "m.ckpt", expected=p.arch)
    assert q.arch == p.arch
    for k in p.weights:
        np.testing.assert_array_equal(q.weights[k], p.weights[k])
    np.testing.assert_array_equal(q.norm.c_shift, p.norm.c_shift)
    assert q.norm.psi_scale == p.norm.psi_scale
    assert io.read_checkpoint_header(tmp_path / "m.ckpt")["extra"] == {"note": 1}


def test_checkpoint_truncated(tmp_path):
    path = tmp_path / "m.ckpt"
    io.save_checkpoint(_params(), path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(io.ChecksumError):
        io.load_checkpoint(path)


def test_checkpoint_modified(tmp_path):
    path = tmp_path / "m.ckpt"
    io.save_checkpoint(_params(), path)
    raw = bytearray(path.read_bytes())
    raw[-3] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(io.ChecksumError):
        io.load_checkpoint(path)


def test_checkpoint_architecture_mismatch(tmp_path):
    path = tmp_path / "m.ckpt"
    io.save_checkpoint(_params(PAPER_LAPLACIAN), path)
    with pytest.raises(io.ArchitectureMismatchError, match="propagation_mode"):
        io.load_checkpoint(path, expected=_params().arch)


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_text("hello\n")
    with pytest.raises(io.FormatError):
        io.load_checkpoint(path)


def test_rows_and_ecdf(tmp_path):
    io.write_rows([{"a": 1, "b": 0.1}], tmp_path / "r.csv")
    io.write_rows([{"a": 2, "b": 0.2}], tmp_path / "r.csv", mode="a")
    rows = io.read_rows(tmp_path / "r.csv")
    assert [r["a"] for r in rows] == ["1", "2"] and float(rows[0]["b"]) == 0.1
    io.write_ecdf([3.0, 1.0, 2.0, 2.0], tmp_path / "e.csv")
    e = io.read_rows(tmp_path / "e.csv")
    assert [(float(r["mse"]), float(r["F"])) for r in e] == [(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]
    with pytest.raises(ValueError):
        io.write_rows([], tmp_path / "x.csv")
