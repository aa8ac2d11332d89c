"""File-format tests: config parsing, CSV/JSON/container determinism."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahlab.io import (
    SCHEMAS,
    format_cell,
    load_container,
    parse_config_text,
    read_csv,
    save_container,
    schema_header,
    write_csv,
    write_json,
    write_schema,
)

# ---------------------------------------------------------------------------
# Config parsing.
# ---------------------------------------------------------------------------


def test_parse_config_basics():
    text = """
    # run parameters
    M = 64
    N = 8          # cutoff
    dt = 1e-4
    n0 = 1,0
    windows = 0:0.5,0.5:1.0
    """
    cfg = parse_config_text(text)
    assert cfg == {"M": "64", "N": "8", "dt": "1e-4", "n0": "1,0", "windows": "0:0.5,0.5:1.0"}


def test_parse_config_rejects_malformed():
    with pytest.raises(ValueError, match="line 1"):
        parse_config_text("just a word")
    with pytest.raises(ValueError, match="duplicate"):
        parse_config_text("a = 1\na = 2")
    with pytest.raises(ValueError, match="empty key"):
        parse_config_text("= 3")


# ---------------------------------------------------------------------------
# CSV.
# ---------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_cells_round_trip_exactly(x):
    assert float(format_cell(x)) == x


def test_cell_formats():
    assert format_cell(3) == "3"
    assert format_cell(np.int64(-7)) == "-7"
    assert format_cell(True) == "1"
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell("pde") == "pde"


def test_csv_write_read_and_determinism(tmp_path):
    header = ["N", "value"]
    rows = [(8, 0.125), (16, 1.0 / 3.0)]
    p1 = write_csv(tmp_path / "a.csv", header, rows)
    p2 = write_csv(tmp_path / "b.csv", header, rows)
    assert p1.read_bytes() == p2.read_bytes()
    got_header, got_rows = read_csv(p1)
    assert got_header == header
    assert [tuple(map(float, r)) for r in got_rows] == [(8.0, 0.125), (16.0, 1.0 / 3.0)]


def test_csv_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError, match="width"):
        write_csv(tmp_path / "bad.csv", ["a", "b"], [(1,)])


def test_read_csv_rejects_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_csv(p)


# ---------------------------------------------------------------------------
# JSON.
# ---------------------------------------------------------------------------


def test_json_deterministic_and_sorted(tmp_path):
    obj = {"b": 2, "a": {"z": [1, 2], "y": 0.5}}
    p1 = write_json(tmp_path / "x.json", obj)
    p2 = write_json(tmp_path / "y.json", obj)
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == obj


# ---------------------------------------------------------------------------
# Binary containers.
# ---------------------------------------------------------------------------


def test_container_round_trip_and_numpy_load(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((2, 8, 8))
    phi = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    path = save_container(tmp_path / "state.npz", a=a, phi=phi, t=np.array(0.25))
    back = load_container(path)
    assert set(back) == {"a", "phi", "t"}
    assert np.array_equal(back["a"], a)
    assert np.array_equal(back["phi"], phi)
    assert back["t"] == 0.25
    with np.load(path) as payload:  # plain numpy can open it too
        assert np.array_equal(payload["phi"], phi)


def test_container_bytes_deterministic(tmp_path):
    arr = np.linspace(0, 1, 37)
    p1 = save_container(tmp_path / "c1.npz", x=arr, y=arr**2)
    p2 = save_container(tmp_path / "c2.npz", y=arr**2, x=arr)  # kwarg order irrelevant
    assert p1.read_bytes() == p2.read_bytes()


def test_container_requires_arrays(tmp_path):
    with pytest.raises(ValueError):
        save_container(tmp_path / "none.npz")


# ---------------------------------------------------------------------------
# Schemas.
# ---------------------------------------------------------------------------


def test_schema_headers_match_registry():
    assert schema_header("decay-report") == [
        "t",
        "gaugeinvA_gamma",
        "psi_Lr",
        "max_col",
        "window_id",
    ]
    assert schema_header("simulate-series") == [
        "t",
        "energy",
        "besov_A",
        "besov_phi",
        "gaugeinv_A",
        "gaugeinv_phi",
    ]
    with pytest.raises(KeyError):
        schema_header("nope")


def test_schema_file_documents_every_kind(tmp_path):
    p = write_schema(tmp_path)
    doc = json.loads(p.read_text())
    assert set(doc) == set(SCHEMAS)
    for kind, cols in SCHEMAS.items():
        names = [c["name"] for c in doc[kind]["columns"]]
        assert names == [n for n, _ in cols]
        assert all(c["description"] for c in doc[kind]["columns"])
