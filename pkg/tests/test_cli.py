"""CLI tests: config layering, exit codes, artifacts, byte determinism."""

from __future__ import annotations

import json

import numpy as np
import pytest

from ahlab.cli import ConfigError, _resolve_keys, run
from ahlab.io import load_container, read_csv, schema_header
from ahlab.resonance import COUNTERTERM
from ahlab.wick import sigma_squared


# ---------------------------------------------------------------------------
# Configuration resolution (pure function, no artifacts).
# ---------------------------------------------------------------------------


def test_precedence_flag_over_env_over_file_over_default(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("M = 16\nN = 4\ndt = 1e-3\nT = 0.01\nq = 7\nseed = 11\n")
    env = {"AHLAB_Q": "5", "AHLAB_CG": "0.25"}
    keys = _resolve_keys("simulate", {"q": "3"}, str(cfg), env)
    assert keys["q"] == 3          # flag beats env and file
    assert keys["cg"] == 0.25      # env beats default
    assert keys["seed"] == 11      # file beats default
    assert keys["output"] == ""    # default fills the rest
    assert keys["M"] == 16 and keys["dt"] == 1e-3


def test_missing_required_keys_listed_exhaustively():
    with pytest.raises(ConfigError) as err:
        _resolve_keys("simulate", {}, None, {})
    # all four missing keys appear in the one message
    assert "M, N, T, dt" in str(err.value)


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("M = 16\nbogus = 3\n")
    with pytest.raises(ConfigError) as err:
        _resolve_keys("simulate", {}, str(cfg), {})
    assert "bogus" in str(err.value)
    assert "known keys" in str(err.value)


def test_typed_parse_errors_are_config_errors():
    with pytest.raises(ConfigError) as err:
        _resolve_keys("simulate", {"M": "16", "N": "4", "dt": "abc", "T": "1"}, None, {})
    assert "dt" in str(err.value)
    with pytest.raises(ConfigError):
        _resolve_keys("decay-report",
                      {"M": "16", "N": "4", "dt": "1e-3", "T": "0.01", "windows": "0.5:0.1"},
                      None, {})


# ---------------------------------------------------------------------------
# Exit codes.
# ---------------------------------------------------------------------------


def test_exit_zero_on_help_and_one_on_usage_error(capsys):
    assert run(["--help"]) == 0
    capsys.readouterr()
    assert run(["no-such-subcommand"]) == 1
    assert run([]) == 1  # no subcommand


def test_exit_one_on_missing_keys(capsys):
    assert run(["simulate"]) == 1
    err = capsys.readouterr().err
    assert "missing required config keys" in err
    assert "M, N, T, dt" in err


def test_exit_one_on_validation_failure(tmp_path, capsys):
    # kernel needs s < t: a query problem is a validation failure, not an abort
    code = run(["kernel", "--M", "16", "--s", "0.5", "--t", "0.2",
                "--out", str(tmp_path / "k")])
    assert code == 1
    assert "s < t" in capsys.readouterr().err


def test_exit_one_on_bad_threads(tmp_path):
    assert run(["wick-table", "--N", "1", "--threads", "0",
                "--out", str(tmp_path / "w")]) == 1


def test_exit_two_on_blowup(tmp_path, capsys):
    # a deliberately unstable explicit step: the cubic overshoots within a
    # few iterations and the ceiling guard aborts
    code = run(["simulate", "--M", "16", "--N", "4", "--dt", "1", "--T", "300",
                "--out", str(tmp_path / "b")])
    assert code == 2
    assert "numerical abort" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Artifacts: schema-conformant CSV, manifests, containers, determinism.
# ---------------------------------------------------------------------------


SIM_ARGS = ["--M", "8", "--N", "2", "--dt", "1e-3", "--T", "0.01", "--seed", "3"]


def test_simulate_outputs_match_schema(tmp_path, capsys):
    out = tmp_path / "sim"
    assert run(["simulate", *SIM_ARGS, "--out", str(out)]) == 0
    header, rows = read_csv(out / "series.csv")
    assert list(header) == list(schema_header("simulate-series"))
    assert len(rows) >= 2
    assert float(rows[0][0]) == 0.0  # series starts at t = 0
    # one checkpoint container per series row, loadable by plain numpy
    manifest = json.loads((out / "manifest.json").read_text())
    names = manifest["outputs"]["checkpoints"]
    assert len(names) == len(rows)
    state = load_container(out / names[-1])
    assert state["a"].shape == (2, 8, 8)
    assert state["phi"].shape == (8, 8)
    assert state["t"].shape == ()
    # manifest echoes the resolved config including defaulted keys
    assert manifest["config"]["q"] == 3
    assert manifest["config"]["seed"] == 3
    assert manifest["subcommand"] == "simulate"
    # a schema file documents the output columns
    schema = json.loads((out / "schema.json").read_text())
    assert [c["name"] for c in schema["simulate-series"]["columns"]] == list(header)


def test_simulate_byte_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(["simulate", *SIM_ARGS, "--out", str(out1)]) == 0
    assert run(["simulate", *SIM_ARGS, "--out", str(out2)]) == 0
    assert (out1 / "series.csv").read_bytes() == (out2 / "series.csv").read_bytes()
    ck1 = sorted(p.name for p in (out1 / "checkpoints").iterdir())
    ck2 = sorted(p.name for p in (out2 / "checkpoints").iterdir())
    assert ck1 == ck2
    for name in ck1:
        assert (out1 / "checkpoints" / name).read_bytes() == \
            (out2 / "checkpoints" / name).read_bytes()
    # manifests agree except for the created timestamp
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    m1.pop("created"), m2.pop("created")
    m1["argv"][m1["argv"].index(str(out1))] = "OUT"
    m2["argv"][m2["argv"].index(str(out2))] = "OUT"
    assert m1 == m2


def test_csv_floats_use_seventeen_significant_digits(tmp_path, capsys):
    out = tmp_path / "sim"
    assert run(["simulate", *SIM_ARGS, "--out", str(out)]) == 0
    text = (out / "series.csv").read_text()
    assert "0.0030000000000000001" in text  # repr-exact time column


def test_resonance_example_invocation(tmp_path, capsys):
    out = tmp_path / "res"
    assert run(["resonance", "--n0", "1,0", "--N", "4,8,16", "--out", str(out)]) == 0
    header, rows = read_csv(out / "resonance.csv")
    assert list(header) == list(schema_header("resonance"))
    errs = [float(r[5]) for r in rows]
    assert errs == sorted(errs, reverse=True)  # converging in N
    assert errs[-1] < 6e-4
    assert float(rows[-1][3]) == pytest.approx(-COUNTERTERM, rel=1e-15)
    assert float(rows[-1][1]) == pytest.approx(-COUNTERTERM, rel=2e-2)


def test_wick_table_values(tmp_path, capsys):
    out = tmp_path / "wick"
    assert run(["wick-table", "--N", "1,2,4", "--out", str(out)]) == 0
    header, rows = read_csv(out / "wick_table.csv")
    assert list(header) == list(schema_header("wick-table"))
    assert float(rows[0][1]) == pytest.approx(sigma_squared(1.0), rel=1e-15)
    assert float(rows[0][1]) == pytest.approx(3.0 / (8 * np.pi**2), rel=1e-12)


def test_kernel_backends_agree(tmp_path, capsys):
    out = tmp_path / "kern"
    assert run(["kernel", "--M", "32", "--b", "0.5,-0.25", "--t", "0.1",
                "--x", "4,4", "--dt", "2e-3", "--out", str(out)]) == 0
    header, rows = read_csv(out / "kernel.csv")
    assert list(header) == list(schema_header("kernel"))
    methods = [r[0] for r in rows]
    assert methods == ["constant", "pde"]
    exact = complex(float(rows[0][1]), float(rows[0][2]))
    pde = complex(float(rows[1][1]), float(rows[1][2]))
    assert abs(exact) > 1e-4  # the default query probes a non-trivial value
    assert abs(pde - exact) < 1e-3


def test_gauge_check_table(tmp_path, capsys):
    out = tmp_path / "gc"
    assert run(["gauge-check", "--M", "8", "--N", "2,4", "--dt", "1e-3",
                "--T", "5e-3", "--data_band", "2", "--data_scale", "0.5",
                "--out", str(out)]) == 0
    header, rows = read_csv(out / "gauge_check.csv")
    assert list(header) == list(schema_header("gauge-check"))
    assert [float(r[0]) for r in rows] == [2.0, 4.0]
    for r in rows:
        assert float(r[1]) < 1e-2          # identity gap small at dt = 1e-3
        assert float(r[3]) == pytest.approx(COUNTERTERM, rel=1e-15)
        assert float(r[4]) == 0.0


def test_decay_report_outputs(tmp_path, capsys):
    out = tmp_path / "decay"
    assert run(["decay-report", "--M", "8", "--N", "2", "--dt", "1e-3",
                "--T", "0.02", "--windows", "0:0.01,0.01:0.02",
                "--out", str(out)]) == 0
    header, rows = read_csv(out / "decay_report.csv")
    assert list(header) == list(schema_header("decay-report"))
    assert float(rows[0][3]) == 0.0  # zero initial data: columns start at 0
    window_ids = {r[4] for r in rows}
    assert window_ids <= {"0", "1"}
    manifest = json.loads((out / "manifest.json").read_text())
    results = manifest["results"]
    assert set(results) >= {"flagged_windows", "r_used", "gamma", "peak_max_col"}
    assert results["r_used"] == 8.0


def test_selftest_passes_and_prints_counts(tmp_path, capsys):
    assert run(["selftest", "--M", "16", "--out", str(tmp_path / "st")]) == 0
    out = capsys.readouterr().out
    assert "0 failed" in out
    assert out.count("PASS") == 13
    assert "FAIL" not in out


def test_config_file_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(
        "# small smoke run\nM = 8\nN = 2\ndt = 1e-3\nT = 0.005\nseed = 1\n"
        f"output = {tmp_path / 'from_file'}\n"
    )
    assert run(["simulate", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_file" / "series.csv").exists()


def test_env_overrides_apply(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("AHLAB_N", "1,2")
    out = tmp_path / "wick_env"
    assert run(["wick-table", "--out", str(out)]) == 0
    _, rows = read_csv(out / "wick_table.csv")
    assert [float(r[0]) for r in rows] == [1.0, 2.0]
