"""File formats shared by the command-line interface and its consumers.

Everything written here is byte-deterministic for fixed inputs:

* CSV — one header row, comma-separated cells, floats at 17 significant
  digits (round-trip exact for doubles), integers plain, newline-terminated.
* JSON — sorted keys, two-space indent, newline-terminated.
* binary containers — zip archives of ``.npy`` members with a fixed
  archive timestamp, loadable with ``numpy.load``.

A registry of CSV schemas documents every output column; the CLI writes it
next to its artifacts as ``schema.json`` so downstream tools can validate
headers.
"""

from __future__ import annotations

import csv
import io as _io
import json
import zipfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "parse_config_text",
    "load_config_file",
    "format_cell",
    "write_csv",
    "read_csv",
    "write_json",
    "save_container",
    "load_container",
    "SCHEMAS",
    "schema_header",
    "write_schema",
]


# ---------------------------------------------------------------------------
# Plain-text key = value configs.
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blanks skipped.

    Values keep internal commas/colons (used for pairs and lists).  Raises
    ValueError on malformed lines and duplicate keys.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        if key in out:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config_file(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# CSV.
# ---------------------------------------------------------------------------


def format_cell(value) -> str:
    """Fixed cell formatting: 17 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row width {len(row)} does not match header width {len(header)}")
        lines.append(",".join(format_cell(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[tuple[str, ...]]]:
    """Return (header, rows) with all cells as strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV (no header row)") from None
        rows = [tuple(r) for r in reader]
    return header, rows


# ---------------------------------------------------------------------------
# JSON.
# ---------------------------------------------------------------------------


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------
# Binary containers (deterministic zip-of-npy, numpy.load compatible).
# ---------------------------------------------------------------------------

_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed member timestamp -> stable bytes


def save_container(path: str | Path, **arrays: np.ndarray) -> Path:
    """Write named arrays to a zip of .npy members with fixed metadata.

    ``numpy.load`` opens the result like an ``.npz`` file.  Bytes depend
    only on the array names and contents.
    """
    if not arrays:
        raise ValueError("container needs at least one array")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = _io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arrays[name]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=_EPOCH), buf.getvalue())
    return path


def load_container(path: str | Path) -> dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as payload:
        return {name: payload[name] for name in payload.files}


# ---------------------------------------------------------------------------
# Output schemas.
# ---------------------------------------------------------------------------

SCHEMAS: Mapping[str, list[tuple[str, str]]] = {
    "simulate-series": [
        ("t", "checkpoint time"),
        ("energy", "discrete energy functional of (connection, scalar)"),
        ("besov_A", "max over components of the Besov proxy norm of the connection"),
        ("besov_phi", "Besov proxy norm of the scalar"),
        ("gaugeinv_A", "gauge-invariant proxy norm of the connection"),
        ("gaugeinv_phi", "gauge-invariant proxy norm of the scalar"),
    ],
    "gauge-check": [
        ("N", "noise mollification cutoff of the run pair"),
        ("exact_identity_gap", "sup-t distance of the transformed modified run from the conjugated-noise run"),
        ("covariance_gap", "sup-t gauge-quotient distance of the connection components, modified vs plain run"),
        ("cg", "gauge counterterm coefficient used"),
        ("seed", "noise seed shared by the run pair"),
    ],
    "resonance": [
        ("N", "mollification cutoff"),
        ("shift_1", "first component of the computed resonance shift"),
        ("shift_2", "second component of the computed resonance shift"),
        ("limit_1", "first component of the analytic large-N limit"),
        ("limit_2", "second component of the analytic large-N limit"),
        ("abs_err", "euclidean distance of the shift from its limit"),
    ],
    "kernel": [
        ("method", "kernel backend (pde, constant, fki)"),
        ("value_re", "real part of the kernel value"),
        ("value_im", "imaginary part of the kernel value"),
        ("std_err", "Monte Carlo standard error (0 for deterministic backends)"),
    ],
    "wick-table": [
        ("N", "mollification cutoff"),
        ("sigma_sq", "stationary renormalization variance at cutoff N"),
    ],
    "decay-report": [
        ("t", "checkpoint time"),
        ("gaugeinvA_gamma", "gauge-invariant norm of the connection minus its linear object, to the power gamma"),
        ("psi_Lr", "capped L^r norm of the scalar minus its linear object"),
        ("max_col", "max of the two decay columns"),
        ("window_id", "index of the window containing t (-1 if none)"),
    ],
}


def schema_header(kind: str) -> list[str]:
    if kind not in SCHEMAS:
        raise KeyError(f"unknown output kind {kind!r}; known: {sorted(SCHEMAS)}")
    return [name for name, _ in SCHEMAS[kind]]


def write_schema(directory: str | Path) -> Path:
    """Write the full column documentation as ``schema.json``."""
    doc = {
        kind: {"columns": [{"name": n, "description": d} for n, d in cols]}
        for kind, cols in SCHEMAS.items()
    }
    return write_json(Path(directory) / "schema.json", doc)
