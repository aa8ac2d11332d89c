"""Figure kinds, CSV validation, and deterministic rendering.

Every kind declares the exact CSV header it accepts; a file whose header
differs is refused before any output is opened.  Rendering is deterministic:
fixed inputs and options produce byte-identical image files (SVG text is
kept as text, hash salts and timestamps are pinned).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

COUNTERTERM = 1.0 / (8.0 * np.pi)           # resonance asymptote, ~0.0397887
DOUBLING_SLOPE = np.log(2.0) / (4.0 * np.pi)  # variance growth per doubling

# The CSV contract with the producer: one header per figure kind.
EXPECTED_HEADERS: dict[str, tuple[str, ...]] = {
    "resonance-convergence": ("N", "shift_1", "shift_2", "limit_1", "limit_2", "abs_err"),
    "gauge-overlay": ("N", "exact_identity_gap", "covariance_gap", "cg", "seed"),
    "decay-series": ("t", "gaugeinvA_gamma", "psi_Lr", "max_col", "window_id"),
    "variance-growth": ("N", "sigma_sq"),
}

KINDS = tuple(EXPECTED_HEADERS)

_RC = {
    "svg.hashsalt": "plotkit",   # stable element ids
    "svg.fonttype": "none",      # keep labels as searchable text
    "figure.autolayout": True,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


@dataclass
class FigureSpec:
    """One figure request: input CSVs, kind, output path, axis options."""

    inputs: list[str]
    kind: str
    output: str
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None
    logx: bool | None = None     # override the kind's default scale
    logy: bool | None = None
    figsize: tuple[float, float] = (6.4, 4.4)
    dpi: int = 120
    labels: list[str] = field(default_factory=list)  # per-input legend labels

    def __post_init__(self) -> None:
        if isinstance(self.inputs, (str, Path)):
            self.inputs = [str(self.inputs)]
        self.inputs = [str(p) for p in self.inputs]
        if self.kind not in EXPECTED_HEADERS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; known kinds: {', '.join(KINDS)}"
            )
        if not self.inputs:
            raise ValueError("need at least one input CSV")
        if self.labels and len(self.labels) != len(self.inputs):
            raise ValueError(
                f"{len(self.labels)} labels for {len(self.inputs)} inputs"
            )


def read_table(path: str | Path, kind: str) -> dict[str, np.ndarray]:
    """Read one CSV and validate its header against the kind's contract.

    String columns (e.g. window ids) come back as float arrays only when the
    kind needs them numerically; everything here is numeric by contract.
    """
    expected = EXPECTED_HEADERS[kind]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty CSV (no header row)") from None
        if header != expected:
            raise ValueError(
                f"{path}: header {list(header)} does not match the "
                f"{kind} schema {list(expected)}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array([[float(cell) for cell in row] for row in rows], dtype=float)
    if data.shape[1] != len(expected):
        raise ValueError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(expected)}


def _legend_label(spec: FigureSpec, index: int) -> str:
    if spec.labels:
        return spec.labels[index]
    return Path(spec.inputs[index]).stem


def _counterterm_label(cg: float) -> str:
    if abs(cg) < 1e-15:
        return "counterterm off"
    if abs(cg - COUNTERTERM) <= 1e-9 * COUNTERTERM:
        return "counterterm 1/(8 pi)"
    return f"cg = {cg:.6g}"


# ---------------------------------------------------------------------------
# Per-kind axes painters.
# ---------------------------------------------------------------------------


def _paint_resonance(spec: FigureSpec, tables, fig) -> None:
    ax_err, ax_val = fig.subplots(1, 2)
    for i, tab in enumerate(tables):
        order = np.argsort(tab["N"])
        n = tab["N"][order]
        ax_err.loglog(n, tab["abs_err"][order], "o-", label=_legend_label(spec, i))
        ax_val.semilogx(n, np.abs(tab["shift_1"][order]), "o-",
                        label=_legend_label(spec, i))
    n_all = np.concatenate([t["N"] for t in tables])
    err_all = np.concatenate([t["abs_err"] for t in tables])
    n_lo, n_hi = float(n_all.min()), float(n_all.max())
    anchor = float(err_all[np.argmin(n_all)])
    guide = np.array([n_lo, n_hi])
    ax_err.loglog(guide, anchor * (n_lo / guide), "k--", alpha=0.6,
                  label="N^-1 guide")
    ax_err.set_xlabel(spec.xlabel or "cutoff N")
    ax_err.set_ylabel(spec.ylabel or "|shift - limit|")
    ax_err.legend(fontsize=8)
    ax_val.axhline(COUNTERTERM, color="k", linestyle=":",
                   label=f"1/(8 pi) = {COUNTERTERM:.7f}")
    ax_val.set_xlabel("cutoff N")
    ax_val.set_ylabel("|first shift component|")
    ax_val.legend(fontsize=8)


def _paint_gauge(spec: FigureSpec, tables, fig) -> None:
    ax = fig.subplots()
    for i, tab in enumerate(tables):
        order = np.argsort(tab["N"])
        label = _counterterm_label(float(tab["cg"][0])) if not spec.labels \
            else spec.labels[i]
        ax.loglog(tab["N"][order], tab["covariance_gap"][order], "o-", label=label)
    ax.set_xlabel(spec.xlabel or "cutoff N")
    ax.set_ylabel(spec.ylabel or "gauge-orbit discrepancy")
    ax.legend(fontsize=8)


def _paint_decay(spec: FigureSpec, tables, fig) -> None:
    ax = fig.subplots()
    many = len(tables) > 1
    for i, tab in enumerate(tables):
        order = np.argsort(tab["t"])
        t = tab["t"][order]
        stem = _legend_label(spec, i)
        alpha = 0.7 if many else 1.0
        ax.plot(t, tab["max_col"][order], "-", alpha=alpha,
                label=f"{stem}: max column" if many else "max column")
        if not many:
            ax.plot(t, tab["gaugeinvA_gamma"][order], "--",
                    label="connection norm^gamma")
            ax.plot(t, tab["psi_Lr"][order], ":", label="scalar L^r norm")
    ax.set_xlabel(spec.xlabel or "time")
    ax.set_ylabel(spec.ylabel or "restart-norm columns")
    ax.legend(fontsize=8)


def _paint_variance(spec: FigureSpec, tables, fig) -> None:
    ax = fig.subplots()
    for i, tab in enumerate(tables):
        order = np.argsort(tab["N"])
        n = tab["N"][order]
        s2 = tab["sigma_sq"][order]
        ax.semilogx(n, s2, "o-", base=2, label=_legend_label(spec, i))
    tab = tables[0]
    order = np.argsort(tab["N"])
    n = tab["N"][order]
    s2 = tab["sigma_sq"][order]
    guide = s2[-1] + DOUBLING_SLOPE * (np.log2(n) - np.log2(n[-1]))
    ax.semilogx(n, guide, "k--", base=2, alpha=0.6,
                label=f"slope log(2)/(4 pi) = {DOUBLING_SLOPE:.7f} per doubling")
    ax.set_xlabel(spec.xlabel or "cutoff N (log2 axis)")
    ax.set_ylabel(spec.ylabel or "variance sigma^2(N)")
    ax.legend(fontsize=8)


_PAINTERS = {
    "resonance-convergence": _paint_resonance,
    "gauge-overlay": _paint_gauge,
    "decay-series": _paint_decay,
    "variance-growth": _paint_variance,
}


def render(spec: FigureSpec) -> Path:
    """Validate the inputs, paint the figure, and write the image file.

    All validation happens before the output path is touched: a bad CSV
    never leaves a partial image behind.  Returns the output path.
    """
    tables = [read_table(p, spec.kind) for p in spec.inputs]
    out = Path(spec.output)
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=spec.figsize, dpi=spec.dpi)
        try:
            _PAINTERS[spec.kind](spec, tables, fig)
            if spec.title:
                fig.suptitle(spec.title)
            if spec.logx:
                for ax in fig.axes:
                    ax.set_xscale("log")
            if spec.logy:
                for ax in fig.axes:
                    ax.set_yscale("log")
            out.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out, metadata=_pinned_metadata(out.suffix))
        finally:
            plt.close(fig)
    return out


def _pinned_metadata(suffix: str) -> dict | None:
    """Strip run-dependent metadata so output bytes depend only on inputs."""
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".png":
        return {"Software": "plotkit"}
    if suffix == ".pdf":
        return {"CreationDate": None, "Producer": "plotkit", "Creator": "plotkit"}
    return None
