"""Render sweep CSVs into the standard figure set.

The input is the simulator's published CSV schema (comment block, fixed header,
one aggregate row per architecture/strategy/sweep value).  Each figure id maps
to one (x, y) pairing with fixed axis scales; one curve per (architecture,
strategy) with error bars where a stderr column applies.  Empty cells become
gaps in the curve, never interpolated points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = (
    "architecture",
    "strategy",
    "M",
    "N",
    "Q",
    "J",
    "K",
    "L",
    "sweep_param",
    "sweep_value",
    "trials_ok",
    "trials_failed",
    "mean_rate_bpshz",
    "stderr_rate",
    "mean_ptot_mw",
    "mean_ee_bits_per_joule",
    "mean_bnorm_sq",
    "mean_cond_T",
)


class FigureError(ValueError):
    """Unusable input: unknown figure id or missing CSV columns."""


def _to_dbm(mw: float) -> float:
    return 10 * math.log10(mw) if mw > 0 else math.nan


@dataclass(frozen=True)
class FigureDef:
    y_column: str
    x_label: str
    y_label: str
    log_x: bool = False
    log_y: bool = False
    with_errorbars: bool = False
    transform: object = None  # applied to the y column cell by cell


FIGURES: dict[str, FigureDef] = {
    "fig5": FigureDef(
        "mean_rate_bpshz",
        "number of transmit antennas M",
        "spectral efficiency (bits/s/Hz)",
        log_x=True,
        with_errorbars=True,
    ),
    "fig6": FigureDef(
        "mean_rate_bpshz",
        "number of transmit antennas M",
        "spectral efficiency (bits/s/Hz)",
        log_x=True,
        with_errorbars=True,
    ),
    "fig7a": FigureDef(
        "mean_cond_T",
        "ring radius R_r (m)",
        "condition number of T",
        log_y=True,
    ),
    "fig7b": FigureDef(
        "mean_cond_T",
        "feed distance R_d (m)",
        "condition number of T",
        log_y=True,
    ),
    "fig8a": FigureDef(
        "mean_rate_bpshz",
        "number of transmit antennas M",
        "spectral efficiency (bits/s/Hz)",
        log_x=True,
        with_errorbars=True,
    ),
    "fig8b": FigureDef(
        "mean_ptot_mw",
        "number of transmit antennas M",
        "total consumed power (dBm)",
        log_x=True,
        transform=_to_dbm,
    ),
    "fig8c": FigureDef(
        "mean_ee_bits_per_joule",
        "number of transmit antennas M",
        "energy efficiency (bits/joule)",
        log_x=True,
        log_y=True,
    ),
    "fig9": FigureDef(
        "mean_rate_bpshz",
        "number of lens feed antennas K",
        "spectral efficiency (bits/s/Hz)",
        with_errorbars=True,
    ),
    "fig10": FigureDef(
        "mean_rate_bpshz",
        "number of channel paths L",
        "spectral efficiency (bits/s/Hz)",
        with_errorbars=True,
    ),
}


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    inputs: tuple[str, ...]
    output: str

    def __post_init__(self):
        if self.figure_id not in FIGURES:
            raise FigureError(
                f"unknown figure id {self.figure_id!r}; "
                f"known: {', '.join(sorted(FIGURES))}"
            )
        if not self.inputs:
            raise FigureError("at least one input CSV is required")


def read_rows(path: str) -> list[dict]:
    """Parse one result CSV; comment lines are skipped, the header is checked."""
    with open(path, newline="") as fh:
        data_lines = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(data_lines)
    missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or ())]
    if missing:
        raise FigureError(f"{path} lacks required columns: {', '.join(missing)}")
    return list(reader)


def _cell(row: dict, column: str) -> float:
    text = row[column].strip()
    if text == "":
        return math.nan
    return float(text)


def curves(rows: list[dict], y_column: str, transform=None):
    """Group rows into {(architecture, strategy): (x, y, yerr)} sorted by x."""
    grouped: dict[tuple[str, str], list] = {}
    for row in rows:
        key = (row["architecture"], row["strategy"])
        x = _cell(row, "sweep_value")
        y = _cell(row, y_column)
        if transform is not None and not math.isnan(y):
            y = transform(y)
        err = _cell(row, "stderr_rate")
        grouped.setdefault(key, []).append((x, y, err))
    out = {}
    for key, pts in grouped.items():
        pts.sort(key=lambda p: p[0])
        arr = np.array(pts, dtype=float)
        out[key] = (arr[:, 0], arr[:, 1], arr[:, 2])
    return out


def render(spec: FigureSpec) -> str:
    """Draw the figure and write the image file; returns the output path."""
    fig_def = FIGURES[spec.figure_id]
    rows: list[dict] = []
    for path in spec.inputs:
        rows.extend(read_rows(path))
    series = curves(rows, fig_def.y_column, fig_def.transform)
    if not series:
        raise FigureError("no data rows found in the input CSVs")

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=150)
    for (arch, strategy), (x, y, err) in sorted(series.items()):
        label = f"{arch}/{strategy}" if strategy else (arch or strategy)
        if fig_def.with_errorbars and np.any(np.isfinite(err)):
            ax.errorbar(x, y, yerr=err, marker="o", capsize=2, label=label)
        else:
            ax.plot(x, y, marker="o", label=label)
    if fig_def.log_x:
        ax.set_xscale("log", base=2)
    if fig_def.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(fig_def.x_label)
    ax.set_ylabel(fig_def.y_label)
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)
    return spec.output
