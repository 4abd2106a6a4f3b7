"""Plot-data column files and their matplotlib renderings.

Each figure has a whitespace-separated ``.dat`` file (gnuplot-ready, ``#``
header) and a PNG drawn from exactly those columns.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .records import format_value  # noqa: E402

__all__ = ["FIGURES", "figure_columns", "write_plot_data", "render"]

_LEVEL = 1.0 / (2.0 * math.pi)

# name -> (y label, csv column mirrored, derived column builder)
FIGURES = {
    "entropy": ("entropy", "entropy", None),
    "hhalf": ("|u|^2 in H^1/2", "hhalf_sq", None),
    "linf_scaled": ("sqrt(pi t) max u", "linf", lambda r: math.sqrt(math.pi * r.time) * r.linf),
    "max_excess": ("max u - 1/(2 pi)", "linf", lambda r: r.linf - _LEVEL),
    "holder13": ("[u]_{1/3}", "holder_13", None),
}


def figure_columns(rec, name: str):
    """``(header, rows)`` for one figure; rows with a missing value are skipped."""
    ylabel, col, derived = FIGURES[name]
    header = ["time", col] + ([name] if derived else [])
    rows = []
    for r in rec.records:
        v = getattr(r, col)
        if v is None:
            continue
        row = [r.time, v]
        if derived:
            row.append(derived(r))
        rows.append(row)
    return header, rows


def _applies(rec, name: str) -> bool:
    torus = rec.domain["kind"] == "torus"
    if name == "linf_scaled":
        return not torus
    if name == "max_excess":
        return torus
    return True


def write_plot_data(rec, out_dir) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in FIGURES:
        if not _applies(rec, name):
            continue
        header, rows = figure_columns(rec, name)
        if not rows:
            continue
        p = out / f"{name}.dat"
        lines = [f"# {rec.scenario} ({rec.config_hash})", "# " + " ".join(header)]
        lines += [" ".join(format_value(v) for v in row) for row in rows]
        p.write_text("\n".join(lines) + "\n")
        written.append(p)
    return written


def render(rec, out_dir) -> List[Path]:
    """Draw one PNG per plot-data file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (ylabel, _, _) in FIGURES.items():
        if not _applies(rec, name):
            continue
        header, rows = figure_columns(rec, name)
        if len(rows) < 2:
            continue
        t = [row[0] for row in rows]
        y = [row[-1] for row in rows]
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        ax.plot(t, y, lw=1.2)
        if name == "linf_scaled":
            ax.axhline(1.0, color="0.5", ls="--", lw=0.8)
        if name == "max_excess" and min(y) > 0:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        ax.set_title(rec.scenario, fontsize=9)
        fig.tight_layout()
        p = out / f"{name}.png"
        fig.savefig(p, dpi=110)
        plt.close(fig)
        written.append(p)
    return written
