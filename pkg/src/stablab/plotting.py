"""Deterministic SVG line charts of experiment summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import NullFormatter, NullLocator  # noqa: E402

from .errors import FormatError  # noqa: E402

PAD = 0.05
RC = {
    "svg.hashsalt": "stablab",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "figure.figsize": (6.0, 4.0),
}


@dataclass(frozen=True)
class PlotSpec:
    x_label: str = "factor"
    y_label: str = "mean"
    log_x: bool = False
    log_y: bool = False
    series: str = "mean"
    error: str = "std"
    title: str = ""


def read_summary(path, columns) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise FormatError(f"{path}: missing columns {', '.join(missing)}")
        rows = list(reader)
    try:
        return {c: [float(r[c]) if r[c] != "" else math.nan for r in rows] for c in columns}
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _padded(lo, hi, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    span = hi - lo
    if span == 0:
        span = abs(lo) if lo else 1.0
    lo, hi = lo - PAD * span, hi + PAD * span
    return (10 ** lo, 10 ** hi) if log else (lo, hi)


def _tick_label(v: float) -> str:
    return f"{v:g}"


def render_plot(summary_csv, out_svg, spec: PlotSpec = PlotSpec()) -> None:
    """Line chart of ``spec.series`` against ``factor`` with std error bars."""
    data = read_summary(summary_csv, ["factor", spec.series, spec.error])
    pts = [(x, y, e if math.isfinite(e) else 0.0)
           for x, y, e in zip(data["factor"], data[spec.series], data[spec.error]) if math.isfinite(y)]
    pts.sort()
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    es = [p[2] for p in pts]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        if pts:
            ax.errorbar(xs, ys, yerr=es, fmt="o-", color="#1f4e79", ecolor="#555555", capsize=3, lw=1.5)
        if spec.log_x:
            ax.set_xscale("log")
        if spec.log_y:
            ax.set_yscale("log")
        if pts:
            if spec.log_x and min(xs) <= 0:
                raise FormatError("log x axis needs positive factor values")
            ax.set_xlim(*_padded(min(xs), max(xs), spec.log_x))
            lows = [y - e for y, e in zip(ys, es)]
            highs = [y + e for y, e in zip(ys, es)]
            if spec.log_y:
                lows = [v if v > 0 else y for v, y in zip(lows, ys)]
                if min(lows) <= 0:
                    raise FormatError("log y axis needs positive values")
            ax.set_ylim(*_padded(min(lows), max(highs), spec.log_y))
            # ticks exactly at the grid values
            ax.set_xticks(xs)
            ax.set_xticklabels([_tick_label(x) for x in xs])
            if spec.log_x:
                ax.xaxis.set_minor_locator(NullLocator())
                ax.xaxis.set_minor_formatter(NullFormatter())
        ax.set_xlabel(spec.x_label)
        ax.set_ylabel(spec.y_label)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, lw=0.4, alpha=0.5)
        fig.tight_layout()
        fig.savefig(out_svg, format="svg", metadata={"Date": None})
        plt.close(fig)
