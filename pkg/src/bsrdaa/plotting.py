"""Figure output as deterministic SVG files."""
from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .trace import atomic_write_text  # noqa: E402

TRACE_PANELS = {
    "power": ("power_dbw", "Output power (dBW)"),
    "gain": ("r_db", "Commanded attenuation (dB)"),
    "efficiency": ("efficiency", "Efficiency"),
    "alignment": ("alignment", "Alignment with principal mode"),
}


def _save(fig, path):
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "bsrdaa", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    atomic_write_text(path, buf.getvalue())
    return Path(path)


def plot_trace(trace, out_dir, panels=("power", "gain", "efficiency"), stem="trace"):
    """One SVG per panel; the efficiency panel overlays the theoretical maximum."""
    if len(trace) == 0:
        raise ValueError("cannot plot an empty trace")
    out = []
    t_us = trace.t_s * 1e6
    for name in panels:
        if name not in TRACE_PANELS:
            raise ValueError(f"unknown panel {name!r}; choose from {sorted(TRACE_PANELS)}")
        col, label = TRACE_PANELS[name]
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.plot(t_us, getattr(trace, col), lw=1.0, label=trace.label or "measured")
        if name == "efficiency":
            ax.plot(t_us, trace.xi_max, "--", lw=1.0, label="maximum")
            ax.legend(loc="lower right")
        ax.set_xlabel("Time (us)")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        out.append(_save(fig, Path(out_dir) / f"{stem}_{name}.svg"))
    return out


def plot_comparison(report, out_path):
    """Efficiency-to-maximum ratio, one series per method."""
    if not report.results:
        raise ValueError("comparison report has no methods")
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for method, res in report.results.items():
        ax.plot(res.trace.t_s * 1e6, res.trace.ratio, lw=1.0, label=method)
    ax.set_xlabel("Time (us)")
    ax.set_ylabel("Efficiency / maximum")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_table(header, rows, out_path, x=0, y=1, group=None):
    """Line plot of a sweep table; ``group`` names a column to split series on."""
    if not rows:
        raise ValueError("cannot plot an empty table")
    rows = [r for r in rows if isinstance(r[x], (int, float)) and isinstance(r[y], (int, float))]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if group is None:
        xs = np.array([r[x] for r in rows], float)
        ys = np.array([r[y] for r in rows], float)
        ax.plot(xs, ys, marker=".", lw=1.0)
    else:
        keys = []
        for r in rows:
            if r[group] not in keys:
                keys.append(r[group])
        for key in keys:
            sub = [r for r in rows if r[group] == key]
            ax.plot([r[x] for r in sub], [r[y] for r in sub], lw=1.0,
                    label=f"{header[group]}={key}")
        ax.legend(fontsize=7)
    ax.set_xlabel(header[x])
    ax.set_ylabel(header[y])
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, out_path)


def emit_plots(data, spec, out_dir):
    """Dispatch on the kind of ``data``: trace, comparison report or sweep table."""
    from .scenario import ComparisonReport
    from .trace import SimulationTrace

    out_dir = Path(out_dir)
    try:
        if isinstance(data, SimulationTrace):
            return plot_trace(data, out_dir, spec.get("panels", ("power", "gain", "efficiency")),
                              spec.get("stem", "trace"))
        if isinstance(data, ComparisonReport):
            return [plot_comparison(data, out_dir / f"{spec.get('stem', 'comparison')}_ratio.svg")]
        header, rows = data.header, data.rows
        return [plot_table(header, rows, out_dir / f"{spec.get('stem', 'sweep')}.svg",
                           spec.get("x", 0), spec.get("y", 1), spec.get("group"))]
    except OSError as exc:
        raise OSError(f"could not write plots to {out_dir}: {exc}") from exc
