"""Delimited report emission and companion figures.

CSV dialect is the bit-exact contract: comma separator, '.' decimal point,
one header row, LF line endings, floats serialized by shortest round-trip
repr.  Figures are rendered next to the CSVs as PNG via the Agg backend and
are informational only.
"""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "format_cell",
    "write_csv",
    "write_text",
    "fig_value_function",
    "fig_compare",
    "fig_paths",
    "fig_convergence",
    "fig_sweep",
    "fig_surface",
    "fig_benchmark",
]

plt.rcParams.update({
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.3,
})


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    """Write rows of cells under a header; returns the path."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(v) for v in row) + "\n")
    return path


def write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def fig_value_function(grid_cols, band, out_path, title="value function"):
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    ax1.plot(grid_cols["x"], grid_cols["v"], lw=1.5, label="v")
    ax1.axvline(band, color="k", ls="--", lw=0.8)
    ax1.axvline(-band, color="k", ls="--", lw=0.8)
    ax1.set_ylabel("v")
    ax1.set_title(title)
    ax2.plot(grid_cols["x"], grid_cols["dv"], lw=1.2, color="tab:orange", label="v'")
    ax2.axvline(band, color="k", ls="--", lw=0.8)
    ax2.axvline(-band, color="k", ls="--", lw=0.8)
    ax2.set_xlabel("spread")
    ax2.set_ylabel("v'")
    return _save(fig, out_path)


def fig_compare(y, v_pareto, v_nash_avg, c1, c2, out_path):
    fig, ax = plt.subplots()
    ax.plot(y, v_pareto, lw=1.5, label="regulator (Pareto)")
    ax.plot(y, v_nash_avg, lw=1.5, ls="--", label="Nash average")
    for c, color in ((c1, "tab:blue"), (c2, "tab:orange")):
        ax.axvline(c, color=color, ls=":", lw=0.9)
        ax.axvline(-c, color=color, ls=":", lw=0.9)
    ax.set_xlabel("spread x1 - x2")
    ax.set_ylabel("value")
    ax.set_title(f"band thresholds: Pareto {c1:.4f} vs Nash {c2:.4f}")
    ax.legend()
    return _save(fig, out_path)


def fig_paths(t, states, band, out_path, ylabel="state"):
    fig, ax = plt.subplots()
    for row in np.atleast_2d(states):
        ax.plot(t, row, lw=0.7, alpha=0.8)
    if band is not None:
        ax.axhline(band, color="k", ls="--", lw=0.9)
        ax.axhline(-band, color="k", ls="--", lw=0.9)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title("sample paths")
    return _save(fig, out_path)


def fig_convergence(nodes, errors, out_path):
    fig, ax = plt.subplots()
    ax.loglog(nodes, errors, "o-", lw=1.2)
    ax.set_xlabel("grid nodes")
    ax.set_ylabel("sup error vs analytic")
    ax.set_title("grid refinement")
    return _save(fig, out_path)


def fig_sweep(values, c1s, c2s, parameter, out_path):
    fig, ax = plt.subplots()
    ax.plot(values, c1s, "o-", label="Pareto band c1")
    ax.plot(values, c2s, "s--", label="Nash band c2")
    ax.set_xlabel(parameter)
    ax.set_ylabel("threshold")
    ax.legend()
    ax.set_title(f"thresholds over {parameter}")
    return _save(fig, out_path)


def fig_surface(x1, x2, u, out_path, title="value"):
    fig, ax = plt.subplots()
    m = ax.pcolormesh(x1, x2, u.T, shading="auto")
    fig.colorbar(m, ax=ax)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(title)
    return _save(fig, out_path)


def fig_benchmark(t, xbar, out_path):
    fig, ax = plt.subplots()
    for row in np.atleast_2d(xbar):
        ax.plot(t, row, lw=0.7, alpha=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("benchmark rate")
    ax.set_title("weighted benchmark paths")
    return _save(fig, out_path)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
