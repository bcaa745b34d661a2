"""Figures for reports: residual bars and grid-convergence curves."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG output byte-identical between runs
_PNG_META = {"Software": None}
_FLOOR = 1e-18


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_residuals(residuals: dict, tolerances: dict, path, title: str = "") -> Path:
    """Horizontal log-scale bars, one per residual, with its tolerance tick."""
    names = sorted(residuals)
    vals = np.array([max(float(residuals[k]), _FLOOR) for k in names])
    tols = np.array([float(tolerances.get(k, np.nan)) for k in names])
    fig, ax = plt.subplots(figsize=(7, 0.3 * len(names) + 1.2))
    ypos = np.arange(len(names))
    ok = vals < np.nan_to_num(tols, nan=np.inf)
    ax.barh(ypos, vals, color=np.where(ok, "tab:green", "tab:red"))
    ax.scatter(tols, ypos, marker="|", s=200, color="k", label="tolerance")
    ax.set_xscale("log")
    ax.set_yticks(ypos, names, fontsize=7)
    ax.set_xlabel("residual")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_convergence(rows, path, title: str = "grid convergence") -> Path:
    """Max residual over probes against grid size, log-log, one curve per check."""
    series: dict = {}
    for row in rows:
        key = row["check_name"]
        n = int(row["n_points"])
        series.setdefault(key, {})
        series[key][n] = max(series[key].get(n, 0.0), float(row["residual"]))
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for name in sorted(series):
        ns = sorted(series[name])
        ax.loglog(ns, [max(series[name][n], _FLOOR) for n in ns], "o-", label=name)
    ax.set_xlabel("grid points")
    ax.set_ylabel("max residual over probes")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
