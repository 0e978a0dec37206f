"""Static figures written next to the tabular reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .effects import SensitivityReport  # noqa: E402

# fixed ids and no timestamp keep SVG output byte-stable between runs
SVG_SALT = "copula-morris"


def _save(fig, path):
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        meta = {"Date": None} if str(path).endswith((".svg", ".pdf")) else {}
        fig.savefig(path, metadata=meta, bbox_inches="tight")
    plt.close(fig)


def plot_measures(report: SensitivityReport, path, title: str | None = None):
    """(mu*, sigma) scatter with one labelled point per factor."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    rows = report.ranking()
    x = np.array([f.mu_star for f in rows])
    y = np.array([0.0 if f.sigma is None else f.sigma for f in rows])
    ax.scatter(x, y, s=28, color="C0", zorder=3)
    for f, xi, yi in zip(rows, x, y):
        ax.annotate(f"{f.rank}. {f.name}", (xi, yi), xytext=(4, 3), textcoords="offset points", fontsize=7)
    top = max(x.max(initial=0.0), y.max(initial=0.0))
    if top > 0:
        ax.plot([0, top], [0, top], color="0.6", lw=0.8, ls="--", zorder=1)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.set_xlabel(r"$\mu^*$")
    ax.set_ylabel(r"$\sigma$")
    ax.grid(True, lw=0.4, alpha=0.5)
    if title:
        ax.set_title(title, fontsize=10)
    _save(fig, path)


def plot_series(times, series: dict, path, ylabel: str = "concentration [g/m$^3$]"):
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    for label, values in series.items():
        ax.plot(times, values, lw=0.9, label=label)
    ax.set_xlabel("time [day]")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7, frameon=False)
    ax.grid(True, lw=0.4, alpha=0.5)
    _save(fig, path)
