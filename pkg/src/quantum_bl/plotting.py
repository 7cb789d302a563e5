"""Deterministic SVG charts (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed salt and no timestamp so identical data gives identical bytes
matplotlib.rcParams["svg.hashsalt"] = "quantum-bl"
_META = {"Date": None, "Creator": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def line_chart(series: dict, path, xlabel: str = "", ylabel: str = "", title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, ys in series.items():
        ax.plot(range(len(ys)), ys, marker="o", markersize=3, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def bar_chart(values: dict, path, ylabel: str = "", title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    names = list(values)
    ax.bar(names, [values[n] for n in names], color="tab:blue")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.tick_params(axis="x", labelrotation=30)
    fig.tight_layout()
    return _save(fig, path)


def histogram(values, path, xlabel: str = "", title: str = "", marker=None, bins: int = 60) -> Path:
    """Histogram with an optional vertical marker line (e.g. lowest infeasible level)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(values, bins=bins, color="tab:gray")
    if marker is not None:
        ax.axvline(marker, color="tab:red", linestyle="--")
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
