"""Figure rendering for CLI reports.

Every function writes one PNG next to the delimited output and returns
the path it wrote.  Rendering is headless (Agg); nothing here opens a
window.
"""
from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def save_trace_figure(trace, path, title: str = "objective per sweep") -> str:
    """Plot an objective trace against sweep index."""
    trace = np.asarray(trace, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, trace.size + 1), trace, marker="o", ms=3, lw=1.2)
    ax.set_xlabel("sweep")
    ax.set_ylabel("objective")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return os.fspath(path)


def save_confusion_figure(confusion, path, title: str = "confusion") -> str:
    """Heatmap of a confusion matrix, annotated when it is small."""
    conf = np.asarray(confusion)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(conf, cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    if conf.shape[0] <= 15:
        mid = conf.max() / 2.0 if conf.size else 0
        for i in range(conf.shape[0]):
            for j in range(conf.shape[1]):
                ax.text(j, i, str(conf[i, j]), ha="center", va="center",
                        fontsize=7, color="white" if conf[i, j] < mid else "black")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return os.fspath(path)


def save_timing_figure(reports, path, title: str = "fit wall time") -> str:
    """Bar chart of fit seconds for a list of TimingReports."""
    methods = [r.method for r in reports]
    seconds = [r.fit_seconds for r in reports]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    bars = ax.bar(methods, seconds, color="#4878a8", width=0.6)
    ax.bar_label(bars, fmt="%.2fs", fontsize=8)
    ax.set_ylabel("seconds")
    ax.set_title(title)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return os.fspath(path)
