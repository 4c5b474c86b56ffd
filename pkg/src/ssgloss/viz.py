"""Matplotlib renderings of the CLI's delimited outputs.

Every figure lands in a file next to the CSV/PGM payload it illustrates;
nothing here is needed for the numeric pipeline.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_bench_figure(rows, path) -> None:
    """Measured wall time vs predicted multiply-adds, log-log."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    pred = np.array([r.predicted_madds for r in rows], dtype=np.float64)
    wall = np.array([r.wall_ns for r in rows], dtype=np.float64)
    keep = pred > 0
    ax.loglog(pred[keep], wall[keep], "o", label="measured")
    if keep.any():
        scale = np.median(wall[keep] / pred[keep])
        grid = np.linspace(pred[keep].min(), pred[keep].max(), 50)
        ax.loglog(grid, scale * grid, "-", alpha=0.7, label="linear model")
        ax.loglog(grid, 2 * scale * grid, "--", alpha=0.4, label="2x band")
        ax.loglog(grid, 0.5 * scale * grid, "--", alpha=0.4)
    ax.set_xlabel("predicted multiply-adds")
    ax.set_ylabel("wall time (ns)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trace_figure(trace, path) -> None:
    """Loss trace of the toy optimizer."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot(np.arange(len(trace)), trace)
    ax.set_xlabel("step")
    ax.set_ylabel("total loss")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_heatmap_figure(grid, path) -> None:
    """One center's similarity distribution over its search area."""
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    im = ax.imshow(grid, cmap="magma", origin="upper")
    fig.colorbar(im, ax=ax, label="weight")
    ax.set_xlabel("column offset")
    ax.set_ylabel("row offset")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
