"""Report figures rendered to image files.

Used by the command-line report paths; both functions take plain arrays and
write a PNG without opening a window, so they are safe on headless machines.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_metrics_figure", "save_ablation_figure"]


def _format_value(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.4f}"
    return str(value)


def _show_panel(ax, title: str, arr: np.ndarray, vmax: float | None) -> None:
    ax.imshow(np.asarray(arr), cmap="gray", vmin=0.0, vmax=vmax)
    ax.set_title(title, fontsize=9)
    ax.axis("off")


def save_metrics_figure(path, panels, metrics: dict) -> None:
    """Render image panels next to a listing of their metric values.

    ``panels`` is a list of (title, 2-D array) pairs shown in shared gray
    scale; ``metrics`` is rendered as text in the final panel.
    """
    count = len(panels) + 1
    fig, axes = plt.subplots(1, count, figsize=(3.3 * count, 3.6))
    axes = np.atleast_1d(axes)
    vmax = max(float(np.asarray(arr).max()) for _, arr in panels)
    for ax, (title, arr) in zip(axes, panels):
        _show_panel(ax, title, arr, vmax if vmax > 0 else None)
    listing = axes[-1]
    listing.axis("off")
    lines = [f"{name} = {_format_value(value)}" for name, value in metrics.items()]
    listing.text(
        0.02, 0.98, "\n".join(lines),
        va="top", ha="left", family="monospace", fontsize=9,
        transform=listing.transAxes,
    )
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_ablation_figure(path, panels, rows) -> None:
    """Render the ablation outputs above a PSNR and SSIM bar chart.

    ``rows`` is the ordered list of result dicts, each carrying ``row``,
    ``psnr`` and ``ssim`` entries.
    """
    count = max(len(panels), 1)
    fig = plt.figure(figsize=(3.1 * count, 6.8))
    grid = fig.add_gridspec(2, count, height_ratios=[3, 2])
    vmax = max(float(np.asarray(arr).max()) for _, arr in panels)
    for index, (title, arr) in enumerate(panels):
        _show_panel(fig.add_subplot(grid[0, index]), title, arr, vmax if vmax > 0 else None)

    chart = fig.add_subplot(grid[1, :])
    labels = [str(row["row"]) for row in rows]
    x = np.arange(len(rows))
    psnr_values = [float(row["psnr"]) for row in rows]
    ssim_pct = [100.0 * float(row["ssim"]) for row in rows]
    chart.bar(x - 0.19, psnr_values, width=0.38, label="PSNR (dB)")
    chart.bar(x + 0.19, ssim_pct, width=0.38, label="SSIM (pct)")
    chart.set_xticks(x)
    chart.set_xticklabels(labels)
    chart.set_xlabel("configuration")
    chart.legend(fontsize=8)
    chart.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
