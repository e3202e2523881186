"""Figure rendering for exported grids (batch use, Agg backend).

These are quick-look diagnostics drawn next to the delimited exports; the
TSV files remain the canonical plot-ready output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_stagnation_figure(grid: np.ndarray, width: float, height: float, path: str | Path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 5 * height / width))
    im = ax.imshow(
        grid.T,
        origin="lower",
        extent=(0.0, width, 0.0, height),
        cmap="inferno",
        interpolation="nearest",
    )
    fig.colorbar(im, ax=ax, shrink=0.85, label="stagnation")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title, fontsize=10)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_movement_figure(
    mean_dx: np.ndarray,
    mean_dy: np.ndarray,
    cell_size: float,
    width: float,
    height: float,
    path: str | Path,
    title: str = "",
) -> None:
    nx, ny = mean_dx.shape
    cx = (np.arange(nx) + 0.5) * cell_size
    cy = (np.arange(ny) + 0.5) * cell_size
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    fig, ax = plt.subplots(figsize=(5, 5 * height / width))
    mag = np.hypot(mean_dx, mean_dy)
    ax.quiver(gx, gy, mean_dx, mean_dy, mag, cmap="viridis", angles="xy")
    ax.set_xlim(0.0, width)
    ax.set_ylim(0.0, height)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title, fontsize=10)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
