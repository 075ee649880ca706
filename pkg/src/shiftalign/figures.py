"""Report figures rendered next to the delimited outputs.

matplotlib is imported lazily with the Agg backend so that the core
library stays import-light and headless runs never touch a display.
Figures use fixed sizes and dpi; nothing time- or locale-dependent goes
into the files, keeping reruns byte-stable.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .curves import PERIOD, CurveSet
from .density import DensityEstimate
from .spectral import phase_shift_rows

DPI = 120


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI)
    _plt().close(fig)
    return path


def _overlay(ax, curve_set: CurveSet, indices: Sequence[int], shifts: np.ndarray | None) -> None:
    t = curve_set.time_grid
    matrix = curve_set.matrix[list(indices)]
    if shifts is not None:
        matrix = phase_shift_rows(matrix, np.asarray(shifts)[list(indices)])
    for row in matrix:
        ax.plot(t, row, lw=0.7, alpha=0.6)
    ax.set_xlim(0.0, PERIOD)
    ax.set_xlabel("t")


def _pick(total: int, max_curves: int) -> list[int]:
    if total <= max_curves:
        return list(range(total))
    step = total / max_curves
    return sorted({int(i * step) for i in range(max_curves)})


def curves_figure(curve_set: CurveSet, path: str | Path, max_curves: int = 12) -> Path:
    """Overlay of up to max_curves curves from the set."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    _overlay(ax, curve_set, _pick(len(curve_set), max_curves), None)
    ax.set_title(f"{len(curve_set)} curves (showing {min(len(curve_set), max_curves)})")
    fig.tight_layout()
    return _save(fig, path)


def alignment_figure(
    curve_set: CurveSet,
    theta_hat: np.ndarray,
    path: str | Path,
    max_curves: int = 12,
) -> Path:
    """Raw vs aligned overlays with the aligned mean drawn on top."""
    plt = _plt()
    theta_hat = np.asarray(theta_hat, dtype=float)
    indices = _pick(len(curve_set), max_curves)
    fig, (ax_raw, ax_fit) = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    _overlay(ax_raw, curve_set, indices, None)
    ax_raw.set_title("observed")
    _overlay(ax_fit, curve_set, indices, theta_hat)
    aligned_mean = phase_shift_rows(curve_set.matrix, theta_hat).mean(axis=0)
    ax_fit.plot(curve_set.time_grid, aligned_mean, color="black", lw=1.8, label="aligned mean")
    ax_fit.set_title("aligned")
    ax_fit.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def density_figure(
    estimate: DensityEstimate,
    path: str | Path,
    true_pdf: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Path:
    """Estimated shift density over [0, 2pi), with the true law if known."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(estimate.grid, estimate.values, lw=1.4, label=f"KDE (h={estimate.bandwidth:.4g})")
    if true_pdf is not None:
        ax.plot(estimate.grid, true_pdf(estimate.grid), lw=1.0, ls="--", color="gray", label="true law")
    ax.set_xlim(0.0, PERIOD)
    ax.set_xlabel("shift")
    ax.set_ylabel("density")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def mise_figure(cells: Sequence, path: str | Path) -> Path:
    """MISE vs block size, one line per (sigma2, method) pair."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    keys = sorted({(c.sigma2, c.method) for c in cells})
    for sigma2, method in keys:
        pts = sorted((c.block_size, c.mise) for c in cells if c.sigma2 == sigma2 and c.method == method)
        ax.plot(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            label=f"{method}, sigma2={sigma2:g}",
        )
    ax.set_xlabel("K")
    ax.set_ylabel("MISE")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
