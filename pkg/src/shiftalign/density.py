"""Plug-in kernel density estimation of the shift law, with ISE/MISE metrics.

The estimated shifts are treated as an i.i.d.-like sample and smoothed with
a Gaussian kernel; no boundary correction is applied because the shift law
is assumed to live strictly inside [0, 2*pi].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .curves import PERIOD
from .errors import DegenerateSampleError, InputError

TWO_PI = PERIOD

DENSITY_GRID_POINTS = 1024

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def density_grid(points: int = DENSITY_GRID_POINTS) -> np.ndarray:
    """Default evaluation grid: ``points`` equispaced values spanning [0, 2*pi]."""
    return np.linspace(0.0, TWO_PI, points)


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    kernel: str
    sample_count: int

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise InputError("grid and values must be 1-D arrays of equal length")
        if np.any(values < 0):
            raise InputError("density values must be nonnegative")
        grid = grid.copy()
        values = values.copy()
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def integral(self) -> float:
        """Trapezoid mass over the grid (should be ~1 for interior samples)."""
        return float(np.trapezoid(self.values, self.grid))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(std, IQR/1.34) * count^(-1/5).

    ``std`` is the ddof=1 sample standard deviation and the IQR uses linear
    percentile interpolation.  A sample whose spread measure vanishes (all
    equal, or more than half the mass on one value) cannot be smoothed.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise InputError(f"need at least 2 samples, got {samples.size}")
    if not np.all(np.isfinite(samples)):
        raise InputError("samples contain non-finite values")
    std = float(np.std(samples, ddof=1))
    q25, q75 = np.percentile(samples, [25.0, 75.0])
    spread = min(std, (q75 - q25) / 1.34)
    if spread <= 0.0:
        raise DegenerateSampleError(
            "sample spread is zero; cannot choose a bandwidth (degenerate sample)"
        )
    return 0.9 * spread * samples.size ** (-0.2)


def kde(samples: np.ndarray, bandwidth: float, grid: np.ndarray | None = None) -> DensityEstimate:
    """Gaussian-kernel density estimate (1/(count*h)) * sum psi((x - s_m)/h)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 1:
        raise InputError("need at least one sample")
    if not np.all(np.isfinite(samples)):
        raise InputError("samples contain non-finite values")
    if bandwidth <= 0 or not np.isfinite(bandwidth):
        raise InputError(f"bandwidth must be > 0, got {bandwidth}")
    if grid is None:
        grid = density_grid()
    grid = np.asarray(grid, dtype=float)
    u = (grid[:, None] - samples[None, :]) / bandwidth
    values = np.exp(-0.5 * u * u).sum(axis=1) / (samples.size * bandwidth * _SQRT_2PI)
    return DensityEstimate(
        grid=grid,
        values=values,
        bandwidth=float(bandwidth),
        kernel="gaussian",
        sample_count=samples.size,
    )


def ise(estimate: DensityEstimate, true_pdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Integrated squared error against a callable density, trapezoid rule."""
    truth = np.asarray(true_pdf(estimate.grid), dtype=float)
    if truth.shape != estimate.grid.shape:
        raise InputError("true_pdf must return one value per grid point")
    diff = estimate.values - truth
    return float(np.trapezoid(diff * diff, estimate.grid))


def mise(ise_values: Iterable[float]) -> float:
    """Mean ISE over replicates."""
    values = np.asarray(list(ise_values), dtype=float)
    if values.size == 0:
        raise InputError("need at least one replicate ISE")
    return float(values.mean())


def uniform_pdf(a: float, b: float) -> Callable[[np.ndarray], np.ndarray]:
    """Density of U(a, b) as a grid-evaluable callable."""
    if not b > a:
        raise InputError(f"need b > a, got a={a}, b={b}")
    height = 1.0 / (b - a)

    def pdf(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where((x >= a) & (x <= b), height, 0.0)

    return pdf


def ks_distance_uniform(samples: np.ndarray, a: float, b: float) -> float:
    """Kolmogorov-Smirnov sup-distance of a sample against the U(a, b) CDF."""
    samples = np.sort(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise InputError("need at least one sample")
    cdf = np.clip((samples - a) / (b - a), 0.0, 1.0)
    i = np.arange(1, samples.size + 1)
    upper = np.max(i / samples.size - cdf)
    lower = np.max(cdf - (i - 1) / samples.size)
    return float(max(upper, lower))


def write_density_csv(estimate: DensityEstimate, path: str | Path) -> None:
    """Columns: x, f_hat."""
    path = Path(path)
    lines = ["x,f_hat"]
    for x, v in zip(estimate.grid, estimate.values):
        lines.append(f"{x:.17g},{v:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
