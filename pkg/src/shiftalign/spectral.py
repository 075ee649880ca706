"""Fourier coefficients, energy spectral densities, and the block cost.

Conventions
-----------
The Fourier coefficient of curve l at integer frequency k is

    f_{k,l} = (1/n) * sum_{m=1..n} y_l(t_m) * exp(-2i*pi*m*k/n),

with t_m = (m-1)*2*pi/n.  Under this convention a curve equal to the
prototype delayed by theta has coefficient exp(-i*k*theta) * c(k), where
c(k) is the prototype's coefficient; correcting a curve by +alpha (forming
y(t+alpha)) therefore multiplies its coefficient by exp(+i*k*alpha).

The block cost compares the global mean energy spectral density against
the ESD of a weighted in-block average in which the reference curve
carries weight ``ref_weight`` and every other curve weight 1:

    cost(alpha) = sum_k nu_k * (mean_esd(k) - B(k, alpha))^2,
    B(k, alpha) = | (ref_weight*f_{k,0} + sum_l e^{i k alpha_l} f_{k,l})
                    / (K + ref_weight) |^2 .

The cost is minimized exactly at the true shifts in the noise-free case;
``noise_free_cost`` evaluates that idealized objective directly from the
prototype ESD and serves as an independent oracle for tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .curves import PERIOD, CurveSet
from .errors import GridError, InputError

TWO_PI = PERIOD


def max_grid_k(n: int) -> int:
    """Largest usable |k| for curves of length n (strictly below Nyquist)."""
    return n // 2 - 1


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric integer frequency grid {-k_max, ..., 0, ..., k_max}."""

    k_max: int

    def __post_init__(self) -> None:
        if self.k_max < 1:
            raise GridError(f"k_max must be >= 1, got {self.k_max}")

    @cached_property
    def k_values(self) -> np.ndarray:
        k = np.arange(-self.k_max, self.k_max + 1)
        k.setflags(write=False)
        return k

    @property
    def size(self) -> int:
        return 2 * self.k_max + 1

    def index_of(self, k: int) -> int:
        if abs(k) > self.k_max:
            raise GridError(f"frequency {k} outside grid |k| <= {self.k_max}")
        return k + self.k_max


@dataclass(frozen=True)
class FrequencyWeights:
    """Nonnegative symmetric weights nu_k over a FrequencyGrid."""

    grid: FrequencyGrid
    nu: np.ndarray

    def __post_init__(self) -> None:
        nu = np.asarray(self.nu, dtype=float)
        if nu.shape != (self.grid.size,):
            raise InputError(
                f"weights length {nu.shape} does not match grid size {self.grid.size}"
            )
        if not np.all(np.isfinite(nu)) or np.any(nu < 0):
            raise InputError("weights must be finite and nonnegative")
        if not np.allclose(nu, nu[::-1], rtol=0, atol=0):
            raise InputError("weights must satisfy nu(-k) == nu(k) exactly")
        nu = nu.copy()
        nu.setflags(write=False)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def flat_band(cls, grid: FrequencyGrid, band_k_max: int | None = None) -> "FrequencyWeights":
        """Indicator weights nu_k = 1 for |k| <= band_k_max (default: whole grid)."""
        cut = grid.k_max if band_k_max is None else band_k_max
        nu = (np.abs(grid.k_values) <= cut).astype(float)
        return cls(grid=grid, nu=nu)

    @cached_property
    def curvature_sum(self) -> float:
        """sum_k k^2 nu_k, recorded per the weight contract."""
        return float(np.sum(self.grid.k_values.astype(float) ** 2 * self.nu))


@dataclass(frozen=True)
class SpectralSet:
    """Per-curve Fourier coefficients on a grid, with the global mean ESD."""

    coeffs: np.ndarray  # complex, shape (M+1, grid.size)
    grid: FrequencyGrid
    n: int

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.ndim != 2 or coeffs.shape[1] != self.grid.size:
            raise InputError(
                f"coefficient matrix shape {coeffs.shape} does not match grid size {self.grid.size}"
            )
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_curves(self) -> int:
        return self.coeffs.shape[0]

    @cached_property
    def mean_esd(self) -> np.ndarray:
        """A(k) = mean over curves of |f_{k,l}|^2."""
        out = (np.abs(self.coeffs) ** 2).mean(axis=0)
        out.setflags(write=False)
        return out

    def to_json(self, path: str | Path) -> None:
        payload = {
            "n": self.n,
            "k_max": self.grid.k_max,
            "coeffs": [[[z.real, z.imag] for z in row] for row in self.coeffs],
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "SpectralSet":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        coeffs = np.array(
            [[complex(re, im) for re, im in row] for row in payload["coeffs"]]
        )
        return cls(coeffs=coeffs, grid=FrequencyGrid(payload["k_max"]), n=payload["n"])


@dataclass(frozen=True)
class ShiftVector:
    """Correction shifts for one block: K+1 entries, entry 0 pinned to 0."""

    alpha: np.ndarray
    block_id: int = 0

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 1 or alpha.size < 2:
            raise InputError("shift vector needs the reference entry plus at least one shift")
        if not np.all(np.isfinite(alpha)):
            raise InputError(f"block {self.block_id}: non-finite shift entries")
        alpha = np.mod(alpha, TWO_PI)
        if alpha[0] != 0.0:
            raise InputError(
                f"block {self.block_id}: reference entry must be 0 (mod 2*pi), got {alpha[0]}"
            )
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def free(self) -> np.ndarray:
        """The K optimizable entries (reference excluded)."""
        return self.alpha[1:]


def dft_coeffs(curve_set: CurveSet, grid: FrequencyGrid) -> SpectralSet:
    """Fourier coefficients of every curve on the grid.

    Uses the FFT fast path; the extra per-frequency phase twist accounts for
    the m = 1..n summation convention (sample y(t_m) carries e^{-2i pi m k/n},
    not e^{-2i pi (m-1) k/n}).
    """
    n = curve_set.n
    bound = max_grid_k(n)
    if grid.k_max > bound:
        raise GridError(
            f"k_max {grid.k_max} exceeds the grid bound {bound} for curves of length {n}"
        )
    full = np.fft.fft(curve_set.matrix, axis=1) / n
    k = grid.k_values
    coeffs = full[:, np.mod(k, n)] * np.exp(-2j * np.pi * k / n)
    return SpectralSet(coeffs=coeffs, grid=grid, n=n)


def esd(coeff_row: np.ndarray, grid: FrequencyGrid, k: int) -> float:
    """Energy spectral density |f_k|^2 of one coefficient row at frequency k."""
    return float(np.abs(coeff_row[grid.index_of(k)]) ** 2)


def _block_parts(
    spec: SpectralSet, block: Sequence[int], shifts: ShiftVector, ref_weight: float
):
    """Split one block into (reference row, other rows, free shifts); validate."""
    if ref_weight <= 0 or not np.isfinite(ref_weight):
        raise InputError(f"reference weight must be positive and finite, got {ref_weight}")
    block = tuple(int(i) for i in block)
    if shifts.alpha.size != len(block):
        raise InputError(
            f"shift vector length {shifts.alpha.size} does not match block size {len(block)}"
        )
    f_ref = spec.coeffs[block[0]]
    f_others = spec.coeffs[list(block[1:])]
    return f_ref, f_others, shifts.free


def _weighted_average(
    f_ref: np.ndarray,
    f_others: np.ndarray,
    alpha_free: np.ndarray,
    k_values: np.ndarray,
    ref_weight: float,
) -> np.ndarray:
    """z(k): the phase-corrected, reference-weighted in-block average."""
    phases = np.exp(1j * np.outer(alpha_free, k_values.astype(float)))
    total = ref_weight * f_ref + (phases * f_others).sum(axis=0)
    return total / (f_others.shape[0] + ref_weight)


def block_avg_esd_profile(
    spec: SpectralSet, block: Sequence[int], shifts: ShiftVector, ref_weight: float
) -> np.ndarray:
    """B(k, alpha) for every grid frequency."""
    f_ref, f_others, alpha_free = _block_parts(spec, block, shifts, ref_weight)
    z = _weighted_average(f_ref, f_others, alpha_free, spec.grid.k_values, ref_weight)
    return np.abs(z) ** 2


def block_avg_esd(
    spec: SpectralSet,
    block: Sequence[int],
    shifts: ShiftVector,
    ref_weight: float,
    k: int,
) -> float:
    """B(k, alpha): ESD of the weighted in-block average at one frequency."""
    profile = block_avg_esd_profile(spec, block, shifts, ref_weight)
    return float(profile[spec.grid.index_of(k)])


def cost_terms(
    spec: SpectralSet, block: Sequence[int], shifts: ShiftVector, ref_weight: float
) -> np.ndarray:
    """Per-frequency residual mean_esd(k) - B(k, alpha)."""
    return spec.mean_esd - block_avg_esd_profile(spec, block, shifts, ref_weight)


def cost(
    spec: SpectralSet,
    block: Sequence[int],
    shifts: ShiftVector,
    ref_weight: float,
    weights: FrequencyWeights,
) -> float:
    """Weighted squared residual between the mean ESD and the block-average ESD."""
    _check_weights(spec, weights)
    c = cost_terms(spec, block, shifts, ref_weight)
    return float(np.sum(weights.nu * c * c))


def cost_gradient(
    spec: SpectralSet,
    block: Sequence[int],
    shifts: ShiftVector,
    ref_weight: float,
    weights: FrequencyWeights,
) -> np.ndarray:
    """Analytic gradient of ``cost`` with respect to the K free shifts.

    d cost / d alpha_l
      = sum_k nu_k * 2 (A(k) - B(k)) * (-dB/d alpha_l),
    with dB/d alpha_l = 2 Re( conj(z_k) * (i k / (K + ref_weight))
                              * e^{i k alpha_l} f_{k,l} ).
    """
    _check_weights(spec, weights)
    f_ref, f_others, alpha_free = _block_parts(spec, block, shifts, ref_weight)
    k = spec.grid.k_values.astype(float)
    phases = np.exp(1j * np.outer(alpha_free, k))
    rotated = phases * f_others
    denom = f_others.shape[0] + ref_weight
    z = (ref_weight * f_ref + rotated.sum(axis=0)) / denom
    residual = spec.mean_esd - np.abs(z) ** 2
    # Re(i w) = -Im(w) collapses the two sign flips into a single +Im term.
    w = weights.nu * residual * k * np.conj(z)
    return (4.0 / denom) * (rotated * w).sum(axis=1).imag


def cost_scale(spec: SpectralSet, weights: FrequencyWeights) -> float:
    """sum_k nu_k A(k)^2 — the scale used for normalized cost reporting."""
    _check_weights(spec, weights)
    return float(np.sum(weights.nu * spec.mean_esd**2))


def _check_weights(spec: SpectralSet, weights: FrequencyWeights) -> None:
    if weights.grid.k_max != spec.grid.k_max:
        raise GridError(
            f"weights defined on |k| <= {weights.grid.k_max} but coefficients on |k| <= {spec.grid.k_max}"
        )


def noise_free_cost(
    pulse_esd: np.ndarray,
    true_shifts: ShiftVector,
    trial_shifts: ShiftVector,
    ref_weight: float,
    weights: FrequencyWeights,
) -> float:
    """Idealized noise-free objective, evaluated without any curve data.

    D(alpha) = sum_k nu_k * pulse_esd(k)^2 *
               ( | (1/(K+w)) * sum_m w_m e^{i k (alpha_m - theta_m)} |^2 - 1 )^2,

    where w_0 = ref_weight and w_m = 1 otherwise, and the m = 0 term
    contributes exactly ref_weight because alpha_0 = theta_0 = 0.  Zero iff
    the weighted phase average has modulus 1 at every weighted frequency;
    with noise-free on-grid data ``cost`` coincides with this expression.
    """
    pulse_esd = np.asarray(pulse_esd, dtype=float)
    if pulse_esd.shape != (weights.grid.size,):
        raise InputError(
            f"pulse ESD length {pulse_esd.shape} does not match grid size {weights.grid.size}"
        )
    if true_shifts.alpha.size != trial_shifts.alpha.size:
        raise InputError("true and trial shift vectors must have equal length")
    if ref_weight <= 0 or not np.isfinite(ref_weight):
        raise InputError(f"reference weight must be positive and finite, got {ref_weight}")
    k = weights.grid.k_values.astype(float)
    delta = trial_shifts.free - true_shifts.free
    n_free = delta.size
    phase_avg = (ref_weight + np.exp(1j * np.outer(delta, k)).sum(axis=0)) / (
        n_free + ref_weight
    )
    dev = np.abs(phase_avg) ** 2 - 1.0
    return float(np.sum(weights.nu * pulse_esd**2 * dev**2))


def phase_shift(samples: np.ndarray, delta: float) -> np.ndarray:
    """Resample a curve at t + delta via exact spectral phase rotation.

    Exact under the periodic band-limited model; the Nyquist bin (even n)
    keeps only its real rotation so the output stays real.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[-1]
    spectrum = np.fft.fft(samples, axis=-1)
    k = np.fft.fftfreq(n, d=1.0 / n)
    factor = np.exp(1j * k * delta)
    if n % 2 == 0:
        factor[n // 2] = np.cos(k[n // 2] * delta)
    return np.fft.ifft(spectrum * factor, axis=-1).real


def phase_shift_rows(matrix: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Row-wise ``phase_shift`` with one delta per row."""
    matrix = np.asarray(matrix, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    n = matrix.shape[1]
    spectrum = np.fft.fft(matrix, axis=1)
    k = np.fft.fftfreq(n, d=1.0 / n)
    factor = np.exp(1j * np.outer(deltas, k))
    if n % 2 == 0:
        factor[:, n // 2] = np.cos(k[n // 2] * deltas)
    return np.fft.ifft(spectrum * factor, axis=1).real
