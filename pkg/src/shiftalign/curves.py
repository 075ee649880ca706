"""Curve containers, wide-CSV persistence, segmentation and block planning.

A record is a set of M+1 curves sampled on the regular grid
t_i = (i-1) * 2*pi / n, i = 1..n.  Curve 0 is the reference whose shift
is taken as known (and equal to zero in the relative convention used by
the alignment routines).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import (
    EmptySegmentationError,
    FormatError,
    InputError,
    InsufficientDataError,
    ParseError,
    PartitionError,
)

PERIOD = 2.0 * np.pi

# Shortest curve the spectral machinery accepts.
MIN_SAMPLES = 4


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SampledCurve:
    """One curve sampled on the regular grid over [0, 2*pi).

    Parameters
    ----------
    samples : array of float
        Curve values, at least ``MIN_SAMPLES`` of them, all finite.
    curve_id : int
        Identifier used in CSV output; 0 marks the reference.
    """

    samples: np.ndarray
    curve_id: int = 0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise InputError(f"curve {self.curve_id}: samples must be 1-D, got shape {samples.shape}")
        if samples.size < MIN_SAMPLES:
            raise InsufficientDataError(
                f"curve {self.curve_id}: {samples.size} samples, need at least {MIN_SAMPLES}"
            )
        if not np.all(np.isfinite(samples)):
            raise InputError(f"curve {self.curve_id}: samples contain non-finite values")
        object.__setattr__(self, "samples", _as_readonly(samples))

    @property
    def n(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class CurveSet:
    """Ordered collection of equally sampled curves; index 0 is the reference."""

    curves: tuple[SampledCurve, ...]

    def __post_init__(self) -> None:
        if len(self.curves) < 1:
            raise InsufficientDataError("a curve set needs at least the reference curve")
        n = self.curves[0].n
        for c in self.curves:
            if c.n != n:
                raise InputError(
                    f"curve {c.curve_id} has {c.n} samples, expected {n} like the reference"
                )
        object.__setattr__(self, "curves", tuple(self.curves))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "CurveSet":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise InputError(f"curve matrix must be 2-D, got shape {matrix.shape}")
        return cls(tuple(SampledCurve(row, curve_id=i) for i, row in enumerate(matrix)))

    @cached_property
    def matrix(self) -> np.ndarray:
        """Curves stacked as an (M+1, n) read-only array."""
        return _as_readonly(np.stack([c.samples for c in self.curves]))

    @property
    def n(self) -> int:
        return self.curves[0].n

    @property
    def n_curves(self) -> int:
        return len(self.curves)

    @cached_property
    def time_grid(self) -> np.ndarray:
        """Sample instants t_i = (i-1) * 2*pi / n."""
        return _as_readonly(np.arange(self.n) * (PERIOD / self.n))

    def __len__(self) -> int:
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)


@dataclass(frozen=True)
class BlockPlan:
    """Partition of curves 1..M into N blocks of K, each joined with the reference.

    Block m (1-based) covers curve indices {0} | {(m-1)K+1, ..., mK}.
    """

    blocks: tuple[tuple[int, ...], ...]
    block_size: int

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for b, members in enumerate(self.blocks, start=1):
            if members[0] != 0:
                raise PartitionError(f"block {b} does not start with the reference index 0")
            body = members[1:]
            if len(body) != self.block_size:
                raise PartitionError(
                    f"block {b} has {len(body)} non-reference curves, expected {self.block_size}"
                )
            overlap = seen.intersection(body)
            if overlap:
                raise PartitionError(f"curve indices {sorted(overlap)} appear in more than one block")
            seen.update(body)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


def make_blocks(curve_set: "CurveSet | int", block_size: int) -> BlockPlan:
    """Partition curves 1..M into consecutive blocks of ``block_size``.

    Accepts a CurveSet or the total curve count M+1.  Block m joins the
    reference with curves (m-1)K+1 .. mK.

    Raises
    ------
    PartitionError
        If ``block_size`` does not evenly divide the number of non-reference curves.
    """
    total = curve_set if isinstance(curve_set, int) else len(curve_set)
    m = total - 1
    if block_size < 1:
        raise PartitionError(f"block size must be >= 1, got {block_size}")
    if m < 1:
        raise PartitionError("need at least one non-reference curve to build blocks")
    if m % block_size != 0:
        raise PartitionError(
            f"{m} non-reference curves cannot be split into blocks of {block_size}"
        )
    n_blocks = m // block_size
    blocks = tuple(
        (0,) + tuple(range((b - 1) * block_size + 1, b * block_size + 1))
        for b in range(1, n_blocks + 1)
    )
    return BlockPlan(blocks=blocks, block_size=block_size)


# --- wide-CSV persistence -------------------------------------------------
#
# One curve per row, comma separated, UTF-8.  Lines starting with '#' are
# comments.  Floats are written with 17 significant digits so a load/save
# round trip is bit exact.

FLOAT_FMT = "%.17g"


def load_curves(path: str | Path) -> CurveSet:
    """Read a wide-CSV curve file (one curve per row, first row = reference)."""
    path = Path(path)
    rows: list[np.ndarray] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            cells = stripped.split(",")
            values = np.empty(len(cells))
            for col, cell in enumerate(cells, start=1):
                try:
                    values[col - 1] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}, column {col}: cannot parse {cell.strip()!r} as a number"
                    ) from None
            if rows and values.size != rows[0].size:
                raise FormatError(
                    f"{path}: line {lineno} has {values.size} values, expected {rows[0].size}"
                )
            rows.append(values)
    if len(rows) < 2:
        raise InsufficientDataError(
            f"{path}: found {len(rows)} curve rows, need the reference plus at least one curve"
        )
    return CurveSet.from_matrix(np.stack(rows))


def save_curves(curve_set: CurveSet, path: str | Path, header: str | None = None) -> None:
    """Write curves in wide-CSV form; ``header`` becomes a '#' comment line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for curve in curve_set:
            fh.write(",".join(FLOAT_FMT % v for v in curve.samples))
            fh.write("\n")


# --- segmentation ---------------------------------------------------------


def segment_maxima(
    signal: np.ndarray,
    window_len: int,
    min_separation: int,
    threshold: float,
) -> CurveSet:
    """Cut peak-centred windows out of a long record.

    Local maxima strictly above ``threshold`` are detected with a refractory
    distance of ``min_separation`` samples (the larger peak wins a conflict).
    Each accepted peak yields a window of ``window_len`` samples with the
    peak at local index ``window_len // 2``; windows that would run past
    either end of the record are discarded.  The first remaining window
    becomes the reference curve.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1:
        raise InputError(f"signal must be 1-D, got shape {signal.shape}")
    if not np.all(np.isfinite(signal)):
        raise InputError("signal contains non-finite values")
    if window_len < MIN_SAMPLES:
        raise InputError(f"window_len must be >= {MIN_SAMPLES}, got {window_len}")
    if window_len > signal.size:
        raise InputError(f"window_len {window_len} exceeds signal length {signal.size}")
    if min_separation < 1:
        raise InputError(f"min_separation must be >= 1, got {min_separation}")

    peaks, _ = find_peaks(signal, distance=min_separation)
    peaks = peaks[signal[peaks] > threshold]

    half = window_len // 2
    windows = []
    for p in peaks:
        start = p - half
        if start < 0 or start + window_len > signal.size:
            continue
        windows.append(signal[start : start + window_len])
    if not windows:
        raise EmptySegmentationError(
            "no peak above the threshold yielded a full window inside the record"
        )
    return CurveSet.from_matrix(np.stack(windows))
