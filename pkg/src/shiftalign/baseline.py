"""Classical registration baselines: least-squares to the mean, and landmark alignment."""

from __future__ import annotations

import numpy as np

from .align import AlignmentResult, circular_distance
from .curves import PERIOD, CurveSet
from .errors import DegenerateLandmarkError, InputError
from .spectral import phase_shift, phase_shift_rows

TWO_PI = PERIOD


def _integer_xcorr(curve: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """r(j) = sum_i curve[i + j] * mean[i] for all circular lags j."""
    return np.fft.ifft(np.fft.fft(curve) * np.conj(np.fft.fft(mean))).real


def _ssd(aligned: np.ndarray, mean: np.ndarray) -> float:
    diff = aligned - mean
    return float(diff @ diff)


def lse_align(curve_set: CurveSet, max_rounds: int = 50, tol: float = 1e-6) -> AlignmentResult:
    """Least-squares registration: alternate between the mean of the aligned
    curves and per-curve shifts minimizing squared distance to it.

    Each round searches every integer circular lag, refines the best one by
    parabolic interpolation over its two neighbors, and keeps whichever of
    {current shift, integer best, refined best} has the lowest squared
    distance, so the total objective never increases.  Shifts are re-anchored
    every round so the reference stays at 0.
    """
    if max_rounds < 1:
        raise InputError(f"max_rounds must be >= 1, got {max_rounds}")
    if tol <= 0:
        raise InputError(f"tol must be > 0, got {tol}")
    matrix = curve_set.matrix
    m_plus_1, n = matrix.shape
    bin_width = TWO_PI / n
    delta = np.zeros(m_plus_1)
    history: list[float] = []
    rounds_used = 0
    converged = False
    for rounds_used in range(1, max_rounds + 1):
        aligned = phase_shift_rows(matrix, delta)
        mean = aligned.mean(axis=0)
        new_delta = np.empty_like(delta)
        for l in range(m_plus_1):
            r = _integer_xcorr(matrix[l], mean)
            j = int(np.argmax(r))
            candidates = [delta[l], j * bin_width]
            rm, r0, rp = r[(j - 1) % n], r[j], r[(j + 1) % n]
            curv = rm - 2.0 * r0 + rp
            if curv < 0:
                offset = 0.5 * (rm - rp) / curv
                candidates.append((j + offset) * bin_width)
            best_ssd = np.inf
            best_shift = delta[l]
            for cand in candidates:
                s = _ssd(phase_shift(matrix[l], cand), mean)
                if s < best_ssd:
                    best_ssd = s
                    best_shift = cand
            new_delta[l] = best_shift
        update = float(np.max(circular_distance(new_delta, delta)))
        delta = np.mod(new_delta - new_delta[0], TWO_PI)
        aligned = phase_shift_rows(matrix, delta)
        mean = aligned.mean(axis=0)
        history.append(float(((aligned - mean) ** 2).sum()))
        if update < tol:
            converged = True
            break
    return AlignmentResult(
        theta_hat=delta,
        block_ids=np.zeros(m_plus_1, dtype=int),
        objectives=tuple(history),
        normalized_objectives=tuple(history),
        iterations=(rounds_used,),
        converged=(converged,),
        method="lse",
        config={"max_rounds": max_rounds, "tol": tol},
    )


def landmark_align(curve_set: CurveSet) -> AlignmentResult:
    """Align curves by their sample maxima (ties break to the smallest index)."""
    matrix = curve_set.matrix
    n = curve_set.n
    for row, curve in enumerate(matrix):
        if np.ptp(curve) == 0.0:
            raise DegenerateLandmarkError(f"curve {row} is constant; it has no landmark")
    peaks = np.argmax(matrix, axis=1)
    theta = np.mod((peaks - peaks[0]) * (TWO_PI / n), TWO_PI)
    return AlignmentResult(
        theta_hat=theta,
        block_ids=np.zeros(matrix.shape[0], dtype=int),
        objectives=(0.0,),
        normalized_objectives=(0.0,),
        iterations=(1,),
        converged=(True,),
        method="landmark",
        config={},
    )
