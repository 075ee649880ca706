"""Block-wise shift estimation by multistart gradient descent on the spectral cost.

Estimates are reference-relative: the reference curve's shift is pinned to 0,
and every other estimate is the correction that best re-aligns its curve with
the weighted block average.  Scoring against absolute truth therefore either
re-anchors the truth to its own reference entry or adds the known reference
shift back to the estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .curves import PERIOD, BlockPlan, CurveSet
from .errors import InputError, NumericalError
from .spectral import (
    FrequencyGrid,
    FrequencyWeights,
    ShiftVector,
    SpectralSet,
    cost_scale,
    dft_coeffs,
    max_grid_k,
)

TWO_PI = PERIOD

DEFAULT_BAND_K_MAX = 75

# Armijo sufficient-decrease constant and backtracking limits.
ARMIJO_C1 = 1e-4
MAX_BACKTRACKS = 60
MIN_STEP = 1e-15


@dataclass(frozen=True)
class AlignConfig:
    """Settings for the block minimizer.

    ``ref_weight`` overrides the floor(K**lambda_exponent) reference weight
    when set; ``band_k_max`` caps the flat weighted band (clipped to the grid
    bound for short curves).  ``grad_tol`` applies to the sup-norm gradient of
    the scale-normalized objective, making it independent of signal energy.
    """

    lambda_exponent: float = 0.9
    optimizer: str = "multistart-gradient"
    max_iters: int = 500
    grad_tol: float = 1e-9
    n_starts: int = 3
    rng_seed: int = 0
    ref_weight: float | None = None
    band_k_max: int = DEFAULT_BAND_K_MAX

    def __post_init__(self) -> None:
        if not (0.0 < self.lambda_exponent < 1.0):
            raise InputError(
                f"lambda_exponent must lie in (0, 1), got {self.lambda_exponent}"
            )
        if self.optimizer != "multistart-gradient":
            raise InputError(f"unknown optimizer {self.optimizer!r}")
        if self.max_iters < 1 or self.n_starts < 1:
            raise InputError("max_iters and n_starts must be >= 1")
        if self.grad_tol <= 0:
            raise InputError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.ref_weight is not None and self.ref_weight <= 0:
            raise InputError(f"ref_weight must be > 0, got {self.ref_weight}")
        if self.band_k_max < 1:
            raise InputError(f"band_k_max must be >= 1, got {self.band_k_max}")

    def ref_weight_for(self, block_size: int) -> float:
        if self.ref_weight is not None:
            return float(self.ref_weight)
        return float(max(1, math.floor(block_size**self.lambda_exponent)))

    def weights_for(self, n: int) -> FrequencyWeights:
        k_max = min(self.band_k_max, max_grid_k(n))
        grid = FrequencyGrid(k_max)
        return FrequencyWeights.flat_band(grid)

    def to_dict(self) -> dict:
        return {
            "lambda_exponent": self.lambda_exponent,
            "optimizer": self.optimizer,
            "max_iters": self.max_iters,
            "grad_tol": self.grad_tol,
            "n_starts": self.n_starts,
            "rng_seed": self.rng_seed,
            "ref_weight": self.ref_weight,
            "band_k_max": self.band_k_max,
        }


@dataclass(frozen=True)
class BlockFit:
    """Outcome of minimizing one block."""

    shifts: ShiftVector
    objective: float
    normalized_objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class AlignmentResult:
    """Shift estimates for a whole curve set (reference entry = 0)."""

    theta_hat: np.ndarray
    block_ids: np.ndarray
    objectives: tuple[float, ...]
    normalized_objectives: tuple[float, ...]
    iterations: tuple[int, ...]
    converged: tuple[bool, ...]
    method: str
    config: dict

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta_hat, dtype=float)
        if theta[0] != 0.0:
            raise InputError("reference estimate must be 0")
        if not np.all(np.isfinite(theta)):
            raise InputError("non-finite shift estimates")
        theta = np.mod(theta, TWO_PI)
        theta.setflags(write=False)
        object.__setattr__(self, "theta_hat", theta)
        blocks = np.asarray(self.block_ids, dtype=int)
        blocks.setflags(write=False)
        object.__setattr__(self, "block_ids", blocks)


# --- initialization ---------------------------------------------------------


def init_shifts_xcorr(curve_set: CurveSet, block: Sequence[int]) -> ShiftVector:
    """Per-curve circular cross-correlation initializer against the reference.

    Returns the grid shift (in radians) maximizing the circular
    cross-correlation of each block curve with the reference; ties break to
    the smallest shift.  Constant curves correlate equally everywhere and
    fall back to 0.
    """
    block = tuple(int(i) for i in block)
    matrix = curve_set.matrix
    n = curve_set.n
    ref_fft = np.fft.fft(matrix[block[0]])
    alpha = np.zeros(len(block))
    for pos, idx in enumerate(block[1:], start=1):
        xcorr = np.fft.ifft(np.fft.fft(matrix[idx]) * np.conj(ref_fft)).real
        alpha[pos] = np.argmax(xcorr) * (TWO_PI / n)
    return ShiftVector(alpha=alpha)


def _check_grid(spec: SpectralSet, weights: FrequencyWeights) -> None:
    if weights.grid.k_max != spec.grid.k_max:
        raise InputError(
            f"spectral set grid |k| <= {spec.grid.k_max} does not match configured band"
            f" |k| <= {weights.grid.k_max}; build the set with a config-compatible grid"
        )


def _iterated_matched_lags(
    coeffs: np.ndarray, k: np.ndarray, nu: np.ndarray, n: int, rounds: int = 4
) -> np.ndarray:
    """Grid lags from band-limited circular cross-correlation against a template.

    The template starts as the reference row and is re-averaged from the
    phase-aligned coefficients after each pass, so later passes correlate
    against a much less noisy curve than the raw reference.  Lag 0 wins ties
    (argmax picks the first index).  Row 0 is pinned at lag 0 throughout.
    """
    lags = np.arange(n) * (TWO_PI / n)
    phase_table = np.exp(1j * np.outer(lags, k))
    alpha = np.zeros(coeffs.shape[0])
    template = coeffs[0]
    for _ in range(rounds + 1):
        prod = nu[None, :] * coeffs * np.conj(template)[None, :]
        scores = np.real(prod @ phase_table.T)
        new = lags[np.argmax(scores, axis=1)]
        new[0] = 0.0
        if np.array_equal(new, alpha):
            break
        alpha = new
        template = (coeffs * np.exp(1j * np.outer(alpha, k))).mean(axis=0)
    return alpha


def matched_filter_init(
    spec: SpectralSet, weights: FrequencyWeights, rounds: int = 4
) -> np.ndarray:
    """Initial shift estimates for every curve in the set at grid resolution."""
    _check_grid(spec, weights)
    return _iterated_matched_lags(
        spec.coeffs, spec.grid.k_values.astype(float), weights.nu, spec.n, rounds
    )


def _spectral_init(
    spec: SpectralSet, block: Sequence[int], weights: FrequencyWeights
) -> ShiftVector:
    """Block-local initializer used when no global estimate is at hand."""
    block = list(int(i) for i in block)
    alpha = _iterated_matched_lags(
        spec.coeffs[block], spec.grid.k_values.astype(float), weights.nu, spec.n
    )
    return ShiftVector(alpha=alpha)


# --- gradient descent core ---------------------------------------------------


def _make_objective(
    spec: SpectralSet,
    block: Sequence[int],
    ref_weight: float,
    weights: FrequencyWeights,
) -> tuple[Callable[[np.ndarray], float], Callable[[np.ndarray], tuple[float, np.ndarray]], float]:
    """Closures for the normalized objective and its gradient over free shifts."""
    block = tuple(int(i) for i in block)
    f_ref = spec.coeffs[block[0]]
    f_others = spec.coeffs[list(block[1:])]
    k = spec.grid.k_values.astype(float)
    nu = weights.nu
    mean_esd = spec.mean_esd
    denom = f_others.shape[0] + ref_weight
    scale = cost_scale(spec, weights)
    if scale <= 0 or not np.isfinite(scale):
        raise NumericalError("cost scale is zero or non-finite; curves carry no energy in the band")

    def value(alpha_free: np.ndarray) -> float:
        z = (ref_weight * f_ref + (np.exp(1j * np.outer(alpha_free, k)) * f_others).sum(axis=0)) / denom
        c = mean_esd - np.abs(z) ** 2
        return float(np.sum(nu * c * c)) / scale

    def value_grad(alpha_free: np.ndarray) -> tuple[float, np.ndarray]:
        rotated = np.exp(1j * np.outer(alpha_free, k)) * f_others
        z = (ref_weight * f_ref + rotated.sum(axis=0)) / denom
        c = mean_esd - np.abs(z) ** 2
        val = float(np.sum(nu * c * c)) / scale
        w = nu * c * k * np.conj(z)
        grad = (4.0 / denom) * (rotated * w).sum(axis=1).imag / scale
        return val, grad

    return value, value_grad, scale


def _descend(
    value: Callable[[np.ndarray], float],
    value_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    max_iters: int,
    grad_tol: float,
    block_id: int,
) -> tuple[np.ndarray, float, int, bool]:
    """Armijo-backtracking gradient descent with an expanding step restart."""
    x = np.mod(x0, TWO_PI)
    f, g = value_grad(x)
    if not np.isfinite(f):
        raise NumericalError(f"block {block_id}: non-finite objective at the start point")
    step = 1.0
    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        g_sup = float(np.max(np.abs(g)))
        if g_sup < grad_tol:
            converged = True
            break
        step = min(step * 2.0, 1e8)
        gg = float(g @ g)
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            candidate = np.mod(x - step * g, TWO_PI)
            f_new = value(candidate)
            if not np.isfinite(f_new):
                raise NumericalError(f"block {block_id}: non-finite objective during line search")
            if f_new <= f - ARMIJO_C1 * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted or step * g_sup < MIN_STEP:
            break  # stalled at numerical precision; convergence judged by g_sup
        x = candidate
        f, g = value_grad(x)
    else:
        iterations = max_iters
    if not converged:
        converged = float(np.max(np.abs(g))) < grad_tol
    return x, f, iterations, converged


def minimize_block(
    spec: SpectralSet,
    block: Sequence[int],
    config: AlignConfig,
    init: ShiftVector | None = None,
    block_id: int = 0,
) -> BlockFit:
    """Minimize the block cost from the cross-correlation initializer.

    Runs gradient descent with Armijo backtracking from ``init`` plus
    ``n_starts - 1`` seeded random perturbations of it (uniform within
    +/- 2 grid bins per coordinate), and keeps the best candidate.
    """
    weights = config.weights_for(spec.n)
    _check_grid(spec, weights)
    block = tuple(int(i) for i in block)
    k_free = len(block) - 1
    ref_weight = config.ref_weight_for(k_free)
    if init is None:
        init = _spectral_init(spec, block, weights)
    if init.alpha.size != len(block):
        raise InputError(
            f"initializer length {init.alpha.size} does not match block size {len(block)}"
        )
    value, value_grad, scale = _make_objective(spec, block, ref_weight, weights)

    rng = np.random.default_rng(np.random.SeedSequence((config.rng_seed, block_id)))
    bin_width = TWO_PI / spec.n
    starts = [init.free.copy()]
    for _ in range(config.n_starts - 1):
        jitter = rng.uniform(-2.0 * bin_width, 2.0 * bin_width, size=k_free)
        starts.append(np.mod(init.free + jitter, TWO_PI))

    best: tuple[float, np.ndarray, int, bool] | None = None
    total_iterations = 0
    for x0 in starts:
        x, f, iters, conv = _descend(
            value, value_grad, x0, config.max_iters, config.grad_tol, block_id
        )
        total_iterations += iters
        if best is None or f < best[0]:
            best = (f, x, iters, conv)
    assert best is not None
    f_best, x_best, _, conv_best = best
    alpha = np.concatenate(([0.0], x_best))
    return BlockFit(
        shifts=ShiftVector(alpha=alpha, block_id=block_id),
        objective=f_best * scale,
        normalized_objective=f_best,
        iterations=total_iterations,
        converged=conv_best,
    )


def align_all(
    curve_set: CurveSet,
    plan: BlockPlan,
    config: AlignConfig,
    threads: int = 1,
) -> AlignmentResult:
    """Estimate all shifts block by block (blocks are independent).

    With ``threads > 1`` blocks run in a thread pool; per-block seeds derive
    from (rng_seed, block index), so results do not depend on the worker
    count or processing order.
    """
    weights = config.weights_for(curve_set.n)
    spec = dft_coeffs(curve_set, weights.grid)
    expected = plan.n_blocks * plan.block_size + 1
    if expected != curve_set.n_curves:
        raise InputError(
            f"plan covers {expected} curves but the set has {curve_set.n_curves}"
        )
    # one global initializer pass: the template averages every curve, so the
    # per-curve start is far less noisy than anything a single block can offer
    global_lags = matched_filter_init(spec, weights)

    def fit_one(item: tuple[int, Sequence[int]]) -> BlockFit:
        b_idx, block = item
        block = list(block)
        start = np.mod(global_lags[block] - global_lags[block[0]], TWO_PI)
        start[0] = 0.0
        return minimize_block(
            spec, block, config, init=ShiftVector(alpha=start, block_id=b_idx), block_id=b_idx
        )

    items = list(enumerate(plan.blocks, start=1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(fit_one, items))
    else:
        fits = [fit_one(it) for it in items]

    theta = np.zeros(curve_set.n_curves)
    block_ids = np.zeros(curve_set.n_curves, dtype=int)
    for (b_idx, block), fit in zip(items, fits):
        for pos, idx in enumerate(block[1:], start=1):
            theta[idx] = fit.shifts.alpha[pos]
            block_ids[idx] = b_idx
    return AlignmentResult(
        theta_hat=theta,
        block_ids=block_ids,
        objectives=tuple(f.objective for f in fits),
        normalized_objectives=tuple(f.normalized_objective for f in fits),
        iterations=tuple(f.iterations for f in fits),
        converged=tuple(f.converged for f in fits),
        method="spectral",
        config=config.to_dict(),
    )


# --- block-size selection -----------------------------------------------------


@dataclass(frozen=True)
class BlockSizeChoice:
    """Outcome of the block-size rule; ``threshold_met`` is False on fallback."""

    block_size: int
    threshold_met: bool
    criterion: dict[int, float]


def select_block_size(
    spec: SpectralSet,
    weights: FrequencyWeights,
    epsilon: float,
    k_grid: Sequence[int],
) -> BlockSizeChoice:
    """Smallest candidate L whose leading-(L+1) partial mean ESD is within
    epsilon (weighted squared distance) of the global mean ESD; falls back to
    the largest candidate with ``threshold_met=False`` when none qualifies."""
    if epsilon <= 0:
        raise InputError(f"epsilon must be > 0, got {epsilon}")
    candidates = sorted(set(int(k) for k in k_grid))
    if not candidates:
        raise InputError("empty block-size candidate list")
    if candidates[0] < 1:
        raise InputError(f"block-size candidates must be >= 1, got {candidates[0]}")
    if candidates[-1] >= spec.n_curves:
        raise InputError(
            f"candidate {candidates[-1]} needs {candidates[-1] + 1} curves, set has {spec.n_curves}"
        )
    esd_all = np.abs(spec.coeffs) ** 2
    partial_sums = np.cumsum(esd_all, axis=0)
    crit: dict[int, float] = {}
    for candidate in candidates:
        partial_mean = partial_sums[candidate] / (candidate + 1)
        diff = spec.mean_esd - partial_mean
        crit[candidate] = float(np.sum(weights.nu * diff * diff))
        if crit[candidate] <= epsilon:
            return BlockSizeChoice(block_size=candidate, threshold_met=True, criterion=crit)
    return BlockSizeChoice(block_size=candidates[-1], threshold_met=False, criterion=crit)


# --- error metrics ------------------------------------------------------------


def circular_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d(a, b) = min(|a-b|, 2*pi - |a-b|) elementwise."""
    diff = np.abs(np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), TWO_PI))
    return np.minimum(diff, TWO_PI - diff)


def circular_mean(values: np.ndarray) -> float:
    """Angle of the mean phasor, in [0, 2*pi); 0 for an empty input."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    phasor = np.exp(1j * values).mean()
    if np.abs(phasor) < 1e-12:
        return 0.0
    return float(np.mod(np.angle(phasor), TWO_PI))


@dataclass(frozen=True)
class ErrorSummary:
    distances: np.ndarray
    rms: float
    max: float
    fraction_beyond: float | None
    tolerance: float | None


def circular_error(
    theta_hat: np.ndarray,
    theta_true: np.ndarray,
    tolerance: float | None = None,
) -> ErrorSummary:
    """Per-curve circular distances plus RMS/max (and an exceedance fraction)."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_hat.shape != theta_true.shape:
        raise InputError(
            f"estimate length {theta_hat.shape} differs from truth length {theta_true.shape}"
        )
    d = circular_distance(theta_hat, theta_true)
    frac = None
    if tolerance is not None:
        frac = float(np.mean(d > tolerance))
    d_ro = d.copy()
    d_ro.setflags(write=False)
    return ErrorSummary(
        distances=d_ro,
        rms=float(np.sqrt(np.mean(d**2))),
        max=float(np.max(d)),
        fraction_beyond=frac,
        tolerance=tolerance,
    )


def relative_truth(theta_true: np.ndarray) -> np.ndarray:
    """Truth re-anchored to its reference entry: (theta - theta[0]) mod 2*pi."""
    theta_true = np.asarray(theta_true, dtype=float)
    return np.mod(theta_true - theta_true[0], TWO_PI)


def block_offset_diagnostics(
    result: AlignmentResult, theta_true: np.ndarray, plan: BlockPlan
) -> list[dict]:
    """Per-block circular mean offset c_m of (estimate - relative truth) and the
    within-block RMS dispersion around it."""
    rel = relative_truth(theta_true)
    rows = []
    for b_idx, block in enumerate(plan.blocks, start=1):
        idx = list(block[1:])
        err = np.mod(result.theta_hat[idx] - rel[idx], TWO_PI)
        c_m = circular_mean(err)
        dispersion = float(np.sqrt(np.mean(circular_distance(err, np.full(len(idx), c_m)) ** 2)))
        offset = min(c_m, TWO_PI - c_m)  # distance of the offset from 0
        rows.append(
            {
                "block": b_idx,
                "offset": offset,
                "offset_angle": c_m,
                "dispersion": dispersion,
            }
        )
    return rows


# --- CSV interface --------------------------------------------------------------


def write_alignment_csv(result: AlignmentResult, path: str | Path) -> None:
    """Columns: curve_id, block_id, theta_hat, objective[, method].

    The reference row carries block 0 and objective 0.  The method column is
    emitted for baseline methods so mixed tables stay unambiguous.
    """
    path = Path(path)
    objectives = dict(enumerate(result.objectives, start=1))
    with_method = result.method != "spectral"
    final_obj = result.objectives[-1] if result.objectives else 0.0
    header = "curve_id,block_id,theta_hat,objective"
    if with_method:
        header += ",method"
    lines = [header]
    for curve_id, (theta, block_id) in enumerate(zip(result.theta_hat, result.block_ids)):
        obj = final_obj if with_method else objectives.get(int(block_id), 0.0)
        row = f"{curve_id},{int(block_id)},{theta:.17g},{obj:.17g}"
        if with_method:
            row += f",{result.method}"
        lines.append(row)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_shifts_csv(path: str | Path) -> np.ndarray:
    """Read theta_hat from an alignment CSV (or any CSV with that column)."""
    path = Path(path)
    lines = [
        ln.strip()
        for ln in path.read_text(encoding="utf-8").splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines:
        raise InputError(f"{path}: no data rows")
    header = [h.strip() for h in lines[0].split(",")]
    if "theta_hat" in header:
        col = header.index("theta_hat")
    elif "theta" in header:
        col = header.index("theta")
    else:
        raise InputError(
            f"{path}: expected a 'theta_hat' or 'theta' column, found {header}"
        )
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        try:
            values.append(float(cells[col]))
        except (ValueError, IndexError):
            raise InputError(f"{path}: line {lineno}: cannot read shift value") from None
    return np.asarray(values)
