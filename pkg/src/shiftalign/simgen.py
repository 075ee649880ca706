"""Synthetic dataset generation and recording-artifact perturbations.

Datasets follow the periodic shift model: every curve is the same pulse
delayed by a random amount on [0, 2*pi), plus white Gaussian noise.  The
pulse and the shift law must jointly fit inside one period (the pulse's
numeric support [0, T_s] plus the largest shift must stay below 2*pi), so
delayed copies never wrap around the record boundary.

Seed discipline: a master seed spawns one child per curve index, and that
child spawns separate streams for the shift draw and the noise, so growing
M or toggling the noise level never reshuffles earlier curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .curves import PERIOD, CurveSet
from .errors import AssumptionError, InputError, NoSpikeError
from .spectral import phase_shift

TWO_PI = PERIOD

# Shift-law defaults used throughout the simulation protocol.
DEFAULT_SHIFT_A = 120.0 * np.pi / 256.0
DEFAULT_SHIFT_B = 325.0 * np.pi / 256.0
DEFAULT_THETA0 = float(np.pi)

# Squid-axon membrane constants (mS/cm^2, mV, uF/cm^2).
HH_C_M = 1.0
HH_G_NA = 120.0
HH_G_K = 36.0
HH_G_L = 0.3
HH_E_NA = 50.0
HH_E_K = -77.0
HH_E_L = -54.387
HH_V_REST = -65.0

# Pinned stimulus profile: a current step of (10 * stim_scale) uA/cm^2
# between 1 ms and 3 ms; stim_scale = 1 elicits exactly one spike.
HH_BASE_STIM = 10.0
HH_STIM_START_MS = 1.0
HH_STIM_DUR_MS = 2.0
HH_SIM_MS = 40.0
HH_DT_MS = 0.01

# Fraction of rest-to-peak amplitude below which the membrane counts as recovered.
HH_RECOVERY_FRAC = 2e-3


@dataclass(frozen=True)
class PulseSpec:
    """Pulse prototype description.

    ``support_end`` is T_s, the right edge of the pulse's numeric support;
    for the closed-form kinds it defaults to center + 6*width (gaussian,
    whose tails are < 1e-6 beyond that) or center + width (raised-cosine,
    exactly zero beyond).  The excitable-membrane pulse is integrated once
    and its action potential is compressed into [0, support_end].
    """

    kind: str = "gaussian"
    center: float = 1.1
    width: float = 0.18
    support_end: float | None = None
    stim_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "raised-cosine", "hodgkin-huxley"):
            raise InputError(f"unknown pulse kind {self.kind!r}")
        if self.kind in ("gaussian", "raised-cosine"):
            if self.width <= 0:
                raise InputError(f"pulse width must be > 0, got {self.width}")
            margin = 6.0 * self.width if self.kind == "gaussian" else self.width
            if self.center - margin < 0:
                raise AssumptionError(
                    f"pulse support extends below 0 (center {self.center}, margin {margin:.4g})"
                )
        if self.stim_scale <= 0:
            raise InputError(f"stim_scale must be > 0, got {self.stim_scale}")
        t_s = self.t_s
        if not (0 < t_s < TWO_PI):
            raise AssumptionError(f"pulse support end {t_s:.4g} must lie inside (0, 2*pi)")

    @property
    def t_s(self) -> float:
        if self.support_end is not None:
            return float(self.support_end)
        if self.kind == "gaussian":
            return self.center + 6.0 * self.width
        if self.kind == "raised-cosine":
            return self.center + self.width
        return 2.2  # default window for the integrated pulse

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": self.center,
            "width": self.width,
            "support_end": self.support_end,
            "stim_scale": self.stim_scale,
        }


@dataclass(frozen=True)
class ShiftLawSpec:
    """Law of the random delays plus the fixed, known reference delay."""

    law: str = "uniform"
    a: float = DEFAULT_SHIFT_A
    b: float = DEFAULT_SHIFT_B
    theta0: float = DEFAULT_THETA0

    def __post_init__(self) -> None:
        if self.law not in ("uniform", "discrete-grid"):
            raise InputError(f"unknown shift law {self.law!r}")
        if not (0 < self.a < self.b < TWO_PI):
            raise InputError(
                f"shift support must satisfy 0 < a < b < 2*pi, got a={self.a}, b={self.b}"
            )
        if not (0 <= self.theta0 < TWO_PI):
            raise InputError(f"theta0 must lie in [0, 2*pi), got {self.theta0}")

    def to_dict(self) -> dict:
        return {"law": self.law, "a": self.a, "b": self.b, "theta0": self.theta0}


@dataclass(frozen=True)
class NoiseSpec:
    sigma2: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma2 < 0:
            raise InputError(f"noise variance must be >= 0, got {self.sigma2}")

    def to_dict(self) -> dict:
        return {"sigma2": self.sigma2, "seed": self.seed}


# --- pulse generation -------------------------------------------------------


def _hh_rates(v: float) -> tuple[float, float, float, float, float, float]:
    # Standard alpha/beta gating rates; the 0/0 removable singularities are
    # handled by their analytic limits.
    dv40 = v + 40.0
    alpha_m = 1.0 if abs(dv40) < 1e-9 else 0.1 * dv40 / (1.0 - math.exp(-dv40 / 10.0))
    beta_m = 4.0 * math.exp(-(v + 65.0) / 18.0)
    alpha_h = 0.07 * math.exp(-(v + 65.0) / 20.0)
    beta_h = 1.0 / (1.0 + math.exp(-(v + 35.0) / 10.0))
    dv55 = v + 55.0
    alpha_n = 0.1 if abs(dv55) < 1e-9 else 0.01 * dv55 / (1.0 - math.exp(-dv55 / 10.0))
    beta_n = 0.125 * math.exp(-(v + 65.0) / 80.0)
    return alpha_m, beta_m, alpha_h, beta_h, alpha_n, beta_n


def _hh_derivatives(state: np.ndarray, current: float) -> np.ndarray:
    v, m, h, n = state
    am, bm, ah, bh, an, bn = _hh_rates(v)
    i_na = HH_G_NA * m**3 * h * (v - HH_E_NA)
    i_k = HH_G_K * n**4 * (v - HH_E_K)
    i_l = HH_G_L * (v - HH_E_L)
    return np.array(
        [
            (current - i_na - i_k - i_l) / HH_C_M,
            am * (1.0 - m) - bm * m,
            ah * (1.0 - h) - bh * h,
            an * (1.0 - n) - bn * n,
        ]
    )


def _integrate_membrane(stim_scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step fourth-order integration of the membrane equations.

    Returns (time in ms, V in mV) starting from the resting steady state.
    """
    am, bm, ah, bh, an, bn = _hh_rates(HH_V_REST)
    state = np.array(
        [HH_V_REST, am / (am + bm), ah / (ah + bh), an / (an + bn)]
    )
    steps = int(round(HH_SIM_MS / HH_DT_MS))
    times = np.arange(steps + 1) * HH_DT_MS
    voltage = np.empty(steps + 1)
    voltage[0] = state[0]
    amp = HH_BASE_STIM * stim_scale
    dt = HH_DT_MS
    for i in range(steps):
        t = times[i]
        # the stimulus is held constant across a step, so mid-step evaluations
        # use the same current
        current = amp if HH_STIM_START_MS <= t < HH_STIM_START_MS + HH_STIM_DUR_MS else 0.0
        k1 = _hh_derivatives(state, current)
        k2 = _hh_derivatives(state + 0.5 * dt * k1, current)
        k3 = _hh_derivatives(state + 0.5 * dt * k2, current)
        k4 = _hh_derivatives(state + dt * k3, current)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        voltage[i + 1] = state[0]
    return times, voltage


def _spike_count(voltage: np.ndarray, threshold: float = 0.0) -> int:
    above = voltage > threshold
    return int(np.sum(~above[:-1] & above[1:]))


def _membrane_pulse_template(stim_scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Extract the single action potential as a normalized template on [0, 1]."""
    times, voltage = _integrate_membrane(stim_scale)
    if _spike_count(voltage) < 1:
        raise NoSpikeError(
            f"stimulus scale {stim_scale} is below threshold; no action potential fired"
        )
    v_rel = voltage - voltage[0]
    onset = int(np.searchsorted(times, HH_STIM_START_MS))
    peak = int(np.argmax(v_rel))
    amplitude = v_rel[peak]
    recovered = np.where(np.abs(v_rel[peak:]) < HH_RECOVERY_FRAC * amplitude)[0]
    end = peak + int(recovered[0]) if recovered.size else v_rel.size - 1
    window = v_rel[onset : end + 1] / amplitude
    # raised-cosine fade over the trailing 8% so the template lands exactly at 0
    fade_len = max(2, int(0.08 * window.size))
    fade = 0.5 * (1.0 + np.cos(np.linspace(0.0, np.pi, fade_len)))
    window = window.copy()
    window[-fade_len:] *= fade
    window[0] = 0.0
    tau = (times[onset : end + 1] - times[onset]) / (times[end] - times[onset])
    return tau, window


def gen_pulse(spec: PulseSpec, n: int) -> np.ndarray:
    """Sample the pulse prototype on the n-point grid over [0, 2*pi)."""
    if n < 4:
        raise InputError(f"need n >= 4 samples, got {n}")
    t = np.arange(n) * (TWO_PI / n)
    if spec.kind == "gaussian":
        return np.exp(-((t - spec.center) ** 2) / (2.0 * spec.width**2))
    if spec.kind == "raised-cosine":
        out = np.zeros(n)
        inside = np.abs(t - spec.center) <= spec.width
        out[inside] = 0.5 * (1.0 + np.cos(np.pi * (t[inside] - spec.center) / spec.width))
        return out
    tau, template = _membrane_pulse_template(spec.stim_scale)
    t_s = spec.t_s
    out = np.zeros(n)
    inside = t <= t_s
    out[inside] = np.interp(t[inside] / t_s, tau, template)
    return out


# --- dataset generation -------------------------------------------------------


def _curve_streams(master_seed: int, curve_index: int) -> tuple[np.random.Generator, np.random.Generator]:
    children = np.random.SeedSequence((master_seed, curve_index)).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def _draw_shift(law: ShiftLawSpec, rng: np.random.Generator, n: int) -> float:
    if law.law == "uniform":
        return float(rng.uniform(law.a, law.b))
    bin_width = TWO_PI / n
    lo = int(np.ceil(law.a / bin_width))
    hi = int(np.floor(law.b / bin_width))
    if hi < lo:
        raise InputError(f"no grid points inside [{law.a}, {law.b}] at n={n}")
    return float(rng.integers(lo, hi + 1) * bin_width)


def gen_dataset(
    pulse: PulseSpec,
    shift_law: ShiftLawSpec,
    noise: NoiseSpec,
    m_curves: int,
    n: int,
    on_grid: bool = False,
) -> tuple[CurveSet, np.ndarray]:
    """Generate the reference plus ``m_curves`` shifted noisy copies.

    Off-grid shifts are applied by exact spectral phase rotation; with
    ``on_grid`` every drawn shift is rounded to the sample grid and applied
    by circular roll, and the rounded values are what the returned truth
    records.  Returns (curves, true_shifts); entry 0 of the truth is theta0.
    """
    if m_curves < 0:
        raise InputError(f"m_curves must be >= 0, got {m_curves}")
    t_s = pulse.t_s
    if shift_law.b + t_s >= TWO_PI or shift_law.theta0 + t_s >= TWO_PI:
        raise AssumptionError(
            f"pulse support [0, {t_s:.4g}] plus shifts up to "
            f"{max(shift_law.b, shift_law.theta0):.4g} wraps past 2*pi"
        )
    prototype = gen_pulse(pulse, n)
    bin_width = TWO_PI / n
    sigma = math.sqrt(noise.sigma2)

    matrix = np.empty((m_curves + 1, n))
    truth = np.empty(m_curves + 1)
    for l in range(m_curves + 1):
        shift_rng, noise_rng = _curve_streams(noise.seed, l)
        theta = shift_law.theta0 if l == 0 else _draw_shift(shift_law, shift_rng, n)
        if on_grid:
            j = int(round(theta / bin_width)) % n
            theta = j * bin_width
            curve = np.roll(prototype, j)
        else:
            curve = phase_shift(prototype, -theta)
        if sigma > 0:
            curve = curve + sigma * noise_rng.standard_normal(n)
        matrix[l] = curve
        truth[l] = theta
    return CurveSet.from_matrix(matrix), truth


# --- perturbations --------------------------------------------------------------


def baseline_wander(
    curve_set: CurveSet,
    amplitude: float,
    frequency: float,
    phase: float = 0.0,
    per_curve_phase_seed: int | None = None,
) -> CurveSet:
    """Add slow sinusoidal drift, ``frequency`` cycles across the whole set.

    The curves are treated as consecutive segments of one long record:
    curve l receives amplitude*sin(frequency*(t + 2pi*l)/m_total + phase),
    so a frequency near 1 leaves each curve an almost constant offset, the
    way a slow drift hits beats cut from a strip.  For a single curve this
    reduces to amplitude*sin(frequency*t + phase).  With
    ``per_curve_phase_seed`` the deterministic record layout is replaced by
    an independent uniform phase per curve (segments sampled at unrelated
    positions of the drift).
    """
    if frequency < 0:
        raise InputError(f"frequency must be >= 0, got {frequency}")
    t = curve_set.time_grid
    m_total = len(curve_set)
    rows = []
    for l, curve in enumerate(curve_set):
        if per_curve_phase_seed is not None:
            rng = np.random.default_rng(np.random.SeedSequence((per_curve_phase_seed, l)))
            arg = frequency * t / m_total + phase + rng.uniform(0.0, TWO_PI)
        else:
            arg = frequency * (t + TWO_PI * l) / m_total + phase
        rows.append(curve.samples + amplitude * np.sin(arg))
    return CurveSet.from_matrix(np.stack(rows))


def powerline(
    curve_set: CurveSet,
    a0: float,
    f0: float,
    fs: float,
    amp_jitter_sd: float = 0.0,
    freq_jitter_sd: float = 0.0,
    seed: int = 0,
) -> CurveSet:
    """Add mains-style interference (a0 + xi_A[i]) * sin(2*pi*(f0 + xi_f[i]) * i / fs).

    The jitters are i.i.d. Gaussian per sample and independent across curves.
    """
    if fs <= 0:
        raise InputError(f"fs must be > 0, got {fs}")
    if amp_jitter_sd < 0 or freq_jitter_sd < 0:
        raise InputError("jitter standard deviations must be >= 0")
    n = curve_set.n
    idx = np.arange(n, dtype=float)
    rows = []
    for l, curve in enumerate(curve_set):
        rng = np.random.default_rng(np.random.SeedSequence((seed, l)))
        xi_a = rng.standard_normal(n) * amp_jitter_sd if amp_jitter_sd > 0 else 0.0
        xi_f = rng.standard_normal(n) * freq_jitter_sd if freq_jitter_sd > 0 else 0.0
        interference = (a0 + xi_a) * np.sin(2.0 * np.pi * (f0 + xi_f) * idx / fs)
        rows.append(curve.samples + interference)
    return CurveSet.from_matrix(np.stack(rows))


# --- scenario configs -------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """Complete description of one synthetic dataset."""

    pulse: PulseSpec
    shift_law: ShiftLawSpec
    noise: NoiseSpec
    m_curves: int
    n: int
    on_grid: bool = False
    perturbations: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "pulse": self.pulse.to_dict(),
            "shift_law": self.shift_law.to_dict(),
            "noise": self.noise.to_dict(),
            "M": self.m_curves,
            "n": self.n,
            "on_grid": self.on_grid,
            "perturbations": list(self.perturbations),
        }


def _require(config: dict, key: str, context: str) -> object:
    if key not in config:
        raise InputError(f"{context} missing field {key!r}")
    return config[key]


def scenario_from_dict(config: dict) -> Scenario:
    """Validate and build a Scenario from a parsed JSON config."""
    if not isinstance(config, dict):
        raise InputError("scenario config must be a JSON object")
    pulse_cfg = _require(config, "pulse", "scenario config")
    law_cfg = _require(config, "shift_law", "scenario config")
    noise_cfg = _require(config, "noise", "scenario config")
    m_curves = int(_require(config, "M", "scenario config"))
    n = int(_require(config, "n", "scenario config"))
    known = {"pulse", "shift_law", "noise", "M", "n", "on_grid", "perturbations"}
    unknown = set(config) - known
    if unknown:
        raise InputError(f"scenario config has unknown fields {sorted(unknown)}")
    pulse = PulseSpec(**{k.replace("-", "_"): v for k, v in dict(pulse_cfg).items()})
    law = ShiftLawSpec(**dict(law_cfg))
    noise = NoiseSpec(**dict(noise_cfg))
    perturbations = tuple(config.get("perturbations", ()))
    for p in perturbations:
        kind = _require(p, "type", "perturbation entry")
        if kind not in ("baseline-wander", "powerline"):
            raise InputError(f"unknown perturbation type {kind!r}")
    return Scenario(
        pulse=pulse,
        shift_law=law,
        noise=noise,
        m_curves=m_curves,
        n=n,
        on_grid=bool(config.get("on_grid", False)),
        perturbations=perturbations,
    )


def apply_perturbations(curve_set: CurveSet, perturbations: Sequence[dict]) -> CurveSet:
    for p in perturbations:
        params = {k: v for k, v in p.items() if k != "type"}
        if p["type"] == "baseline-wander":
            curve_set = baseline_wander(curve_set, **{k.replace("-", "_"): v for k, v in params.items()})
        elif p["type"] == "powerline":
            curve_set = powerline(curve_set, **{k.replace("-", "_"): v for k, v in params.items()})
        else:
            raise InputError(f"unknown perturbation type {p['type']!r}")
    return curve_set


def generate_scenario(scenario: Scenario) -> tuple[CurveSet, np.ndarray]:
    """Dataset plus true shifts for a full scenario (perturbations applied)."""
    curve_set, truth = gen_dataset(
        scenario.pulse,
        scenario.shift_law,
        scenario.noise,
        scenario.m_curves,
        scenario.n,
        on_grid=scenario.on_grid,
    )
    curve_set = apply_perturbations(curve_set, scenario.perturbations)
    return curve_set, truth


def write_true_shifts_csv(truth: np.ndarray, path: str | Path) -> None:
    """Columns: curve_id, theta."""
    lines = ["curve_id,theta"]
    for i, theta in enumerate(np.asarray(truth, dtype=float)):
        lines.append(f"{i},{theta:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
