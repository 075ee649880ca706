"""Shift estimation and shift-density recovery for repeated noisy signals.

The pipeline: segment or simulate a set of identically shaped, randomly
delayed curves; estimate every delay by minimizing a spectral block cost
against a reference-weighted average; then recover the delay distribution
with a plug-in kernel density estimate.
"""

__version__ = "0.1.0"

from .align import (
    AlignConfig,
    AlignmentResult,
    align_all,
    circular_distance,
    circular_error,
    init_shifts_xcorr,
    matched_filter_init,
    minimize_block,
    select_block_size,
)
from .baseline import landmark_align, lse_align
from .curves import (
    BlockPlan,
    CurveSet,
    SampledCurve,
    load_curves,
    make_blocks,
    save_curves,
    segment_maxima,
)
from .density import (
    DensityEstimate,
    ise,
    kde,
    ks_distance_uniform,
    mise,
    silverman_bandwidth,
    uniform_pdf,
)
from .simgen import (
    NoiseSpec,
    PulseSpec,
    Scenario,
    ShiftLawSpec,
    baseline_wander,
    gen_dataset,
    gen_pulse,
    generate_scenario,
    powerline,
    scenario_from_dict,
)
from .spectral import (
    FrequencyGrid,
    FrequencyWeights,
    ShiftVector,
    SpectralSet,
    block_avg_esd,
    cost,
    cost_gradient,
    dft_coeffs,
    esd,
    noise_free_cost,
    phase_shift,
)

__all__ = [
    "AlignConfig",
    "AlignmentResult",
    "BlockPlan",
    "CurveSet",
    "DensityEstimate",
    "FrequencyGrid",
    "FrequencyWeights",
    "NoiseSpec",
    "PulseSpec",
    "SampledCurve",
    "Scenario",
    "ShiftLawSpec",
    "ShiftVector",
    "SpectralSet",
    "align_all",
    "baseline_wander",
    "block_avg_esd",
    "circular_distance",
    "circular_error",
    "cost",
    "cost_gradient",
    "dft_coeffs",
    "esd",
    "gen_dataset",
    "gen_pulse",
    "generate_scenario",
    "init_shifts_xcorr",
    "matched_filter_init",
    "ise",
    "kde",
    "ks_distance_uniform",
    "landmark_align",
    "load_curves",
    "lse_align",
    "make_blocks",
    "minimize_block",
    "mise",
    "noise_free_cost",
    "phase_shift",
    "powerline",
    "save_curves",
    "scenario_from_dict",
    "segment_maxima",
    "select_block_size",
    "silverman_bandwidth",
    "uniform_pdf",
    "__version__",
]
