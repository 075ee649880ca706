import numpy as np
import pytest

from shiftalign.density import (
    DensityEstimate,
    density_grid,
    ise,
    kde,
    ks_distance_uniform,
    mise,
    silverman_bandwidth,
    uniform_pdf,
    write_density_csv,
)
from shiftalign.errors import DegenerateSampleError, InputError
from shiftalign.simgen import DEFAULT_SHIFT_A, DEFAULT_SHIFT_B

TWO_PI = 2.0 * np.pi


def test_silverman_engineered_sample_hits_closed_form():
    # IQR/1.34 is exactly 1 and smaller than the std, so h = 0.9 * 100^(-1/5)
    sample = np.concatenate([[-5.0, -5.0], [-0.67] * 48, [0.67] * 48, [5.0, 5.0]])
    h = silverman_bandwidth(sample)
    assert h == pytest.approx(0.9 * 100 ** (-0.2), rel=1e-12)
    assert h == pytest.approx(0.3582964535, rel=1e-9)


def test_silverman_scale_equivariance():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(200)
    assert silverman_bandwidth(3.7 * x) == pytest.approx(3.7 * silverman_bandwidth(x), rel=1e-12)


def test_silverman_rejects_degenerate_samples():
    with pytest.raises(InputError, match="at least 2"):
        silverman_bandwidth(np.array([1.0]))
    with pytest.raises(DegenerateSampleError):
        silverman_bandwidth(np.array([2.0, 2.0, 2.0]))


def test_kde_single_sample_peak_height():
    h = 0.25
    est = kde(np.array([1.3]), h, grid=np.array([1.3]))
    assert est.values[0] == pytest.approx(1.0 / (h * np.sqrt(TWO_PI)), rel=1e-12)
    assert est.kernel == "gaussian" and est.sample_count == 1


def test_kde_integrates_to_one():
    rng = np.random.default_rng(2)
    draws = rng.uniform(1.5, 4.0, 500)
    est = kde(draws, silverman_bandwidth(draws))
    assert est.integral == pytest.approx(1.0, abs=0.02)


def test_kde_translation_equivariance():
    rng = np.random.default_rng(3)
    x = rng.uniform(2.0, 3.0, 100)
    g = np.linspace(1.0, 4.0, 257)
    c = 0.8
    a = kde(x, 0.2, grid=g).values
    b = kde(x + c, 0.2, grid=g + c).values
    assert np.max(np.abs(a - b)) < 1e-12


def test_kde_input_validation():
    with pytest.raises(InputError):
        kde(np.array([]), 0.1)
    with pytest.raises(InputError):
        kde(np.array([1.0, np.nan]), 0.1)
    with pytest.raises(InputError):
        kde(np.array([1.0]), 0.0)


def test_density_estimate_contract():
    with pytest.raises(InputError):
        DensityEstimate(
            grid=np.arange(3.0), values=-np.ones(3), bandwidth=0.1, kernel="gaussian", sample_count=1
        )
    with pytest.raises(InputError):
        DensityEstimate(
            grid=np.arange(3.0), values=np.ones(4), bandwidth=0.1, kernel="gaussian", sample_count=1
        )


def test_ise_zero_when_estimate_equals_truth():
    a, b = 1.0, 4.0
    pdf = uniform_pdf(a, b)
    g = np.linspace(0.0, TWO_PI, 4097)
    est = DensityEstimate(
        grid=g, values=pdf(g), bandwidth=0.1, kernel="gaussian", sample_count=10
    )
    assert ise(est, pdf) == 0.0


def test_ise_constant_offset_hand_value():
    # unit offset over the whole [0, 2*pi] grid integrates to 2*pi
    g = np.linspace(0.0, TWO_PI, 2049)
    est = DensityEstimate(
        grid=g, values=np.ones_like(g), bandwidth=0.1, kernel="gaussian", sample_count=10
    )
    assert ise(est, lambda x: np.zeros_like(x)) == pytest.approx(TWO_PI, rel=1e-12)


def test_mise_is_plain_mean():
    assert mise([0.1, 0.3]) == pytest.approx(0.2)
    with pytest.raises(InputError):
        mise([])


def test_uniform_pdf_inclusive_support():
    pdf = uniform_pdf(1.0, 3.0)
    x = np.array([0.99, 1.0, 2.0, 3.0, 3.01])
    assert np.allclose(pdf(x), [0.0, 0.5, 0.5, 0.5, 0.0])
    with pytest.raises(InputError):
        uniform_pdf(2.0, 2.0)


def test_uniform_recovery_frozen_sample():
    rng = np.random.default_rng(42)
    draws = rng.uniform(DEFAULT_SHIFT_A, DEFAULT_SHIFT_B, 2001)
    h = silverman_bandwidth(draws)
    est = kde(draws, h)
    value = ise(est, uniform_pdf(DEFAULT_SHIFT_A, DEFAULT_SHIFT_B))
    assert h == pytest.approx(0.143803, rel=1e-4)
    assert value == pytest.approx(0.011074, rel=1e-3)
    assert value < 0.05


def test_sup_distance_small_away_from_jumps():
    # boundary bias decays within a few bandwidths of the support edges
    rng = np.random.default_rng(7)
    draws = rng.uniform(DEFAULT_SHIFT_A, DEFAULT_SHIFT_B, 10_000)
    h = silverman_bandwidth(draws)
    est = kde(draws, h)
    height = 1.0 / (DEFAULT_SHIFT_B - DEFAULT_SHIFT_A)
    inner = (est.grid >= DEFAULT_SHIFT_A + 3 * h) & (est.grid <= DEFAULT_SHIFT_B - 3 * h)
    sup = float(np.max(np.abs(est.values[inner] - height)))
    assert sup < 0.1 * height
    assert sup == pytest.approx(0.0218, abs=0.0005)


def test_ise_stable_under_grid_refinement():
    # trapezoid error at the two density jumps decays like 1/points, so the
    # value settles once the grid is appreciably finer than 4096 points
    rng = np.random.default_rng(42)
    draws = rng.uniform(DEFAULT_SHIFT_A, DEFAULT_SHIFT_B, 2001)
    h = silverman_bandwidth(draws)
    pdf = uniform_pdf(DEFAULT_SHIFT_A, DEFAULT_SHIFT_B)
    v4, v8, v16 = (
        ise(kde(draws, h, grid=np.linspace(0.0, TWO_PI, p)), pdf)
        for p in (4096, 8192, 16384)
    )
    assert abs(v8 - v16) / v16 < 1e-4
    assert abs(v4 - v16) / v16 < 2.5e-4


def test_ks_distance_hand_value():
    assert ks_distance_uniform(np.array([0.25, 0.5, 0.75]), 0.0, 1.0) == pytest.approx(0.25)


def test_ks_distance_matching_law_is_small():
    rng = np.random.default_rng(7)
    draws = rng.uniform(DEFAULT_SHIFT_A, DEFAULT_SHIFT_B, 10_000)
    assert ks_distance_uniform(draws, DEFAULT_SHIFT_A, DEFAULT_SHIFT_B) < 1.63 / 100.0
    # the same draws against a translated law are far from uniform
    assert ks_distance_uniform(draws, DEFAULT_SHIFT_A + 1.0, DEFAULT_SHIFT_B + 1.0) > 0.2


def test_default_grid_spans_the_circle():
    g = density_grid()
    assert g.size == 1024
    assert g[0] == 0.0 and g[-1] == pytest.approx(TWO_PI)


def test_write_density_csv_round_trip(tmp_path):
    est = kde(np.array([2.0, 2.5]), 0.3, grid=np.linspace(1.0, 4.0, 7))
    p = tmp_path / "density.csv"
    write_density_csv(est, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,f_hat"
    back = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(back[:, 0], est.grid)
    assert np.array_equal(back[:, 1], est.values)
