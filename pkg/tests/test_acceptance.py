"""Release gates: end-to-end checks with pinned seeds and tolerances.

Each test covers one numbered gate and prints a single [PASS]/[FAIL]
line with the measured values (run with ``-s`` to stream them).  Every
dataset is seeded, so the numbers reproduce exactly on rerun.
"""

import json
import time

import numpy as np

from shiftalign.align import (
    AlignConfig,
    align_all,
    block_offset_diagnostics,
    circular_error,
    minimize_block,
    relative_truth,
)
from shiftalign.bench import BenchProtocol, replicate_seed, run_bench
from shiftalign.cli import main
from shiftalign.curves import PERIOD, make_blocks
from shiftalign.density import ise, kde, ks_distance_uniform, silverman_bandwidth, uniform_pdf
from shiftalign.simgen import (
    NoiseSpec,
    PulseSpec,
    ShiftLawSpec,
    baseline_wander,
    gen_dataset,
    powerline,
)
from shiftalign.spectral import (
    FrequencyWeights,
    ShiftVector,
    cost,
    cost_gradient,
    dft_coeffs,
    noise_free_cost,
)

PULSE = PulseSpec(kind="gaussian", center=1.1, width=0.18)
LAW = ShiftLawSpec()
TWO_PI = PERIOD


def _dataset(m, n, sigma2, seed, on_grid=False):
    noise = NoiseSpec(sigma2=sigma2, seed=seed)
    return gen_dataset(PULSE, LAW, noise, m, n, on_grid=on_grid)


def _gate(tag, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
    assert ok, f"{tag}: {detail}"


def test_gate_01_noise_free_on_grid_recovery_is_exact():
    t0 = time.perf_counter()
    curves, truth = _dataset(40, 512, 0.0, 77, on_grid=True)
    result = align_all(curves, make_blocks(curves, 10), AlignConfig(lambda_exponent=0.9))
    err = circular_error(np.asarray(result.theta_hat), relative_truth(truth))
    elapsed = time.perf_counter() - t0
    bin_width = TWO_PI / 512
    ok = err.max <= bin_width and elapsed < 30.0
    _gate(
        "gate 01 noise-free on-grid recovery",
        ok,
        f"max error {err.max:.3e} <= one bin {bin_width:.3e}, wall {elapsed:.2f}s < 30s",
    )


def test_gate_02_data_cost_matches_closed_form_when_noise_free():
    worst = 0.0
    for i in range(50):
        rng = np.random.default_rng(1000 + i)
        k_curves = int(rng.integers(1, 6))
        n = int(rng.choice([32, 64, 128]))
        curves, truth = _dataset(k_curves, n, 0.0, 1000 + i, on_grid=True)
        weights = FrequencyWeights.flat_band(AlignConfig().weights_for(n).grid)
        spec = dft_coeffs(curves, weights.grid)
        lam = float(rng.uniform(0.5, 4.0))
        block = range(k_curves + 1)
        alpha_true = ShiftVector(relative_truth(truth))
        for _ in range(20):
            trial = ShiftVector(
                np.concatenate([[0.0], rng.uniform(0.0, TWO_PI, k_curves)])
            )
            got = cost(spec, block, trial, lam, weights)
            want = noise_free_cost(spec.mean_esd, alpha_true, trial, lam, weights)
            worst = max(worst, abs(got - want) / max(abs(want), 1e-30))
    ok = worst < 1e-10
    _gate(
        "gate 02 cost equals noise-free closed form",
        ok,
        f"50 on-grid instances x 20 trial shifts, worst relative gap {worst:.2e} < 1e-10",
    )


def test_gate_03_analytic_gradient_matches_finite_differences():
    h = 1e-6
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(2000 + i)
        k_curves = int(rng.integers(1, 5))
        sigma2 = float(10.0 ** rng.uniform(-2.0, 0.0))
        curves, _ = _dataset(k_curves, 64, sigma2, 2000 + i)
        weights = FrequencyWeights.flat_band(AlignConfig(band_k_max=20).weights_for(64).grid)
        spec = dft_coeffs(curves, weights.grid)
        lam = float(rng.uniform(0.5, 4.0))
        block = range(k_curves + 1)
        alpha = np.concatenate([[0.0], rng.uniform(0.0, TWO_PI, k_curves)])
        grad = cost_gradient(spec, block, ShiftVector(alpha), lam, weights)
        fd = np.empty(k_curves)
        for j in range(k_curves):
            up, dn = alpha.copy(), alpha.copy()
            up[j + 1] += h
            dn[j + 1] -= h
            fd[j] = (
                cost(spec, block, ShiftVector(up), lam, weights)
                - cost(spec, block, ShiftVector(dn), lam, weights)
            ) / (2 * h)
        scale = max(np.max(np.abs(fd)), 1e-30)
        worst = max(worst, float(np.max(np.abs(grad - fd)) / scale))
    ok = worst < 1e-5
    _gate(
        "gate 03 gradient matches finite differences",
        ok,
        f"100 noisy instances, worst relative gap {worst:.2e} < 1e-5",
    )


def test_gate_04_optimizer_finds_the_exhaustive_grid_minimum():
    n = 32
    bin_width = TWO_PI / n
    config = AlignConfig()
    weights = config.weights_for(n)
    lam = config.ref_weight_for(2)
    worst_bins = 0.0
    worst_gap = -np.inf
    for seed in range(400, 420):
        curves, _ = _dataset(2, n, 0.01, seed)
        spec = dft_coeffs(curves, weights.grid)
        block = [0, 1, 2]
        grid_vals = np.empty((n, n))
        for j1 in range(n):
            for j2 in range(n):
                trial = ShiftVector(np.array([0.0, j1 * bin_width, j2 * bin_width]))
                grid_vals[j1, j2] = cost(spec, block, trial, lam, weights)
        j_best = np.unravel_index(np.argmin(grid_vals), grid_vals.shape)
        fit = minimize_block(spec, block, config)
        theta = np.asarray(fit.shifts.alpha)
        for got, best in zip(theta[1:], (j_best[0] * bin_width, j_best[1] * bin_width)):
            d = float(np.abs(np.mod(got - best + np.pi, TWO_PI) - np.pi))
            worst_bins = max(worst_bins, d / bin_width)
        worst_gap = max(worst_gap, fit.objective - grid_vals[j_best])
    ok = worst_bins <= 1.0 and worst_gap <= 1e-15
    _gate(
        "gate 04 optimizer attains the exhaustive minimum",
        ok,
        f"20 two-curve instances on the full {n}x{n} grid: worst distance "
        f"{worst_bins:.2f} bins <= 1, objective gap {worst_gap:.2e} <= 1e-15",
    )


def test_gate_05_spectral_beats_least_squares_under_noise():
    protocol = BenchProtocol(
        sigma2_grid=(0.0, 1.0),
        block_size_grid=(10, 30),
        replicates=20,
        methods=("spectral", "lse"),
        blocks=20,
        n_samples=512,
        pulse=PULSE,
        master_seed=5,
    )
    t0 = time.perf_counter()
    result = run_bench(protocol, threads=1)
    elapsed = time.perf_counter() - t0
    parts = []
    ok = elapsed < 1800.0
    for k in (10, 30):
        sp = result.cell(1.0, k, "spectral").mise
        ls = result.cell(1.0, k, "lse").mise
        ok = ok and sp < ls
        parts.append(f"sigma2=1 K={k}: {sp:.5f} < {ls:.5f}")
    for k in (10, 30):
        sp = result.cell(0.0, k, "spectral").mise
        ls = result.cell(0.0, k, "lse").mise
        gap = abs(sp - ls) / ls
        ok = ok and gap <= 0.15
        parts.append(f"sigma2=0 K={k}: gap {gap:.4f} <= 0.15")
    _gate(
        "gate 05 MISE vs least squares (20 replicates)",
        ok,
        "; ".join(parts) + f"; wall {elapsed:.0f}s < 1800s",
    )


def test_gate_06_error_shrinks_with_finer_sampling():
    rms = {}
    for n in (512, 128):
        sq_sum = 0.0
        count = 0
        for rep in range(20):
            seed = replicate_seed(6, 0.01, 50, rep)
            curves, truth = _dataset(100, n, 0.01, seed)
            result = align_all(curves, make_blocks(curves, 50), AlignConfig())
            summary = circular_error(np.asarray(result.theta_hat), relative_truth(truth))
            sq_sum += summary.rms**2 * summary.distances.size
            count += summary.distances.size
        rms[n] = float(np.sqrt(sq_sum / count))
    ratio = rms[512] / rms[128]
    ok = 0.3 <= ratio <= 0.8
    _gate(
        "gate 06 RMS error shrinks with n",
        ok,
        f"rms(n=512)={rms[512]:.5f}, rms(n=128)={rms[128]:.5f}, "
        f"ratio {ratio:.3f} in [0.3, 0.8]",
    )


def test_gate_07_reference_weight_anchors_blocks():
    seed = replicate_seed(7, 0.01, 50, 0)
    curves, truth = _dataset(200, 512, 0.01, seed)
    plan = make_blocks(curves, 50)
    bin_width = TWO_PI / 512

    flat = align_all(curves, plan, AlignConfig(ref_weight=1.0))
    disp = max(d["dispersion"] for d in block_offset_diagnostics(flat, truth, plan))
    anchored = align_all(curves, plan, AlignConfig())
    off = max(d["offset"] for d in block_offset_diagnostics(anchored, truth, plan))
    ok = disp < 3 * bin_width and off < 3 * bin_width
    _gate(
        "gate 07 reference weight anchors blocks",
        ok,
        f"unit weight: within-block dispersion {disp / bin_width:.2f} bins < 3; "
        f"default weight: worst block offset {off / bin_width:.2f} bins < 3",
    )


def test_gate_08_density_recovery_at_scale():
    seed = replicate_seed(8, 0.1, 200, 0)
    curves, truth = _dataset(4000, 512, 0.1, seed)
    result = align_all(curves, make_blocks(curves, 200), AlignConfig())
    theta_abs = np.mod(np.asarray(result.theta_hat) + truth[0], TWO_PI)
    samples = theta_abs[1:]
    estimate = kde(samples, silverman_bandwidth(samples))
    ise_val = ise(estimate, uniform_pdf(LAW.a, LAW.b))
    ks = ks_distance_uniform(samples, LAW.a, LAW.b)
    ok = ise_val < 0.05 and ks < 0.05
    _gate(
        "gate 08 density recovery at scale",
        ok,
        f"4000 curves, sigma2=0.1, K=200: ISE {ise_val:.4f} < 0.05, KS {ks:.4f} < 0.05",
    )


def test_gate_09_robust_to_recording_artifacts():
    seed = replicate_seed(9, 0.01, 20, 0)
    curves, truth = _dataset(200, 512, 0.01, seed)
    rel = relative_truth(truth)
    plan = make_blocks(curves, 20)
    bin_width = TWO_PI / 512

    def rms_bins(curve_set):
        res = align_all(curve_set, plan, AlignConfig())
        return circular_error(np.asarray(res.theta_hat), rel).rms / bin_width

    base = rms_bins(curves)
    deltas = {
        "wander": rms_bins(baseline_wander(curves, amplitude=0.5, frequency=1.0)) - base,
        "wander-random-phase": rms_bins(
            baseline_wander(curves, amplitude=0.5, frequency=1.0, per_curve_phase_seed=11)
        )
        - base,
        "powerline": rms_bins(
            powerline(curves, a0=0.2, f0=50.0, fs=512 / TWO_PI,
                      amp_jitter_sd=0.01, freq_jitter_sd=0.01, seed=12)
        )
        - base,
    }
    ok = all(abs(d) < 2.0 for d in deltas.values())
    _gate(
        "gate 09 robust to recording artifacts",
        ok,
        f"baseline rms {base:.2f} bins; deltas "
        + ", ".join(f"{k} {v:+.2f}" for k, v in deltas.items())
        + " all within 2 bins",
    )


def test_gate_10_first_moment_of_the_shift_law():
    seed = replicate_seed(10, 0.01, 50, 6)
    curves, truth = _dataset(1000, 512, 0.01, seed)
    result = align_all(curves, make_blocks(curves, 50), AlignConfig())
    theta_abs = np.mod(np.asarray(result.theta_hat) + truth[0], TWO_PI)
    expected = (np.sin(LAW.b) - np.sin(LAW.a)) / (LAW.b - LAW.a)
    gap = abs(float(np.mean(np.cos(theta_abs))) - expected)
    ok = gap < 0.02
    _gate(
        "gate 10 first moment of the shift law",
        ok,
        f"1000 curves: |mean cos(theta) - {expected:.4f}| = {gap:.5f} < 0.02",
    )


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_gate_11_cli_reruns_are_byte_identical(tmp_path):
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps({
        "pulse": {"kind": "gaussian", "center": 1.1, "width": 0.18},
        "shift_law": {"law": "uniform"},
        "noise": {"sigma2": 0.01, "seed": 5},
        "M": 6,
        "n": 64,
    }))
    protocol = tmp_path / "protocol.json"
    protocol.write_text(json.dumps({
        "sigma2": [0.0], "K": [2], "replicates": 1, "methods": ["spectral"],
        "blocks": 2, "n": 64,
        "pulse": {"kind": "gaussian", "center": 1.1, "width": 0.18}, "seed": 3,
    }))
    i = np.arange(400, dtype=float)
    record = tmp_path / "record.txt"
    np.savetxt(record, np.exp(-0.5 * ((i - 100) / 8) ** 2) + np.exp(-0.5 * ((i - 300) / 8) ** 2))

    sim = tmp_path / "sim"
    assert main(["simulate", str(scenario), "--out", str(sim)]) == 0
    al = tmp_path / "al"
    assert main(["align", "--input", str(sim / "curves.csv"), "--out", str(al),
                 "--k", "3", "--truth", str(sim / "true_shifts.csv")]) == 0
    den = tmp_path / "den"
    assert main(["density", "--input", str(al / "shifts.csv"), "--out", str(den)]) == 0
    bench = tmp_path / "bench"
    assert main(["bench", str(protocol), "--out", str(bench)]) == 0
    seg = tmp_path / "seg"
    assert main(["segment", "--input", str(record), "--out", str(seg), "--window-len", "80",
                 "--min-separation", "50", "--threshold", "0.5"]) == 0

    checked = 0
    for name, out_dir in [("simulate", sim), ("align", al), ("density", den),
                          ("bench", bench), ("segment", seg)]:
        again = tmp_path / f"{name}-rerun"
        assert main(["rerun", "--manifest", str(out_dir / "manifest.json"),
                     "--out", str(again)]) == 0
        assert _snapshot(again) == _snapshot(out_dir), f"{name} rerun differs"
        checked += 1

    # worker count must not leak into any artifact
    al8 = tmp_path / "al8"
    assert main(["align", "--input", str(sim / "curves.csv"), "--out", str(al8),
                 "--k", "3", "--truth", str(sim / "true_shifts.csv"), "--threads", "8"]) == 0
    assert _snapshot(al8) == _snapshot(al), "align differs across worker counts"
    bench8 = tmp_path / "bench8"
    assert main(["bench", str(protocol), "--out", str(bench8), "--threads", "8"]) == 0
    assert _snapshot(bench8) == _snapshot(bench), "bench differs across worker counts"

    _gate(
        "gate 11 CLI reruns are byte-identical",
        True,
        f"{checked} commands rerun from manifests byte-identical "
        "(figures included); align and bench also identical with 8 workers",
    )
