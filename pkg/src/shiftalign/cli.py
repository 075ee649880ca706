"""Command-line surface: simulate, align, density, bench, segment, rerun.

Every command resolves its inputs into a plain config dict, runs from that
dict alone, and echoes it into ``manifest.json`` next to the outputs.
``rerun --manifest`` feeds a stored config back through the same dispatch,
which is what makes reruns byte-exact.  Exit codes are stable: 0 success,
2 usage or config problem, 3 filesystem problem, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .align import (
    AlignConfig,
    align_all,
    block_offset_diagnostics,
    circular_error,
    read_shifts_csv,
    relative_truth,
    select_block_size,
    write_alignment_csv,
)
from .bench import protocol_from_dict, run_bench, runtime_report, write_mise_table
from .curves import PERIOD, load_curves, make_blocks, save_curves, segment_maxima
from .density import kde, silverman_bandwidth, write_density_csv
from .errors import InputError, NumericalError
from .simgen import generate_scenario, scenario_from_dict, write_true_shifts_csv
from .spectral import dft_coeffs, phase_shift_rows

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

FLOAT_FMT = "%.17g"


def _load_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None


def _write_manifest(out: Path, command: str, config: dict, figures: bool) -> None:
    payload = {
        "artifact": {"name": "shiftalign", "version": __version__},
        "command": command,
        "config": config,
        "figures": figures,
    }
    (out / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- command bodies (run from resolved config dicts) -------------------------


def run_simulate(config: dict, out: Path, figures: bool, threads: int) -> None:
    scenario = scenario_from_dict(config)
    curve_set, truth = generate_scenario(scenario)
    save_curves(curve_set, out / "curves.csv")
    write_true_shifts_csv(truth, out / "true_shifts.csv")
    _write_manifest(out, "simulate", scenario.to_dict(), figures)
    if figures:
        from . import figures as figs

        figs.curves_figure(curve_set, out / "curves.png")


def _align_settings(config: dict) -> AlignConfig:
    return AlignConfig(**config["align"])


def run_align(config: dict, out: Path, figures: bool, threads: int) -> None:
    curve_set = load_curves(config["input"])
    settings = _align_settings(config)
    block_size = config.get("k")
    if block_size is None:
        epsilon = config.get("epsilon")
        if epsilon is None:
            raise InputError("either --k or --epsilon is required")
        m = curve_set.n_curves - 1
        candidates = [d for d in range(2, m + 1) if m % d == 0]
        if not candidates:
            raise InputError(f"M={m} admits no block size >= 2")
        weights = settings.weights_for(curve_set.n)
        choice = select_block_size(
            dft_coeffs(curve_set, weights.grid), weights, float(epsilon), candidates
        )
        block_size = choice.block_size
        if not choice.threshold_met:
            print(
                f"warning: no candidate met epsilon={epsilon:g}; using K={block_size}",
                file=sys.stderr,
            )
    plan = make_blocks(curve_set, int(block_size))
    result = align_all(curve_set, plan, settings, threads=threads)
    write_alignment_csv(result, out / "shifts.csv")

    aligned = phase_shift_rows(curve_set.matrix, result.theta_hat)
    mean = aligned.mean(axis=0)
    lines = ["t,value"]
    for t, v in zip(curve_set.time_grid, mean):
        lines.append(f"{t:.17g},{v:.17g}")
    (out / "aligned_mean.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    diagnostics: dict = {
        "objectives": list(result.objectives),
        "normalized_objectives": list(result.normalized_objectives),
        "iterations": list(result.iterations),
        "converged": list(result.converged),
        "block_size": int(block_size),
    }
    truth_path = config.get("truth")
    if truth_path:
        truth = read_shifts_csv(truth_path)
        tolerance = PERIOD / curve_set.n
        summary = circular_error(result.theta_hat, relative_truth(truth), tolerance)
        diagnostics["error_summary"] = {
            "rms": summary.rms,
            "max": summary.max,
            "fraction_beyond_tolerance": summary.fraction_beyond,
            "tolerance": tolerance,
        }
        diagnostics["block_offsets"] = block_offset_diagnostics(result, truth, plan)
    (out / "diagnostics.json").write_text(
        json.dumps(diagnostics, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    resolved = dict(config)
    resolved["k"] = int(block_size)
    _write_manifest(out, "align", resolved, figures)
    if figures:
        from . import figures as figs

        figs.alignment_figure(curve_set, result.theta_hat, out / "alignment.png")


def run_density(config: dict, out: Path, figures: bool, threads: int) -> None:
    samples = read_shifts_csv(config["input"])
    explicit = config.get("bandwidth")
    bandwidth = float(explicit) if explicit is not None else silverman_bandwidth(samples)
    estimate = kde(samples, bandwidth)
    write_density_csv(estimate, out / "density.csv")
    resolved = dict(config)
    resolved["resolved_bandwidth"] = bandwidth
    _write_manifest(out, "density", resolved, figures)
    print(f"bandwidth: {bandwidth:.17g}")
    if figures:
        from . import figures as figs

        figs.density_figure(estimate, out / "density.png")


def run_bench_cmd(config: dict, out: Path, figures: bool, threads: int) -> None:
    protocol = protocol_from_dict(config)
    result = run_bench(protocol, threads=threads)
    write_mise_table(result, out / "mise_table.csv")
    _write_manifest(out, "bench", protocol.to_dict(), figures)
    print(runtime_report(result))
    if figures:
        from . import figures as figs

        figs.mise_figure(result.cells, out / "mise.png")


def run_segment(config: dict, out: Path, figures: bool, threads: int) -> None:
    try:
        signal = np.loadtxt(config["input"], delimiter=",", ndmin=1)
    except ValueError as exc:
        raise InputError(f"{config['input']}: cannot parse signal ({exc})") from None
    curve_set = segment_maxima(
        signal,
        window_len=int(config["window_len"]),
        min_separation=int(config["min_separation"]),
        threshold=float(config["threshold"]),
    )
    save_curves(curve_set, out / "curves.csv")
    _write_manifest(out, "segment", dict(config), figures)
    if figures:
        from . import figures as figs

        figs.curves_figure(curve_set, out / "segments.png")


COMMANDS = {
    "simulate": run_simulate,
    "align": run_align,
    "density": run_density,
    "bench": run_bench_cmd,
    "segment": run_segment,
}


# --- argparse layer -----------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_json(args.config)
    if not isinstance(config, dict):
        raise InputError("scenario config must be a JSON object")
    if args.sigma2 is not None or args.seed is not None:
        noise = dict(config.get("noise", {}))
        if args.sigma2 is not None:
            noise["sigma2"] = args.sigma2
        if args.seed is not None:
            noise["seed"] = args.seed
        config["noise"] = noise
    run_simulate(config, _out_dir(args.out), not args.no_figures, 1)
    return EXIT_OK


def _cmd_align(args: argparse.Namespace) -> int:
    settings = AlignConfig(
        lambda_exponent=args.beta,
        band_k_max=args.nu_kmax,
        rng_seed=args.seed if args.seed is not None else 0,
    )
    config = {
        "input": args.input,
        "truth": args.truth,
        "k": args.k,
        "epsilon": args.epsilon,
        "align": settings.to_dict(),
    }
    run_align(config, _out_dir(args.out), not args.no_figures, args.threads)
    return EXIT_OK


def _cmd_density(args: argparse.Namespace) -> int:
    config = {"input": args.input, "bandwidth": args.bandwidth}
    run_density(config, _out_dir(args.out), not args.no_figures, 1)
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    config = _load_json(args.config)
    if not isinstance(config, dict):
        raise InputError("benchmark config must be a JSON object")
    if args.replicates is not None:
        config["replicates"] = args.replicates
    if args.seed is not None:
        config["seed"] = args.seed
    run_bench_cmd(config, _out_dir(args.out), not args.no_figures, args.threads)
    return EXIT_OK


def _cmd_segment(args: argparse.Namespace) -> int:
    config = {
        "input": args.input,
        "window_len": args.window_len,
        "min_separation": args.min_separation,
        "threshold": args.threshold,
    }
    run_segment(config, _out_dir(args.out), not args.no_figures, 1)
    return EXIT_OK


def _cmd_rerun(args: argparse.Namespace) -> int:
    manifest = _load_json(args.manifest)
    command = manifest.get("command")
    if command not in COMMANDS:
        raise InputError(f"manifest names unknown command {command!r}")
    config = manifest.get("config")
    if not isinstance(config, dict):
        raise InputError("manifest has no config object")
    figures = bool(manifest.get("figures", True))
    COMMANDS[command](config, _out_dir(args.out), figures, args.threads)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftalign",
        description="Align randomly shifted curves and estimate the shift density.",
    )
    parser.add_argument("--version", action="version", version=f"shiftalign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic curve set from a scenario config")
    p.add_argument("config", help="scenario JSON (pulse, shift_law, noise, M, n, ...)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sigma2", type=float, default=None, help="override noise variance")
    p.add_argument("--seed", type=int, default=None, help="override noise seed")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("align", help="estimate shifts for a wide-CSV curve set")
    p.add_argument("--input", required=True, help="curves CSV (one curve per row)")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None, help="block size (must divide M)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="block-size rule threshold (used when --k is omitted)")
    p.add_argument("--beta", type=float, default=0.9, help="reference weight exponent")
    p.add_argument("--nu-kmax", dest="nu_kmax", type=int, default=75,
                   help="largest weighted frequency (default 75)")
    p.add_argument("--seed", type=int, default=None, help="restart jitter seed")
    p.add_argument("--truth", default=None, help="true-shifts CSV for the error summary")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("density", help="kernel density estimate from a shifts CSV")
    p.add_argument("--input", required=True, help="shifts CSV (theta_hat or theta column)")
    p.add_argument("--out", required=True)
    p.add_argument("--bandwidth", type=float, default=None,
                   help="kernel bandwidth (default: Silverman rule)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("bench", help="MISE benchmark over a (sigma2, K) grid")
    p.add_argument("config", help="protocol JSON (sigma2, K, replicates, methods, ...)")
    p.add_argument("--out", required=True)
    p.add_argument("--replicates", type=int, default=None, help="override replicate count")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("segment", help="cut peak-centred windows from a raw record")
    p.add_argument("--input", required=True, help="signal file, one sample per line")
    p.add_argument("--out", required=True)
    p.add_argument("--window-len", dest="window_len", type=int, required=True)
    p.add_argument("--min-separation", dest="min_separation", type=int, required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("rerun", help="re-execute a command from its manifest")
    p.add_argument("--manifest", required=True, help="manifest.json from a previous run")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_rerun)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
