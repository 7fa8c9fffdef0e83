"""Command-line entry point: ``qkl <subcommand> [flags]``.

Exit codes: 0 on success, 1 on invalid input, 2 on runtime failure.
"""

import argparse
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import InvalidArgumentError
from .experiments import (
    KERNEL_TAGS,
    ExperimentConfig,
    measure_shot_cost,
    run_alignment,
    run_generalization,
    run_spectrum,
    verify_concentration,
    verify_haar_moments,
)
from .report import emit_csv, emit_svg, write_manifest
from .spectral import closed_form_checks

logger = logging.getLogger("qkl")

SUBCOMMANDS = ("generalization", "spectrum", "alignment", "verify-haar", "verify-concentration",
               "spectral-oracle")
DEFAULT_QUBITS = {"generalization": "2..7", "spectrum": "5..10", "alignment": "7",
                  "verify-haar": "2", "verify-concentration": "5..8", "spectral-oracle": "1"}
DEFAULT_SAMPLES = {"verify-haar": 10_000, "verify-concentration": 1000}
DEFAULT_SEEDS = {"alignment": 50}
KERNEL_ALIASES = {"q": "q", "qw": "qw", "q_w": "qw", "k": "k", "rbf": "rbf", "k_rbf": "rbf"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def parse_range(text):
    """``"a..b"`` (inclusive) or a single integer."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}, expected a..b") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}")
    return tuple(range(lo, hi + 1))


def parse_kernels(text):
    tags = []
    for raw in text.split(","):
        tag = KERNEL_ALIASES.get(raw.strip())
        if tag is None:
            raise argparse.ArgumentTypeError(f"unknown kernel {raw!r}; choose from q, qw, k, rbf")
        if tag not in tags:
            tags.append(tag)
    return tuple(sorted(tags, key=KERNEL_TAGS.index))


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value >= 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite non-negative number, got {text!r}")
    return value


def build_parser():
    parser = _Parser(prog="qkl", description="Quantum kernel bias experiments.")
    parser.add_argument("--version", action="version", version=f"qkl {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--qubits", type=parse_range, default=None, help="range a..b (inclusive)")
        p.add_argument("--samples", type=_positive_int, default=None,
                       help="data points (unitaries for verify-*)")
        p.add_argument("--seeds", type=_positive_int, default=None, help="number of seeds")
        p.add_argument("--noise-var", type=_nonneg_float, default=1e-4)
        group = p.add_mutually_exclusive_group()
        group.add_argument("--lambda", dest="lam", type=_nonneg_float, default=None,
                           help="one ridge value for every kernel")
        group.add_argument("--lambda-grid", action="store_true",
                           help="sweep 15 log-spaced ridge values from 1e-6 to 1e4")
        p.add_argument("--kernels", type=parse_kernels, default=KERNEL_TAGS)
        p.add_argument("--entangler", choices=("haar", "layers"), default="haar")
        p.add_argument("--depth", type=_positive_int, default=None, help="layers for --entangler layers")
        p.add_argument("--out", type=Path, default=Path("results"))
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--svg", action="store_true", help="also render SVG figures")
    return parser


def _experiment_config(args):
    return ExperimentConfig(
        d_range=args.qubits,
        n=args.samples or 200,
        seeds=args.seeds or DEFAULT_SEEDS.get(args.command, 10),
        noise_variance=args.noise_var,
        lambda_policy="grid" if args.lambda_grid else "fixed",
        fixed_lambda=None if args.lam is None else {k: args.lam for k in KERNEL_TAGS},
        kernels=args.kernels,
        entangler=args.entangler,
        depth=args.depth,
        master_seed=args.seed,
    )


def _run_oracle(out):
    checks = closed_form_checks()
    ok = True
    for name, passed, detail in checks:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})", file=out)
    return ok


def run(args, out=None):
    """Execute a parsed command; returns the exit code."""
    out = sys.stdout if out is None else out
    if args.command == "spectral-oracle":
        return 0 if _run_oracle(out) else 2
    args.qubits = args.qubits or parse_range(DEFAULT_QUBITS[args.command])
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    files, timings, svgs = [], {}, []
    start = time.perf_counter()
    if args.command in ("generalization", "spectrum", "alignment"):
        config = _experiment_config(args)
        snapshot = asdict(config)
        if args.command == "generalization":
            rows = run_generalization(config)
            files.append(emit_csv(rows, outdir / "generalization.csv", schema="generalization"))
            svgs.append((rows, "mse_vs_qubits", "mse_vs_qubits.svg"))
        elif args.command == "spectrum":
            rows = run_spectrum(config)
            files.append(emit_csv(rows, outdir / "spectrum.csv", schema="spectrum"))
            svgs.append((rows, "spectrum_vs_qubits", "spectrum_vs_qubits.svg"))
        else:
            kta, curves = run_alignment(config)
            files.append(emit_csv(kta, outdir / "alignment.csv", schema="alignment"))
            files.append(emit_csv(curves, outdir / "alignment_curve.csv", schema="alignment_curve"))
            svgs.append((kta, "kta_histogram", "kta_histogram.svg"))
            svgs.append((curves, "cumulative_alignment", "cumulative_alignment.svg"))
    elif args.command == "verify-haar":
        if max(args.qubits) > 4:
            raise InvalidArgumentError("verify-haar supports at most 4 qubits")
        num = args.samples or DEFAULT_SAMPLES["verify-haar"]
        snapshot = {"d_range": args.qubits, "num_unitaries": num, "master_seed": args.seed}
        rows, failed = [], []
        for d in args.qubits:
            report = verify_haar_moments(d, num, np.random.default_rng([args.seed, 4, d]))
            rows.extend({**r, "moment_id": f"d{d}:{r['moment_id']}"} for r in report.rows)
            print(f"d={d}: max first-moment error {report.first_moment_max_err:.3g}, "
                  f"max second-moment error {report.second_moment_max_err:.3g}, "
                  f"worst error / stderr {report.max_normalized_err:.2f} "
                  f"-> {'PASS' if report.passed else 'FAIL'}", file=out)
            if not report.passed:
                failed.append(d)
        files.append(emit_csv(rows, outdir / "haar.csv", schema="haar"))
    else:
        num = args.samples or DEFAULT_SAMPLES["verify-concentration"]
        snapshot = {"d_range": args.qubits, "num_unitaries": num, "master_seed": args.seed}
        rows = verify_concentration(args.qubits, 1, num, np.random.default_rng([args.seed, 5]))
        shots = measure_shot_cost(args.qubits, min(num, 400), np.random.default_rng([args.seed, 6]))
        files.append(emit_csv(rows, outdir / "concentration.csv", schema="concentration"))
        files.append(emit_csv(shots, outdir / "shot_cost.csv", schema="shot_cost"))
    timings[args.command] = round(time.perf_counter() - start, 3)
    if args.svg:
        for rows, kind, name in svgs:
            files.append(emit_svg(rows, kind, outdir / name))
    write_manifest(outdir, config={"command": args.command, **snapshot}, version=__version__,
                   master_seed=args.seed, files=files, timings=timings)
    for f in files:
        print(f"wrote {f}", file=out)
    if args.command == "verify-haar" and failed:
        return 2
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        return run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except InvalidArgumentError as exc:
        print(f"qkl: invalid input: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"qkl: I/O error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        logger.exception("run failed")
        print(f"qkl: runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
