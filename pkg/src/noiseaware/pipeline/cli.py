"""Command-line entry point: ``noiseaware <command> [options]``.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 a result missed
its acceptance threshold (for CI gating).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..noisegen import GaussianParams, NoiseKind, PeriodicParams, SaltPepperParams
from . import commands
from .config import DETECTORS, METHODS, load_config

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_THRESHOLD = 0, 1, 2, 3


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI config file (defaults apply to missing keys)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--models", help="model directory (default <out>/models)")
    p.add_argument("--detector", choices=DETECTORS)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--kernel", type=int, help="median kernel size (odd)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="noiseaware", description="Noise-aware image restoration pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="generate the toy-casting corpus and manifest")

    p = sub.add_parser("addnoise", parents=[common], help="add seeded noise to one PGM")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--kind", required=True, help="gaussian, salt_pepper or periodic")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--salt-ratio", type=float, default=0.5)
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--freq-u", type=int, default=8)
    p.add_argument("--freq-v", type=int, default=0)
    p.add_argument("--phase", type=float, default=0.0)

    p = sub.add_parser("detect", parents=[common], help="print the detected noise kind of PGM images")
    p.add_argument("inputs", nargs="+")

    p = sub.add_parser("denoise", parents=[common], help="denoise one PGM")
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("train-denoiser", parents=[common], help="train the autoencoder(s)")
    p.add_argument("--kind", action="append", help="gaussian or periodic (default: both)")

    sub.add_parser("train-noiseclf", parents=[common], help="train the noise-type classifier")
    sub.add_parser("train-defectclf", parents=[common], help="train the defect classifier on clean images")

    p = sub.add_parser("run", parents=[common], help="detect, route, denoise and score a manifest split")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--oracle-kinds", action="store_true", help="route on generating labels")
    p.add_argument("--min-ssim-gain", type=float, help="exit 3 if any kind gains less SSIM than this")

    sub.add_parser("lift", parents=[common], help="defect accuracy before / after denoising")
    sub.add_parser("report", parents=[common], help="collect text reports")
    return parser


def _config(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(
        seed=args.seed, out=args.out, models=args.models, detector=args.detector, method=args.method,
        kernel=args.kernel,
    )


def _noise_params(args, kind: NoiseKind):
    if kind is NoiseKind.GAUSSIAN:
        return GaussianParams(args.sigma)
    if kind is NoiseKind.SALT_PEPPER:
        return SaltPepperParams(args.density, args.salt_ratio)
    return PeriodicParams(args.amplitude, args.freq_u, args.freq_v, args.phase)


def _dispatch(args) -> int:
    cfg = _config(args)
    cmd = args.command
    if cmd == "synth":
        manifest = commands.cmd_synth(cfg)
        print(f"{len(manifest.entries)} entries -> {manifest.root / 'manifest.csv'}")
    elif cmd == "addnoise":
        kind = NoiseKind.parse(args.kind)
        commands.cmd_addnoise(args.input, args.output, kind, _noise_params(args, kind), cfg.seed)
    elif cmd == "detect":
        for path, kind in commands.cmd_detect(cfg, args.inputs):
            print(f"{path}\t{kind.label}")
    elif cmd == "denoise":
        kind, route = commands.cmd_denoise(cfg, args.input, args.output)
        print(f"{args.input}\t{kind.label}\t{route}")
    elif cmd == "train-denoiser":
        kinds = [NoiseKind.parse(k) for k in args.kind] if args.kind else list(commands.AE_KINDS)
        for kind in kinds:
            print(json.dumps(commands.cmd_train_denoiser(cfg, kind), sort_keys=True))
    elif cmd == "train-noiseclf":
        print(json.dumps(commands.cmd_train_noiseclf(cfg), sort_keys=True))
    elif cmd == "train-defectclf":
        print(json.dumps(commands.cmd_train_defectclf(cfg), sort_keys=True))
    elif cmd == "run":
        summary = commands.cmd_run(cfg, args.split, args.oracle_kinds)
        print(json.dumps(summary, sort_keys=True))
        if args.min_ssim_gain is not None:
            gains = [summary["ssim_mean"][k] - summary["ssim_noisy_mean"][k] for k in summary["ssim_mean"]]
            if min(gains) < args.min_ssim_gain:
                return EXIT_THRESHOLD
    elif cmd == "lift":
        summary = commands.cmd_lift(cfg)
        print(commands.lift_text(summary), end="")
        ok = summary["mean_delta"] == 0.0 if cfg.method == "identity" else summary["mean_delta"] > 0.0
        if not ok:
            return EXIT_THRESHOLD
    elif cmd == "report":
        print(commands.cmd_report(cfg), end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
