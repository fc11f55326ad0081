"""Command-line interface.

Subcommands: verify-prop1, sweep, ablate, train, selftest.
Exit codes: 0 success, 1 tolerance failure, 2 configuration error,
3 runtime error.  The default output directory comes from --out, then the
DIFFSEMCOM_OUT environment variable, then the config file.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import parse_config
from .errors import ConfigError
from . import harness

OUT_ENV_VAR = "DIFFSEMCOM_OUT"


def _add_common(p, needs_config=True):
    p.add_argument("--config", required=needs_config, help="path to the experiment config file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--jobs", type=int, default=None, help="worker pool size for grid cells")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="diffsemcom",
        description="Simulator for diffusion-based semantic communication over AWGN channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-prop1", help="Monte-Carlo check of the noise budget")
    _add_common(p)

    p = sub.add_parser("sweep", help="SNR x seed grid of the pipeline (and baseline)")
    _add_common(p)
    p.add_argument("--baseline", choices=("on", "off"), default=None,
                   help="also run the random-noise baseline")
    p.add_argument("--plot", choices=("on", "off"), default=None,
                   help="emit SVG line charts")

    p = sub.add_parser("ablate", help="split/depth ablation grid at fixed SNR")
    _add_common(p)

    p = sub.add_parser("train", help="train the MLP denoiser")
    _add_common(p)

    sub.add_parser("selftest", help="fast internal consistency checks")
    return parser


def _resolve_out(args, cfg):
    return args.out or os.environ.get(OUT_ENV_VAR) or cfg.output.directory


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return harness.cmd_selftest()

    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, run=replace(cfg.run, seed=args.seed))
        if args.jobs is not None:
            cfg = replace(cfg, run=replace(cfg.run, jobs=args.jobs))
        out_dir = _resolve_out(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "verify-prop1":
            code, _report = harness.cmd_verify_prop1(cfg, out_dir)
            return code
        if args.command == "sweep":
            baseline = None if args.baseline is None else args.baseline == "on"
            plot = None if args.plot is None else args.plot == "on"
            _rows, csv_path = harness.cmd_sweep(cfg, out_dir, baseline=baseline, plot=plot)
            print(f"wrote {csv_path}")
            return 0
        if args.command == "ablate":
            _rows, csv_path = harness.cmd_ablate(cfg, out_dir)
            print(f"wrote {csv_path}")
            return 0
        if args.command == "train":
            ckpt, loss_csv = harness.cmd_train(cfg, out_dir)
            print(f"wrote {ckpt} and {loss_csv}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit 3
        print(f"error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
