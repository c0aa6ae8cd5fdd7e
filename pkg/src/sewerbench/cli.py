"""Command-line interface.

    sewerbench synth  [--config cfg.json] [--seed N] [--fast] --out data.csv
    sewerbench bench  [--config cfg.json] [--seed N] [--fast] [--jobs N] --out DIR
    sewerbench ks     --eval DIR/eval.json --pair A B
    sewerbench export [--config cfg.json] --classifier ID --out model.json
    sewerbench detect --model model.json --input rows.csv

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 classifier
failure. SEWERBENCH_JOBS overrides --jobs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from sewerbench.errors import ConfigError, DataFormatError, FitError
from sewerbench.gasdata import default_config, fast_config
from sewerbench.harness import (
    BenchConfig,
    bench_config_from_json,
    cmd_bench,
    cmd_detect,
    cmd_export,
    cmd_ks,
    cmd_synth,
    synth_config_from_json,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sewerbench",
                     description="Sewer-gas hazard classification benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize a labeled sensor dataset")
    p_synth.add_argument("--config", help="SynthConfig JSON file")
    p_synth.add_argument("--seed", type=int, help="override the config seed")
    p_synth.add_argument("--fast", action="store_true", help="2,048-row CI grid")
    p_synth.add_argument("--out", required=True, help="output CSV path")

    p_bench = sub.add_parser("bench", help="run the repeated-CV benchmark")
    p_bench.add_argument("--config", help="BenchConfig JSON file")
    p_bench.add_argument("--seed", type=int, help="override the root seed")
    p_bench.add_argument("--fast", action="store_true",
                         help="2,048-row dataset, 3 repeats")
    p_bench.add_argument("--jobs", type=int, help="parallel workers")
    p_bench.add_argument("--out", required=True, help="artifact directory")
    p_bench.add_argument("--quiet", action="store_true")

    p_ks = sub.add_parser("ks", help="pairwise KS comparison from eval.json")
    p_ks.add_argument("--eval", dest="eval_path", required=True)
    p_ks.add_argument("--pair", nargs=2, metavar=("A", "B"), required=True)

    p_export = sub.add_parser("export", help="refit a model on the full dataset "
                                             "and export its envelope")
    p_export.add_argument("--config", help="BenchConfig JSON file")
    p_export.add_argument("--seed", type=int)
    p_export.add_argument("--fast", action="store_true")
    p_export.add_argument("--classifier", required=True)
    p_export.add_argument("--out", required=True)

    p_detect = sub.add_parser("detect", help="classify sensor rows with an "
                                             "exported model")
    p_detect.add_argument("--model", required=True)
    p_detect.add_argument("--input", required=True)
    return parser


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def _synth_config(args):
    if args.config:
        cfg = synth_config_from_json(_load_json(args.config))
    elif args.fast:
        cfg = fast_config()
    else:
        cfg = default_config()
    if args.seed is not None:
        cfg = synth_config_from_json(
            {**_to_synth_json(cfg), "seed": args.seed}
        )
    return cfg


def _to_synth_json(cfg):
    from sewerbench.harness import synth_config_to_json

    return synth_config_to_json(cfg)


def _bench_config(args) -> BenchConfig:
    if args.config:
        cfg = bench_config_from_json(_load_json(args.config))
    elif args.fast:
        from sewerbench.harness import fast_bench_config

        cfg = fast_bench_config()
    else:
        from sewerbench.harness import full_bench_config

        cfg = full_bench_config()
    if args.seed is not None:
        cfg.root_seed = args.seed
        if cfg.synth is not None:
            cfg.synth = synth_config_from_json(
                {**_to_synth_json(cfg.synth), "seed": args.seed}
            )
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(_synth_config(args), args.out)
        if args.command == "bench":
            progress = None
            if not args.quiet:
                def progress(done, total):
                    print(f"\rcells {done}/{total}", end="", flush=True)
                    if done == total:
                        print()
            return cmd_bench(_bench_config(args), args.out, progress=progress)
        if args.command == "ks":
            return cmd_ks(args.eval_path, args.pair[0], args.pair[1])
        if args.command == "export":
            return cmd_export(_bench_config(args), args.classifier, args.out)
        if args.command == "detect":
            return cmd_detect(args.model, args.input)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"classifier failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
