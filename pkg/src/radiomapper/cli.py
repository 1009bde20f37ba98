"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys

from .pipeline import (
    STAGES,
    PipelineError,
    load_config,
    make_environment_file,
    run_pipeline,
    run_stage,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--seed-sim", type=int, help="override the simulation seed")
    parser.add_argument("--seed-coarse", type=int, help="override the coarse-stage seed")
    parser.add_argument("--seed-fine", type=int, help="override the fine-stage seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radiomapper",
        description="Survey-free radio map construction from unlabeled RSS sequences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline (or one stage via --stage)")
    _add_common(run)
    run.add_argument("--stage", choices=STAGES, help="run a single stage instead")

    for name in STAGES:
        stage = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(stage)

    mkenv = sub.add_parser("make-env", help="write the default corridor environment JSON")
    _add_common(mkenv)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.out:
            config.output_dir = args.out
        if args.seed_sim is not None:
            config.seed_simulate = args.seed_sim
        if args.seed_coarse is not None:
            config.seed_coarse = args.seed_coarse
        if args.seed_fine is not None:
            config.seed_fine = args.seed_fine

        if args.command == "make-env":
            make_environment_file(config)
            print(f"wrote {config.environment}")
        elif args.command == "run" and not args.stage:
            manifest = run_pipeline(config)
            for stage, seconds in manifest["stage_seconds"].items():
                print(f"{stage}: {seconds:.3f}s")
            print(f"artifacts in {config.output_dir}")
        else:
            stage = args.stage if args.command == "run" else args.command
            seconds = run_stage(stage, config)
            print(f"{stage}: {seconds:.3f}s")
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
