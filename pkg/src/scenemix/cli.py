"""Command line entry point.

Subcommands: ``run`` executes a configured pipeline, ``preview`` writes a
few provenance-colored samples for a viewer, ``stats`` aggregates a
manifest, and ``validate`` checks a config without touching any data.
The SCENEMIX_LOG environment variable sets the log level (default INFO).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .errors import SceneMixError
from .pipeline import BatchManifest, parse_config, preview, run, serialize_config, stats


def _load_config(path: str, seed: int | None = None, epochs: int | None = None):
    config = parse_config(Path(path).read_text(encoding="utf-8"))
    if seed is not None:
        config = dataclasses.replace(config, master_seed=seed)
    if epochs is not None:
        config = dataclasses.replace(config, epochs=epochs)
    return config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenemix",
        description="Deterministic point-cloud scene mixing and augmentation pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a pipeline run")
    p_run.add_argument("--config", required=True, help="path to a JSON pipeline config")
    p_run.add_argument("--seed", type=int, default=None, help="override master_seed")
    p_run.add_argument("--epochs", type=int, default=None, help="override epoch count")
    p_run.add_argument("--workers", type=int, default=1, help="augmentation worker count")

    p_prev = sub.add_parser("preview", help="write provenance-colored sample files")
    p_prev.add_argument("--config", required=True)
    p_prev.add_argument("-n", type=int, default=1, help="number of samples to write")

    p_stats = sub.add_parser("stats", help="aggregate a run manifest")
    p_stats.add_argument("manifest", help="path to a manifest.jsonl")

    p_val = sub.add_parser("validate", help="validate a config and echo its full form")
    p_val.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SCENEMIX_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _load_config(args.config, args.seed, args.epochs)
            manifest = run(config, workers=max(1, args.workers))
            print(f"wrote {len(manifest.samples())} samples to {config.output.directory}")
        elif args.command == "preview":
            config = _load_config(args.config)
            written = preview(config, args.n)
            for path in written:
                print(path)
        elif args.command == "stats":
            report = stats(BatchManifest.load(args.manifest))
            print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        elif args.command == "validate":
            config = _load_config(args.config)
            print(serialize_config(config))
    except (SceneMixError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
