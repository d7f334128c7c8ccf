"""Entry point: nls <command> --config <path> [--out <dir>] [--workers N]."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ..operator import PreconditionError
from .commands import COMMANDS, EXIT_INPUT, Outcome
from .config import COMMANDS as NAMES
from .config import ConfigError, RunConfig, emit_config, parse_config
from .output import csv_text, dumps, write_text

log = logging.getLogger("nlspec")


def run(cfg: RunConfig, out_dir: Path | None = None) -> tuple[int, Outcome]:
    """Dispatch the command and write resolved-config.json, results.json, results.csv and timings.json."""
    out_dir = Path(out_dir or cfg.out or ".")
    t0 = time.perf_counter()
    outcome = COMMANDS[cfg.command](cfg)
    elapsed = time.perf_counter() - t0
    results = {"command": cfg.command, "status": outcome.status, **outcome.results}
    write_text(out_dir / "resolved-config.json", emit_config(cfg))
    write_text(out_dir / "results.json", dumps(results) + "\n")
    write_text(out_dir / "results.csv", csv_text(outcome.header, outcome.rows))
    # wall-clock data stays out of results.json so that file is reproducible byte for byte
    write_text(out_dir / "timings.json", json.dumps({"command": cfg.command, "seconds": elapsed}) + "\n")
    return outcome.status, outcome


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="nls", description=__doc__)
    ap.add_argument("command", choices=NAMES)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (default: config 'out' or .)")
    ap.add_argument("--workers", type=int, default=None, help="worker processes for sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        data = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if isinstance(data, dict):
        if data.setdefault("command", args.command) != args.command:
            print(f"error: config command {data['command']!r} does not match {args.command!r}", file=sys.stderr)
            return EXIT_INPUT
        if args.workers is not None:
            data["workers"] = args.workers
        if args.out is not None:
            data["out"] = args.out
    try:
        cfg = parse_config(data)
        status, outcome = run(cfg)
    except (ConfigError, PreconditionError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    summary = {k: v for k, v in outcome.results.items() if isinstance(v, (int, float, str, bool))}
    print(dumps(summary))
    return status


if __name__ == "__main__":
    sys.exit(main())
