"""Command line entry point: ``qdmro figure|sweep|validate``.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 partial sweep failure.
"""

from __future__ import annotations

import argparse
import sys

from . import CONFIG_SCHEMA_VERSION, __version__
from .config import ConfigError, load_config
from .runner import FIGURE_IDS, RunFailed, run_figures, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdmro", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version", action="version", version=f"qdmro {__version__} (config schema {CONFIG_SCHEMA_VERSION})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fig = sub.add_parser("figure", help="reproduce one figure panel (or 'all') as CSV + manifest")
    fig.add_argument("id", choices=FIGURE_IDS + ("all",))
    fig.add_argument("--config", help="TOML config file (defaults apply when omitted)")
    fig.add_argument("--out", help="output directory (overrides output_dir)")
    fig.add_argument("--workers", type=_positive_int, help="worker processes (overrides config)")

    sw = sub.add_parser("sweep", help="evaluate the protocol on the Cartesian product of the [sweep] axes")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", help="output directory (overrides output_dir)")
    sw.add_argument("--workers", type=_positive_int)

    val = sub.add_parser("validate", help="parse and validate a config file only")
    val.add_argument("--config", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"{args.config}: ok")
        return EXIT_OK

    if args.command == "figure":
        ids = list(FIGURE_IDS) if args.id == "all" else [args.id]
        try:
            manifests = run_figures(ids, cfg, args.out, args.workers)
        except RunFailed as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        for fig, manifest in manifests.items():
            for art in manifest.artifacts:
                print(f"figure {fig}: wrote {art.path} ({art.rows} rows)")
        return EXIT_OK

    try:
        result = run_sweep(cfg, args.out, args.workers)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"sweep: {len(result.rows)} points, {result.failed_points} failed")
    return EXIT_PARTIAL if result.failed_points else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
