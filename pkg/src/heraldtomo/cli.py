"""Command-line entry point: ``heraldtomo <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Every failure prints one line ``error: <code>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import pipeline
from .config import RunConfig
from .exceptions import ConfigurationError, DataError, HeraldTomoError, NumericalError
from .selftest import run_selftest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; keep the single-line error contract
    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key=value configuration file")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=str, help="RNG seed (unsigned 64-bit)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override one configuration key (repeatable)",
    )

    parser = _Parser(prog="heraldtomo", description="Heralded-state homodyne tomography pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="prepare the heralded state and sample homodyne data")
    rec = sub.add_parser("reconstruct", parents=[common], help="MaxLik reconstruction of a dataset")
    rec.add_argument("dataset", type=Path, help="signal file or directory holding signal.tsv")
    ana = sub.add_parser("analyze", parents=[common], help="report and CSV exports for a reconstruction")
    ana.add_argument("reconstruction", type=Path, help="reconstruction file")
    sw = sub.add_parser("sweep", parents=[common], help="full pipeline over the HWP angles")
    sw.add_argument("--thetas", help="comma-separated angles (radians, or degrees with 'deg')")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sub.add_parser("selftest", help="fast invariant suite")
    return parser


def load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "thetas", None):
        overrides["thetas"] = args.thetas
    return config.with_overrides(overrides)


def _print_report(values: dict) -> None:
    for key, value in values.items():
        print(f"{key}={pipeline._fmt(value)}")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        results = run_selftest()
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.seconds:.2f}s): {r.detail}")
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise NumericalError(f"selftest failed: {', '.join(failed)}")
        return EXIT_OK

    config = load_config(args)
    if args.command == "simulate":
        result = pipeline.simulate(config, args.out)
        print(f"wrote {result.dataset.samples.size} samples to {args.out}")
    elif args.command == "reconstruct":
        result = pipeline.reconstruct(args.dataset, config, args.out)
        _print_report(result.diagnostics)
    elif args.command == "analyze":
        _print_report(pipeline.analyze(args.reconstruction, args.out))
    elif args.command == "sweep":
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
        rows = pipeline.sweep(config, args.out, jobs=args.jobs)
        print(Path(args.out, pipeline.SUMMARY_FILE).read_text(), end="")
        failed = [r for r in rows if r["status"] != "ok"]
        if failed:
            raise NumericalError(f"{len(failed)} of {len(rows)} sweep points failed; see summary.csv")
    return EXIT_OK


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    if isinstance(exc, (NumericalError, ArithmeticError)):
        return EXIT_NUMERICAL
    return EXIT_DATA


def main(argv=None) -> int:
    warnings.simplefilter("ignore")
    try:
        return run(argv)
    except (HeraldTomoError, OSError, ValueError, ArithmeticError) as exc:
        code = getattr(exc, "code", "io" if isinstance(exc, OSError) else "error")
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {code}: {message}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
