"""
Command-line entry point.
Configures logging and settings, parses arguments and maps errors to exit codes.

    python -m app.main <command> [options]
"""

import argparse
import sys

from loguru import logger
from pydantic import ValidationError

from app.cli import commands
from app.config import apply_settings, load_settings, settings
from app.exceptions import (
    ArgumentError,
    NumericalError,
    ResourceBudgetError,
    TableFormatError,
    ZeroTableError,
)

EXIT_USAGE = 2
EXIT_RESOURCE = 3


def configure_logging(verbose: bool = False) -> None:
    """Colored stderr sink plus a rotating debug file; stdout stays for results."""
    logger.remove()
    logger.add(
        sys.stderr,
        format=(
            "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
            "<level>{level: <8}</level> | "
            "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
            "<level>{message}</level>"
        ),
        level="DEBUG" if verbose else settings.log_level,
    )
    if settings.log_file:
        logger.add(
            settings.log_file,
            rotation="10 MB",
            retention="7 days",
            compression="zip",
            level="DEBUG",
        )


def _table_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--nmax", type=int, default=None, help="Table size (default from settings).")
    parent.add_argument("--cache", default=None, help="Cache directory (overrides MTL_CACHE_DIR).")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtl",
        description="Twisted sums of von Mangoldt type functions: tables, main terms, scans and audits.",
    )
    parser.add_argument("--config", default=None, help="Plain key=value settings file.")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (0 = all cores).")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging on stderr.")
    sub = parser.add_subparsers(dest="command", required=True)
    tables = _table_options()

    p = sub.add_parser("sieve", parents=[tables], help="Build and cache an arithmetic table.")
    p.add_argument("--variant", choices=commands.VARIANT_CHOICES, default="lambda")
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(handler=commands.cmd_sieve)

    p = sub.add_parser("table-dump", parents=[tables], help="Write a table as n,value CSV.")
    p.add_argument("--variant", choices=commands.VARIANT_CHOICES, default="lambda")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=commands.cmd_table_dump)

    p = sub.add_parser("sum", parents=[tables], help="Evaluate one twisted sum.")
    p.add_argument("--variant", choices=["lambda", *commands.FAMILY_CHOICES], default="lambda")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, default=0.0)
    p.set_defaults(handler=commands.cmd_sum)

    p = sub.add_parser("main-term", help="Evaluate the main term at (x, y).")
    p.add_argument("--variant", choices=commands.FAMILY_CHOICES, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, default=0.0)
    p.set_defaults(handler=commands.cmd_main_term)

    p = sub.add_parser("scan", parents=[tables], help="Scan remainders over an x grid and y list.")
    p.add_argument("--variant", choices=commands.FAMILY_CHOICES, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x-grid", required=True, help="geometric:LO:HI:COUNT or x1,x2,...")
    p.add_argument("--y", default="0", help="Comma-separated y values; use --y=-5,5 for negatives.")
    p.add_argument("--out", default=None, help="CSV path (stdout when absent).")
    p.set_defaults(handler=commands.cmd_scan)

    p = sub.add_parser("verify", help="Run verification suites.")
    p.add_argument("--suite", choices=commands.SUITE_CHOICES, default="all")
    p.add_argument("--zeros", default=None, help="Zero ordinate file for the zeros suite.")
    p.add_argument("--tables", action="store_true", help="Also print Laurent coefficient tables.")
    p.set_defaults(handler=commands.cmd_verify)

    p = sub.add_parser("zeros-audit", help="Audit zero sums at the given points.")
    p.add_argument("--zeros", required=True)
    p.add_argument("--points", default="2,2.5,3,2+10i,2+20i")
    p.set_defaults(handler=commands.cmd_zeros_audit)

    p = sub.add_parser("cache", parents=[tables], help="Inspect or clear the table cache.")
    p.add_argument("action", choices=["list", "stats", "clear"])
    p.set_defaults(handler=commands.cmd_cache)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.config:
        apply_settings(load_settings(args.config))
    if args.threads is not None:
        settings.threads = args.threads
    configure_logging(args.verbose)
    logger.debug(f"Command {args.command} with {vars(args)}")

    try:
        return args.handler(args)
    except (ArgumentError, ZeroTableError, ValidationError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except (ResourceBudgetError, TableFormatError, OSError) as e:
        logger.error(f"Resource error: {e}")
        return EXIT_RESOURCE
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return commands.EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
