"""
Command handlers for the laboratory CLI.
Each handler takes the parsed argparse namespace, prints its numeric
output to stdout and returns the process exit code.
"""

import argparse
import csv
import io
import sys
import time

from loguru import logger

from app.cli.models import GridSpec
from app.services.models import ScanSpec
from app.config import settings
from app.exceptions import ArgumentError
from app.services.arith_tables import ArithTable, Variant, VariantKind
from app.services.mainterm import main_term, main_term_spec
from app.services.table_store import TableStore
from app.services.twist import render_csv, scan, twisted_sum, write_atomic
from app.services.verification import SUITES, laurent_table_rows, run_suite
from app.services.zeros import (
    POWER_WINDOW,
    b_spread,
    load_zeros,
    zero_sum_linear,
    zero_sum_power_audit,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1


def _store(args: argparse.Namespace) -> TableStore:
    return TableStore(getattr(args, "cache", None))


def _n_max(args: argparse.Namespace, at_least: float = 0) -> int:
    if getattr(args, "nmax", None) is not None:
        return args.nmax
    return max(settings.default_n_max, int(at_least))


def _table(args: argparse.Namespace, variant: Variant, n_max: int) -> tuple[ArithTable, bool]:
    return _store(args).get_or_build(variant, n_max, workers=settings.worker_count)


def parse_floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise ArgumentError(f"expected comma-separated numbers, got '{text}'") from e


def parse_points(text: str) -> list[complex]:
    """Comma-separated complex points such as `2,2.5,2+10i`."""
    points = []
    for part in text.split(","):
        part = part.strip().replace(" ", "")
        if not part:
            continue
        try:
            points.append(complex(part.replace("i", "j")))
        except ValueError as e:
            raise ArgumentError(f"malformed point '{part}'") from e
    return points


def _fmt(value: float, digits: int = 17) -> str:
    return format(value, f".{digits}g")


# ── Table commands ──────────────────────────────────────────────────────────


def cmd_sieve(args: argparse.Namespace) -> int:
    """Build and cache a table; a valid cache file is reused."""
    variant = Variant.parse(args.variant, args.k)
    n_max = _n_max(args)
    store = _store(args)
    table, hit = store.get_or_build(variant, n_max, workers=settings.worker_count)
    print(
        f"TABLE variant={variant.slug} n_max={table.n_max} "
        f"cache={'hit' if hit else 'miss'} path={store.path_for(variant, n_max)}"
    )
    return EXIT_OK


def cmd_table_dump(args: argparse.Namespace) -> int:
    variant = Variant.parse(args.variant, args.k)
    table, _ = _table(args, variant, _n_max(args))

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("n", "value"))
    for n, value in enumerate(table.values[1:].tolist(), start=1):
        writer.writerow((n, _fmt(value)))

    if args.out:
        write_atomic(buffer.getvalue(), args.out)
        logger.info(f"Wrote {table.n_max} row(s) to {args.out}")
    else:
        sys.stdout.write(buffer.getvalue())
    return EXIT_OK


def cmd_cache(args: argparse.Namespace) -> int:
    store = _store(args)
    if args.action == "list":
        print("file,variant,k,n_max,bytes")
        for entry in store.list_entries():
            print(
                f"{entry['file']},{entry['variant']},{entry['k']},"
                f"{entry['n_max']},{entry['bytes']}"
            )
    elif args.action == "stats":
        stats = store.stats()
        print(
            f"CACHE dir={stats['cache_dir']} entries={stats['entries']} "
            f"bytes={stats['total_bytes']}"
        )
    else:
        print(f"CACHE removed={store.reset()}")
    return EXIT_OK


# ── Sums and main terms ─────────────────────────────────────────────────────


def cmd_sum(args: argparse.Namespace) -> int:
    variant = Variant.parse(args.variant, args.k)
    if not variant.is_lambda_family:
        raise ArgumentError(f"twisted sums need a lambda-family variant, got '{args.variant}'")
    table, _ = _table(args, variant, _n_max(args, at_least=args.x))
    value = twisted_sum(table, args.x, args.y)
    print("x,y,psi_re,psi_im")
    print(f"{_fmt(args.x)},{_fmt(args.y)},{_fmt(value.real)},{_fmt(value.imag)}")
    return EXIT_OK


def cmd_main_term(args: argparse.Namespace) -> int:
    spec = main_term_spec(args.k, args.variant)
    value = main_term(spec, args.x, args.y)
    print("main_re,main_im")
    print(f"{_fmt(value.real, 15)},{_fmt(value.imag, 15)}")
    return EXIT_OK


def cmd_scan(args: argparse.Namespace) -> int:
    grid = GridSpec.parse(args.x_grid)
    y_values = parse_floats(args.y)
    unique = list(dict.fromkeys(y_values))
    if len(unique) < len(y_values):
        logger.warning(
            f"Dropped {len(y_values) - len(unique)} duplicate y value(s); "
            f"scanning {len(unique)}"
        )
    spec = ScanSpec(
        k=args.k,
        variant=args.variant,
        x_grid=[float(p) for p in grid.points],
        y_list=unique,
        n_max=_n_max(args, at_least=grid.points[-1] if grid.points else 0),
        output=args.out,
    )
    result = scan(spec, store=_store(args), workers=settings.worker_count)

    if spec.output is None:
        sys.stdout.write(render_csv(result.records, spec.k, spec.variant))
    else:
        x, y = result.argmax or (float("nan"), float("nan"))
        print(
            f"MAX normalized={_fmt(result.max_normalized)} x={_fmt(x)} y={_fmt(y)} "
            f"rows={len(result.records)}"
        )
    return EXIT_OK


# ── Verification ────────────────────────────────────────────────────────────


def cmd_verify(args: argparse.Namespace) -> int:
    if args.suite == "zeros" and not args.zeros:
        raise ArgumentError("the zeros suite needs --zeros PATH")
    zeros = load_zeros(args.zeros) if args.zeros else None

    if args.suite == "all":
        names = [s for s in SUITES if s != "zeros" or zeros is not None]
        if zeros is None:
            logger.warning("No --zeros file given, skipping the zeros suite")
    else:
        names = [args.suite]

    start_time = time.time()
    reports = [run_suite(name, zeros=zeros) for name in names]
    for report in reports:
        for check in report.checks:
            print(check.line())
        print(report.summary())
        if report.suite == "laurent" and args.tables:
            print("\n".join(laurent_table_rows()))

    passed = all(r.passed for r in reports)
    logger.info(
        f"Verification {'passed' if passed else 'FAILED'} "
        f"({len(reports)} suite(s), {time.time() - start_time:.2f}s)"
    )
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_zeros_audit(args: argparse.Namespace) -> int:
    table = load_zeros(args.zeros)
    points = parse_points(args.points)
    if not points:
        raise ArgumentError("zeros-audit needs at least one point")

    results = []
    print("s_re,s_im,b_re,b_im,tail,power_defect,power_tail")
    for s in points:
        linear = zero_sum_linear(table, s)
        results.append(linear)
        power = ","
        if POWER_WINDOW[0] < s.real <= POWER_WINDOW[1] and table.count:
            audit = zero_sum_power_audit(table, 2, s)
            power = f"{_fmt(audit.defect)},{_fmt(audit.tail)}"
        print(
            f"{_fmt(s.real)},{_fmt(s.imag)},{_fmt(linear.b_estimate.real)},"
            f"{_fmt(linear.b_estimate.imag)},{_fmt(linear.tail)},{power}"
        )
    logger.info(f"b_estimate spread over {len(results)} point(s): {b_spread(results):.3e}")
    return EXIT_OK


# Used by main to build the parser choices
VARIANT_CHOICES = [k.value for k in VariantKind if k is not VariantKind.DERIVED]
FAMILY_CHOICES = [VariantKind.CONV_POWER.value, VariantKind.GENERALIZED.value]
SUITE_CHOICES = [*SUITES, "all"]
