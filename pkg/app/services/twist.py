"""
Twisted sum service.
Evaluates sum_{n<=x} f(n) n^(-iy) for a Lambda-family table, subtracts the
main term and normalizes the remainder, over x grids in one pass per y.
"""

import csv
import io
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger

from app.config import settings
from app.exceptions import ArgumentError, RangeError
from app.services.arith_tables import ArithTable, Variant, VariantKind
from app.services.mainterm import MainTermSpec, main_term, main_term_spec
from app.services.models import ScanSpec
from app.services.summation import ComplexCompensatedSum, block_sum
from app.services.table_store import TableStore

MAX_TWIST = 1e6
CSV_HEADER = (
    "k", "variant", "x", "y",
    "psi_re", "psi_im", "main_re", "main_im", "r_re", "r_im",
    "normalized",
)


@dataclass(frozen=True)
class TwistRecord:
    x: float
    y: float
    psi: complex
    main: complex
    remainder: complex
    normalized: float


@dataclass(frozen=True)
class ScanResult:
    """Records in (y, x) order plus the largest normalized remainder."""

    records: list[TwistRecord] = field(default_factory=list)
    max_normalized: float = 0.0
    argmax: tuple[float, float] | None = None


def _check_point(table: ArithTable, x: float, y: float) -> int:
    if not math.isfinite(x) or x < 1:
        raise ArgumentError(f"x must be >= 1, got {x}")
    if x > table.n_max:
        raise RangeError(f"x={x} exceeds the table size n_max={table.n_max}")
    if not math.isfinite(y) or abs(y) > MAX_TWIST:
        raise RangeError(f"|y| must be <= {MAX_TWIST:g}, got y={y}")
    return math.floor(x)


def _twist_block(table: ArithTable, y: float, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts of f(n) n^(-iy) for lo <= n <= hi."""
    phase = y * table.log_n[lo : hi + 1]
    weights = table.values[lo : hi + 1]
    return weights * np.cos(phase), -(weights * np.sin(phase))


def twisted_sum(table: ArithTable, x: float, y: float) -> complex:
    """sum_{n <= x} table[n] n^(-iy), both components summed exactly rounded."""
    cut = _check_point(table, x, y)
    if cut < 2:
        return 0j
    re_block, im_block = _twist_block(table, y, 1, cut)
    return complex(block_sum(re_block), block_sum(im_block))


def prefix_scan(table: ArithTable, y: float, x_grid: list[float]) -> list[complex]:
    """Partial sums at every grid point from a single pass over n."""
    cuts = [_check_point(table, x, y) for x in x_grid]
    if any(b <= a for a, b in zip(x_grid, x_grid[1:])):
        raise ArgumentError("x_grid must be strictly ascending")

    chunk = settings.segment_size
    running = ComplexCompensatedSum()
    results = []
    done = 1
    for cut in cuts:
        while done < cut:
            hi = min(cut, done + chunk)
            running.add_block(*_twist_block(table, y, done + 1, hi))
            done = hi
        results.append(running.value)
    return results


def normalized_remainder(remainder: complex, x: float, y: float, k: int) -> float:
    """|R| / (sqrt(x) log(x + |y|)^e) with e = 2 for k = 1 and 2k + 1 otherwise."""
    exponent = 2 if k == 1 else 2 * k + 1
    return abs(remainder) / (math.sqrt(x) * math.log(x + abs(y)) ** exponent)


def _records_for_y(
    table: ArithTable, spec: MainTermSpec, y: float, x_grid: list[float]
) -> list[TwistRecord]:
    records = []
    for x, psi in zip(x_grid, prefix_scan(table, y, x_grid)):
        main = main_term(spec, x, y)
        remainder = psi - main
        records.append(
            TwistRecord(
                x=x,
                y=y,
                psi=psi,
                main=main,
                remainder=remainder,
                normalized=normalized_remainder(remainder, x, y, spec.k),
            )
        )
    return records


def render_csv(records: list[TwistRecord], k: int, variant: VariantKind) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(
            [k, variant.value]
            + [
                format(v, ".17g")
                for v in (
                    r.x, r.y,
                    r.psi.real, r.psi.imag,
                    r.main.real, r.main.imag,
                    r.remainder.real, r.remainder.imag,
                    r.normalized,
                )
            ]
        )
    return buffer.getvalue()


def write_atomic(text: str, path: str | Path) -> Path:
    """Write text through a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def scan(
    spec: ScanSpec,
    table: ArithTable | None = None,
    store: TableStore | None = None,
    workers: int | None = None,
) -> ScanResult:
    """
    Twisted sums, main terms and normalized remainders over the requested grid.

    Args:
        spec: Validated scan request.
        table: Prebuilt table; loaded or built through the store when absent.
        store: Table cache to use.
        workers: Threads across y values.

    Returns:
        ScanResult with records ordered by (y, x).
    """
    variant = Variant.parse(spec.variant.value, spec.k)
    if table is None:
        store = store or TableStore()
        table, _ = store.get_or_build(variant, spec.n_max, workers=workers)
    elif table.variant != variant:
        raise ArgumentError(f"table holds {table.variant.slug}, scan needs {variant.slug}")

    mt_spec = main_term_spec(spec.k, spec.variant)
    y_values = sorted(set(spec.y_list))
    x_grid = list(spec.x_grid)

    start_time = time.time()
    workers = workers or settings.worker_count
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(y_values) or 1))) as pool:
        per_y = list(pool.map(lambda y: _records_for_y(table, mt_spec, y, x_grid), y_values))
    records = [r for block in per_y for r in block]

    result = ScanResult(records=records)
    if records:
        top = max(records, key=lambda r: r.normalized)
        result = ScanResult(
            records=records, max_normalized=top.normalized, argmax=(top.x, top.y)
        )
    logger.info(
        f"Scan k={spec.k} {spec.variant.value}: {len(records)} record(s) "
        f"in {time.time() - start_time:.2f}s, max normalized={result.max_normalized:.6g}"
    )

    if spec.output is not None:
        write_atomic(render_csv(records, spec.k, spec.variant), spec.output)
        logger.info(f"Wrote {len(records)} row(s) to {spec.output}")
    return result
