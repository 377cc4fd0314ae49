"""
Arithmetic table service.
Builds dense tables of the von Mangoldt function, the Moebius function,
the k-fold convolution power of von Mangoldt and the generalized von
Mangoldt function on 1..n_max, and serializes them to the cache format.
"""

import math
import os
import struct
import tempfile
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property, lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
from loguru import logger

from app.config import settings
from app.exceptions import ArgumentError, ResourceBudgetError, TableFormatError

MAGIC = b"MTL1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIBBQ")
_CRC = struct.Struct("<I")


class VariantKind(str, Enum):
    """Arithmetic functions the laboratory tabulates."""

    VON_MANGOLDT = "lambda"
    MOEBIUS = "mu"
    CONV_POWER = "conv"
    GENERALIZED = "gen"
    NATURAL_LOG = "log"
    DERIVED = "derived"


_TAG_OF_KIND = {
    VariantKind.VON_MANGOLDT: 0,
    VariantKind.MOEBIUS: 1,
    VariantKind.CONV_POWER: 2,
    VariantKind.GENERALIZED: 3,
    VariantKind.NATURAL_LOG: 4,
}
_KIND_OF_TAG = {tag: kind for kind, tag in _TAG_OF_KIND.items()}


@dataclass(frozen=True)
class Variant:
    """Tag identifying which arithmetic function a table holds."""

    kind: VariantKind
    k: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind in (VariantKind.CONV_POWER, VariantKind.GENERALIZED):
            if self.k < 1:
                raise ArgumentError(
                    f"{self.kind.value} variant needs k >= 1, got k={self.k}"
                )
        elif self.kind is not VariantKind.DERIVED and self.k != 0:
            raise ArgumentError(f"{self.kind.value} variant takes no k")

    @classmethod
    def von_mangoldt(cls) -> "Variant":
        return cls(VariantKind.VON_MANGOLDT)

    @classmethod
    def moebius(cls) -> "Variant":
        return cls(VariantKind.MOEBIUS)

    @classmethod
    def natural_log(cls) -> "Variant":
        return cls(VariantKind.NATURAL_LOG)

    @classmethod
    def conv_power(cls, k: int) -> "Variant":
        return cls(VariantKind.CONV_POWER, k)

    @classmethod
    def generalized(cls, k: int) -> "Variant":
        return cls(VariantKind.GENERALIZED, k)

    @classmethod
    def parse(cls, name: str, k: int = 1) -> "Variant":
        """Build a variant from its CLI name (lambda, mu, log, conv, gen).

        k must be >= 1 for every name; only conv and gen carry it.
        """
        try:
            kind = VariantKind(name)
        except ValueError as e:
            raise ArgumentError(f"unknown variant '{name}'") from e
        if kind is VariantKind.DERIVED:
            raise ArgumentError("derived variants cannot be requested by name")
        if k < 1:
            raise ArgumentError(f"{name} variant needs k >= 1, got k={k}")
        if kind in (VariantKind.CONV_POWER, VariantKind.GENERALIZED):
            return cls(kind, k)
        return cls(kind)

    @property
    def is_lambda_family(self) -> bool:
        return self.kind in (
            VariantKind.VON_MANGOLDT,
            VariantKind.CONV_POWER,
            VariantKind.GENERALIZED,
        )

    @property
    def slug(self) -> str:
        if self.kind is VariantKind.DERIVED:
            return f"derived-{self.label}"
        if self.k:
            return f"{self.kind.value}-k{self.k}"
        return self.kind.value


@dataclass(frozen=True)
class ArithTable:
    """Values of one arithmetic function on 1..n_max.

    ``values`` has length n_max + 1; slot 0 is padding and always 0.0.
    """

    variant: Variant
    n_max: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_max < 1:
            raise ArgumentError(f"n_max must be >= 1, got {self.n_max}")
        if self.values.shape != (self.n_max + 1,):
            raise ArgumentError(
                f"values must have length n_max+1={self.n_max + 1}, "
                f"got {self.values.shape}"
            )
        self.values.flags.writeable = False

    def __getitem__(self, n: int) -> float:
        if not 1 <= n <= self.n_max:
            raise IndexError(f"index {n} outside 1..{self.n_max}")
        return float(self.values[n])

    def __len__(self) -> int:
        return self.n_max

    @cached_property
    def log_n(self) -> np.ndarray:
        """log n for n = 0..n_max, with slot 0 set to 0."""
        return _log_array(self.n_max)

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.values))


# ── Sieving ─────────────────────────────────────────────────────────────────


def _log_array(n_max: int) -> np.ndarray:
    logs = np.zeros(n_max + 1, dtype=np.float64)
    logs[1:] = np.log(np.arange(1, n_max + 1, dtype=np.float64))
    logs.flags.writeable = False
    return logs


def _check_budget(n_max: int, arrays: int, budget_mb: int | None = None) -> None:
    """Refuse allocations of ``arrays`` float64 tables beyond the budget."""
    budget = budget_mb if budget_mb is not None else settings.memory_budget_mb
    requested_mb = arrays * 8 * (n_max + 1) / 2**20
    if requested_mb > budget:
        raise ResourceBudgetError(requested_mb, budget)


def small_primes(limit: int) -> np.ndarray:
    """Eratosthenes sieve for primes up to ``limit`` (inclusive)."""
    if limit < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for i in range(2, math.isqrt(limit) + 1):
        if is_prime[i]:
            is_prime[i * i :: i] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def _sieve_segment(
    lo: int, hi: int, base_primes: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Lambda and mu on [lo, hi) from the primes up to sqrt(hi - 1)."""
    n = np.arange(lo, hi, dtype=np.int64)
    rem = n.copy()
    mu = np.ones(hi - lo, dtype=np.int8)
    lam = np.zeros(hi - lo, dtype=np.float64)

    for p in base_primes.tolist():
        first = -(-lo // p) * p
        rem[first - lo :: p] //= p
        mu[first - lo :: p] *= -1
        p2 = p * p
        first_sq = -(-lo // p2) * p2
        mu[first_sq - lo :: p2] = 0

        log_p = math.log(p)
        pa = p
        while pa < hi:
            if pa >= lo:
                lam[pa - lo] = log_p
            pa *= p

    # What survives the small primes is one prime above sqrt(hi).
    large = rem > 1
    mu[large] *= -1
    prime = (rem == n) & (n >= 2)
    lam[prime] = np.log(n[prime].astype(np.float64))
    return lam, mu


def _segments(n_max: int, segment_size: int) -> list[tuple[int, int]]:
    return [
        (lo, min(lo + segment_size, n_max + 1))
        for lo in range(1, n_max + 1, segment_size)
    ]


def sieve_tables(
    n_max: int,
    workers: int | None = None,
    budget_mb: int | None = None,
) -> tuple[ArithTable, ArithTable]:
    """One sieve pass producing the von Mangoldt and Moebius tables."""
    if n_max < 1:
        raise ArgumentError(f"n_max must be >= 1, got {n_max}")
    _check_budget(n_max, arrays=3, budget_mb=budget_mb)

    start_time = time.time()
    base_primes = small_primes(math.isqrt(n_max))
    if n_max > settings.segment_threshold:
        segments = _segments(n_max, settings.segment_size)
    else:
        segments = [(1, n_max + 1)]

    lam = np.zeros(n_max + 1, dtype=np.float64)
    mu = np.zeros(n_max + 1, dtype=np.float64)

    def fill(bounds: tuple[int, int]) -> None:
        lo, hi = bounds
        seg_lam, seg_mu = _sieve_segment(lo, hi, base_primes)
        lam[lo:hi] = seg_lam
        mu[lo:hi] = seg_mu
        logger.debug(f"Sieved segment [{lo}, {hi})")

    if len(segments) > 1:
        with ThreadPoolExecutor(max_workers=workers or settings.worker_count) as pool:
            list(pool.map(fill, segments))
    else:
        fill(segments[0])

    elapsed = time.time() - start_time
    logger.info(
        f"Sieved n_max={n_max} in {elapsed:.2f}s ({len(segments)} segment(s))"
    )
    return (
        ArithTable(Variant.von_mangoldt(), n_max, lam),
        ArithTable(Variant.moebius(), n_max, mu),
    )


def sieve_von_mangoldt(n_max: int, workers: int | None = None) -> ArithTable:
    """Lambda(n) = log p for n = p^a, else 0."""
    return sieve_tables(n_max, workers=workers)[0]


def sieve_moebius(n_max: int, workers: int | None = None) -> ArithTable:
    """mu(n) in {-1, 0, 1}."""
    return sieve_tables(n_max, workers=workers)[1]


def natural_log_table(n_max: int) -> ArithTable:
    """L(n) = log n."""
    if n_max < 1:
        raise ArgumentError(f"n_max must be >= 1, got {n_max}")
    _check_budget(n_max, arrays=1)
    return ArithTable(Variant.natural_log(), n_max, _log_array(n_max).copy())


def omega_table(n_max: int) -> np.ndarray:
    """Number of distinct prime factors of n for n = 0..n_max."""
    omega = np.zeros(n_max + 1, dtype=np.int16)
    for p in small_primes(n_max).tolist():
        omega[p::p] += 1
    return omega


# ── Convolution ─────────────────────────────────────────────────────────────


def _derived_variant(f: Variant, g: Variant) -> Variant:
    conv_family = (VariantKind.VON_MANGOLDT, VariantKind.CONV_POWER)
    if f.kind in conv_family and g.kind in conv_family:
        return Variant.conv_power(max(f.k, 1) + max(g.k, 1))
    return Variant(VariantKind.DERIVED, label=f"{f.slug}*{g.slug}")


def dirichlet_convolve(f: ArithTable, g: ArithTable) -> ArithTable:
    """(f * g)(n) = sum over d | n of f(d) g(n/d), for n <= n_max.

    Loops over the support of the sparser operand and adds each scaled copy
    of the other with one strided slice, O(n_max log n_max) additions.
    """
    if f.n_max != g.n_max:
        raise ArgumentError(
            f"cannot convolve tables of different sizes: {f.n_max} vs {g.n_max}"
        )
    n_max = f.n_max
    _check_budget(n_max, arrays=2)

    outer, inner = (f, g) if f.nonzero_count <= g.nonzero_count else (g, f)
    inner_values = inner.values
    out = np.zeros(n_max + 1, dtype=np.float64)

    for d in np.flatnonzero(outer.values).tolist():
        m = n_max // d
        out[d::d] += outer.values[d] * inner_values[1 : m + 1]

    return ArithTable(_derived_variant(f.variant, g.variant), n_max, out)


def _require_k(k: int) -> None:
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got k={k}")


def _von_mangoldt_for(n_max: int, von_mangoldt: ArithTable | None) -> ArithTable:
    if von_mangoldt is None:
        return sieve_von_mangoldt(n_max)
    if von_mangoldt.n_max != n_max:
        raise ArgumentError(
            f"von Mangoldt table has n_max={von_mangoldt.n_max}, need {n_max}"
        )
    return von_mangoldt


def lambda_conv_power(
    k: int, n_max: int, von_mangoldt: ArithTable | None = None
) -> ArithTable:
    """Lambda^k, the k-fold Dirichlet convolution of Lambda."""
    _require_k(k)
    lam = _von_mangoldt_for(n_max, von_mangoldt)
    result = lam
    for level in range(2, k + 1):
        start_time = time.time()
        result = dirichlet_convolve(lam, result)
        logger.debug(
            f"Lambda^{level} up to {n_max} in {time.time() - start_time:.2f}s"
        )
    return replace(result, variant=Variant.conv_power(k))


def lambda_generalized(
    k: int, n_max: int, von_mangoldt: ArithTable | None = None
) -> ArithTable:
    """Lambda_k via Lambda_{m+1} = L * Lambda_m + Lambda (*) Lambda_m."""
    _require_k(k)
    lam = _von_mangoldt_for(n_max, von_mangoldt)
    current = lam
    for level in range(2, k + 1):
        start_time = time.time()
        convolved = dirichlet_convolve(lam, current)
        values = lam.log_n * current.values + convolved.values
        current = ArithTable(Variant.generalized(level), n_max, values)
        logger.debug(
            f"Lambda_{level} up to {n_max} in {time.time() - start_time:.2f}s"
        )
    return replace(current, variant=Variant.generalized(k))


def build_table(
    variant: Variant, n_max: int, workers: int | None = None
) -> ArithTable:
    """Build any persistable variant."""
    if variant.kind is VariantKind.VON_MANGOLDT:
        return sieve_von_mangoldt(n_max, workers=workers)
    if variant.kind is VariantKind.MOEBIUS:
        return sieve_moebius(n_max, workers=workers)
    if variant.kind is VariantKind.NATURAL_LOG:
        return natural_log_table(n_max)
    lam = sieve_von_mangoldt(n_max, workers=workers)
    if variant.kind is VariantKind.CONV_POWER:
        return lambda_conv_power(variant.k, n_max, von_mangoldt=lam)
    if variant.kind is VariantKind.GENERALIZED:
        return lambda_generalized(variant.k, n_max, von_mangoldt=lam)
    raise ArgumentError(f"cannot build a table for {variant.slug}")


# ── Oracles ─────────────────────────────────────────────────────────────────


def factorize(n: int) -> dict[int, int]:
    """Prime factorization by trial division."""
    factors: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            factors[d] = factors.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        factors[n] = factors.get(n, 0) + 1
    return factors


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, a in factorize(n).items():
        divs = [d * p**e for d in divs for e in range(a + 1)]
    return sorted(divs)


def von_mangoldt_oracle(n: int) -> float:
    factors = factorize(n)
    if len(factors) != 1:
        return 0.0
    return math.log(next(iter(factors)))


def lambda_generalized_oracle(k: int, n: int) -> float:
    """sum over squarefree d | n of mu(d) (log(n/d))^k, by trial division."""
    _require_k(k)
    if n < 1:
        raise ArgumentError(f"n must be positive, got {n}")
    primes = list(factorize(n))
    terms = []
    for size in range(len(primes) + 1):
        sign = -1.0 if size % 2 else 1.0
        for subset in combinations(primes, size):
            d = math.prod(subset)
            terms.append(sign * math.log(n // d) ** k)
    return math.fsum(terms)


@lru_cache(maxsize=None)
def naive_convolution_power_oracle(k: int, n: int) -> float:
    """Lambda^k(n) by recursive divisor-pair enumeration."""
    _require_k(k)
    if k == 1:
        return von_mangoldt_oracle(n)
    return math.fsum(
        von_mangoldt_oracle(d) * naive_convolution_power_oracle(k - 1, n // d)
        for d in divisors(n)
        if d > 1
    )


@dataclass(frozen=True)
class BoundsReport:
    """Worst signed margins of 0 <= Lambda^k <= Lambda_k <= (log n)^k."""

    k: int
    n_max: int
    lower: float
    middle: float
    upper: float

    @property
    def passed(self) -> bool:
        return min(self.lower, self.middle, self.upper) >= 0.0


def check_von_mangoldt_bounds(
    k: int, n_max: int, slack: float = 1e-9
) -> BoundsReport:
    """Evaluate the three inequalities with slack * (log n)^k allowance.

    Each margin is min over n of (right side - left side + allowance); a
    negative margin is a violation. Rounding residue is never clamped in
    the tables themselves.
    """
    _require_k(k)
    lam = sieve_von_mangoldt(n_max)
    conv = lambda_conv_power(k, n_max, von_mangoldt=lam).values
    gen = lambda_generalized(k, n_max, von_mangoldt=lam).values
    log_power = lam.log_n**k
    allowance = slack * log_power
    report = BoundsReport(
        k=k,
        n_max=n_max,
        lower=float(np.min(conv + allowance)),
        middle=float(np.min(gen - conv + allowance)),
        upper=float(np.min(log_power - gen + allowance)),
    )
    logger.info(f"von Mangoldt bounds k={k} n_max={n_max}: {report}")
    return report


# ── Persistence ─────────────────────────────────────────────────────────────


def save_table(table: ArithTable, path: str | Path) -> Path:
    """Write a table in the MTL1 cache format via an atomic rename."""
    if table.variant.kind not in _TAG_OF_KIND:
        raise ArgumentError(f"variant {table.variant.slug} is not persistable")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    payload = np.ascontiguousarray(table.values[1:], dtype="<f8").tobytes()
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        _TAG_OF_KIND[table.variant.kind],
        table.variant.k,
        table.n_max,
    )
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(header)
            f.write(payload)
            f.write(_CRC.pack(zlib.crc32(payload)))
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug(f"Saved {table.variant.slug} n_max={table.n_max} to {path}")
    return path


def read_header(path: str | Path) -> tuple[Variant, int]:
    """Parse only the header of a cache file."""
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
    return _parse_header(raw, path)


def _parse_header(raw: bytes, path: str | Path) -> tuple[Variant, int]:
    if len(raw) < _HEADER.size:
        raise TableFormatError(f"'{path}': length {len(raw)} shorter than header")
    magic, version, tag, k, n_max = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TableFormatError(f"'{path}': bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise TableFormatError(f"'{path}': unsupported format version {version}")
    if tag not in _KIND_OF_TAG:
        raise TableFormatError(f"'{path}': unknown variant tag {tag}")
    try:
        variant = Variant(_KIND_OF_TAG[tag], k)
    except ArgumentError as e:
        raise TableFormatError(f"'{path}': {e}") from e
    if n_max < 1:
        raise TableFormatError(f"'{path}': n_max {n_max} is not positive")
    return variant, n_max


def load_table(path: str | Path) -> ArithTable:
    """Read a cache file, validating magic, version, length and CRC32."""
    raw = Path(path).read_bytes()
    variant, n_max = _parse_header(raw, path)

    expected = _HEADER.size + 8 * n_max + _CRC.size
    if len(raw) != expected:
        raise TableFormatError(
            f"'{path}': length {len(raw)} bytes, expected {expected}"
        )
    payload = raw[_HEADER.size : expected - _CRC.size]
    (stored_crc,) = _CRC.unpack_from(raw, expected - _CRC.size)
    if zlib.crc32(payload) != stored_crc:
        raise TableFormatError(f"'{path}': checksum mismatch")

    values = np.zeros(n_max + 1, dtype=np.float64)
    values[1:] = np.frombuffer(payload, dtype="<f8")
    return ArithTable(variant, n_max, values)
