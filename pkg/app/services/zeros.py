"""
Zeta-zero service.
Loads ordinate tables of nontrivial zeros rho = 1/2 + i gamma and audits
the partial-fraction formula for zeta'/zeta together with the truncated
sums over zeros of (s - rho)^-k.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger
from scipy.integrate import quad
from scipy.optimize import brentq

from app.config import settings
from app.exceptions import ArgumentError, DomainError, ZeroTableError
from app.services.special import digamma, log_derivative_taylor, polygamma, zeta_ratio
from app.services.summation import block_sum

FIRST_ORDINATE_FLOOR = 14.0
MIN_AUDIT_COUNT = 50
LINEAR_WINDOW = (1.5, 4.0)
POWER_WINDOW = (0.5, 2.0)
MAX_POWER = 6
ZERO_PROXIMITY = 1e-8
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class ZeroTable:
    """Ascending zero ordinates; conjugate zeros are implied."""

    ordinates: np.ndarray = field(repr=False)
    source: Path | None = None

    @property
    def count(self) -> int:
        return int(self.ordinates.size)

    def head(self, n: int) -> "ZeroTable":
        """The first n ordinates."""
        return ZeroTable(self.ordinates[:n].copy(), self.source)


def load_zeros(path: str | Path) -> ZeroTable:
    """
    Parse a plain-text ordinate table.

    One positive decimal per line, strictly ascending; blank lines and lines
    starting with '#' are skipped.

    Raises:
        ZeroTableError: on a malformed, non-positive or non-ascending line,
            or when the first ordinate is not above 14.
    """
    path = Path(path)
    values: list[float] = []
    first_line = None
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            try:
                value = float(text)
            except ValueError as e:
                raise ZeroTableError(f"not a number: '{text}'", line=lineno) from e
            if not math.isfinite(value) or value <= 0:
                raise ZeroTableError(f"ordinate must be positive, got {text}", line=lineno)
            if values and value <= values[-1]:
                raise ZeroTableError(
                    f"ordinates must be strictly ascending ({value} after {values[-1]})",
                    line=lineno,
                )
            if first_line is None:
                first_line = lineno
            values.append(value)

    if values and values[0] <= FIRST_ORDINATE_FLOOR:
        raise ZeroTableError(
            f"first ordinate {values[0]} is not above {FIRST_ORDINATE_FLOOR:g}",
            line=first_line,
        )
    logger.info(f"Loaded {len(values)} zero ordinate(s) from {path}")
    return ZeroTable(np.array(values, dtype=np.float64), path)


# ── Smoothed zero density ───────────────────────────────────────────────────


def smoothed_count(t: float) -> float:
    """(t/2pi) log(t/2pi e) + 7/8."""
    return t / TWO_PI * math.log(t / (TWO_PI * math.e)) + 7 / 8


def zero_density(u: float) -> float:
    return math.log(u / TWO_PI) / TWO_PI


def completion_height(count: int) -> float:
    """Height T where the smoothed count equals count + 1/2."""
    target = count + 0.5
    lo = TWO_PI * math.e
    hi = max(2 * lo, 50.0)
    while smoothed_count(hi) < target:
        hi *= 2
    return brentq(lambda t: smoothed_count(t) - target, lo, hi, xtol=1e-12)


def _density_integral(func, lower: float) -> complex:
    """Integral of func(u) zero_density(u) over (lower, inf) for complex func."""
    parts = []
    for component in (lambda u: func(u).real, lambda u: func(u).imag):
        value = quad(
            lambda u: component(u) * zero_density(u),
            lower,
            np.inf,
            limit=settings.quad_limit,
        )[0]
        parts.append(value)
    return complex(parts[0], parts[1])


# ── Linear sum ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class LinearZeroSum:
    """Paired sum of 1/(s - rho) + 1/rho, completed by the smoothed density."""

    s: complex
    count: int
    truncated: complex
    completion: complex
    b_estimate: complex

    @property
    def sum(self) -> complex:
        return self.truncated + self.completion

    @property
    def tail(self) -> float:
        return abs(self.completion)


def _paired_linear(w: complex, gamma: np.ndarray | float):
    """Terms at rho = 1/2 +- i gamma combined: 2w/(w^2 + gamma^2) + 1/(1/4 + gamma^2)."""
    return 2 * w / (w * w + gamma * gamma) + 1 / (0.25 + gamma * gamma)


def zero_free_part(s: complex) -> complex:
    """zeta'/zeta(s) - 1/2 log pi + 1/(s-1) + 1/2 digamma(s/2 + 1)."""
    return (
        zeta_ratio(s, 1)
        - 0.5 * math.log(math.pi)
        + 1 / (s - 1)
        + 0.5 * digamma(s / 2 + 1)
    )


def zero_sum_linear(table: ZeroTable, s: complex) -> LinearZeroSum:
    """
    Sum over zeros of 1/(s - rho) + 1/rho and the implied constant B.

    Args:
        table: Zero ordinates (conjugates implied).
        s: Evaluation point with 1.5 <= Re(s) <= 4.

    Returns:
        LinearZeroSum; b_estimate = zero_free_part(s) - sum.
    """
    s = complex(s)
    lo, hi = LINEAR_WINDOW
    if not lo <= s.real <= hi:
        raise DomainError(f"zero_sum_linear needs {lo} <= Re(s) <= {hi}, got s={s}")
    if 0 < table.count < MIN_AUDIT_COUNT:
        raise DomainError(
            f"zero_sum_linear needs at least {MIN_AUDIT_COUNT} zeros, got {table.count}"
        )

    w = s - 0.5
    if table.count:
        terms = _paired_linear(w, table.ordinates)
        truncated = complex(block_sum(terms.real), block_sum(terms.imag))
        height = completion_height(table.count)
        completion = _density_integral(lambda u: _paired_linear(w, u), height)
    else:
        truncated = completion = 0j

    result = LinearZeroSum(
        s=s,
        count=table.count,
        truncated=truncated,
        completion=completion,
        b_estimate=zero_free_part(s) - (truncated + completion),
    )
    logger.debug(
        f"Linear zero sum at s={s}: count={table.count} "
        f"b={result.b_estimate:.12g} tail={result.tail:.3e}"
    )
    return result


def b_spread(results: list[LinearZeroSum]) -> float:
    """Standard deviation of the b estimates around their mean."""
    if not results:
        raise ArgumentError("b_spread needs at least one result")
    values = np.array([r.b_estimate for r in results])
    return float(np.sqrt(np.mean(np.abs(values - values.mean()) ** 2)))


# ── Power sums ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PowerZeroSum:
    s: complex
    k: int
    count: int
    value: complex
    tail: float


def _check_power_args(table: ZeroTable, k: int, s: complex) -> None:
    if not 2 <= k <= MAX_POWER:
        raise ArgumentError(f"k must lie in 2..{MAX_POWER}, got {k}")
    lo, hi = POWER_WINDOW
    if not lo < s.real <= hi:
        raise DomainError(f"zero_sum_power needs {lo} < Re(s) <= {hi}, got s={s}")
    if table.count:
        distance = np.min(np.abs(np.abs(s.imag) - table.ordinates))
        if abs(s.real - 0.5) < ZERO_PROXIMITY and distance < ZERO_PROXIMITY:
            raise DomainError(f"s={s} is on a stored zero")


def _power_tail(k: int, s: complex, count: int) -> float:
    """Twice the smoothed-density tail of 2 (u - |t|)^-k above the completion height."""
    height = completion_height(count)
    shift = abs(s.imag)
    if height <= shift + 1:
        return math.inf
    bound = _density_integral(lambda u: complex(2 * (u - shift) ** (-k)), height)
    return 2 * bound.real


def zero_sum_power(table: ZeroTable, k: int, s: complex) -> PowerZeroSum:
    """Truncated sum over stored zeros and their conjugates of (s - rho)^-k."""
    s = complex(s)
    _check_power_args(table, k, s)
    if not table.count:
        return PowerZeroSum(s=s, k=k, count=0, value=0j, tail=0.0)

    w = s - 0.5
    gamma = table.ordinates
    terms = (w - 1j * gamma) ** (-k) + (w + 1j * gamma) ** (-k)
    return PowerZeroSum(
        s=s,
        k=k,
        count=table.count,
        value=complex(block_sum(terms.real), block_sum(terms.imag)),
        tail=_power_tail(k, s, table.count),
    )


@dataclass(frozen=True)
class PowerSumAudit:
    s: complex
    k: int
    truncated: complex
    implied: complex
    tail: float

    @property
    def defect(self) -> float:
        return abs(self.truncated - self.implied)

    @property
    def passed(self) -> bool:
        return self.defect <= self.tail


def implied_power_sum(k: int, s: complex) -> complex:
    """sum_rho (s - rho)^-k from the (k-1)-th derivative of zeta'/zeta.

    z^(k-1)(s) = (-1)^k (k-1)!/(s-1)^k - 2^-k digamma^(k-1)(s/2+1)
                 + (-1)^(k-1) (k-1)! sum_rho (s - rho)^-k
    """
    s = complex(s)
    factorial = math.factorial(k - 1)
    derivative = factorial * complex(log_derivative_taylor(s, k - 1)[k - 1])
    pole = (-1) ** k * factorial / (s - 1) ** k
    gamma_part = -(2.0 ** -k) * polygamma(k - 1, s / 2 + 1)
    return (derivative - pole - gamma_part) / ((-1) ** (k - 1) * factorial)


def zero_sum_power_audit(table: ZeroTable, k: int, s: complex) -> PowerSumAudit:
    truncated = zero_sum_power(table, k, s)
    audit = PowerSumAudit(
        s=truncated.s,
        k=k,
        truncated=truncated.value,
        implied=implied_power_sum(k, s),
        tail=truncated.tail,
    )
    if not audit.passed:
        logger.warning(
            f"Power-sum audit k={k} s={s}: defect {audit.defect:.3e} "
            f"exceeds tail {audit.tail:.3e}"
        )
    return audit
