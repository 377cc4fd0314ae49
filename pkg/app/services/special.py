"""
Special function service.
Direct evaluation of zeta and its derivatives by Euler-Maclaurin summation,
the digamma and polygamma functions from the Weierstrass-product series,
and checks of the Dirichlet-series identities for Lambda^k and Lambda_k.
"""

import math
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.polynomial import Polynomial
from scipy.special import bernoulli

from app.config import settings
from app.exceptions import ArgumentError, DomainError, RangeError
from app.services.arith_tables import ArithTable, Variant, VariantKind, build_table
from app.services.laurent import parse_family
from app.services.summation import block_sum

MAX_ZETA_HEIGHT = 1e3
MAX_DERIVATIVE = 6
MAX_POLYGAMMA = 6
NEAR_POLE = 1e-3
POLE_PROXIMITY = 1e-6
EM_TOLERANCE = 1e-13


@dataclass(frozen=True)
class EvalPoint:
    """s = sigma + i t together with tau = |t| + 2."""

    s: complex
    sigma: float
    t: float
    tau: float

    @classmethod
    def of(cls, s: complex) -> "EvalPoint":
        s = complex(s)
        return cls(s=s, sigma=s.real, t=s.imag, tau=abs(s.imag) + 2.0)


def _block_sum_complex(values: np.ndarray) -> complex:
    return complex(block_sum(values.real), block_sum(values.imag))


# ── Zeta ────────────────────────────────────────────────────────────────────


def _zeta_em(
    s: complex, j_max: int, cutoff: int, depth: int
) -> tuple[np.ndarray, float]:
    """zeta^(j)(s) for j <= j_max, and the size of the last correction."""
    n = np.arange(1, cutoff, dtype=np.float64)
    minus_log_n = -np.log(n)
    n_pow = np.exp(s * minus_log_n)
    minus_log_cutoff = -math.log(cutoff)
    cutoff_pow = np.exp(s * minus_log_cutoff)
    bern = bernoulli(2 * depth)
    rising = [
        Polynomial.fromroots([-i for i in range(2 * k - 1)])
        for k in range(1, depth + 1)
    ]

    values = np.zeros(j_max + 1, dtype=np.complex128)
    for j in range(j_max + 1):
        direct = _block_sum_complex(minus_log_n**j * n_pow)

        # N^{1-s}/(s-1)
        integral = sum(
            math.comb(j, i)
            * (-1) ** i
            * math.factorial(i)
            * (s - 1) ** (-i - 1)
            * minus_log_cutoff ** (j - i)
            for i in range(j + 1)
        ) * (cutoff * cutoff_pow)

        half = minus_log_cutoff**j * cutoff_pow / 2

        corrections = 0j
        for k, poly in enumerate(rising, start=1):
            weight = bern[2 * k] / math.factorial(2 * k)
            scale = cutoff_pow * cutoff ** (1 - 2 * k)
            derivative_sum = 0j
            deriv = poly
            for i in range(j + 1):
                derivative_sum += (
                    math.comb(j, i) * deriv(s) * minus_log_cutoff ** (j - i)
                )
                deriv = deriv.deriv()
            corrections += weight * scale * derivative_sum
        values[j] = direct + integral + half + corrections

    last = abs(
        bern[2 * depth] / math.factorial(2 * depth)
        * rising[-1](s)
        * cutoff_pow
        * cutoff ** (1 - 2 * depth)
    )
    return values, last


def zeta_derivatives(s: complex, j_max: int = 0) -> np.ndarray:
    """zeta(s), zeta'(s), ..., zeta^(j_max)(s) by Euler-Maclaurin summation.

    Derivatives come from differentiating every Euler-Maclaurin term in s,
    so each carries powers of log N rather than a numerical difference.
    """
    point = EvalPoint.of(s)
    if not 0 <= j_max <= MAX_DERIVATIVE:
        raise ArgumentError(f"j_max must lie in 0..{MAX_DERIVATIVE}, got {j_max}")
    if point.sigma <= 0:
        raise DomainError(f"zeta_derivatives needs Re(s) > 0, got s={point.s}")
    if abs(point.s - 1) < NEAR_POLE:
        raise DomainError(
            f"s={point.s} is within {NEAR_POLE} of the pole; use the Laurent "
            f"expansion instead"
        )
    if abs(point.t) > MAX_ZETA_HEIGHT:
        raise RangeError(f"|Im(s)| = {abs(point.t)} exceeds {MAX_ZETA_HEIGHT:g}")

    cutoff = max(settings.zeta_em_min_cutoff, math.ceil(2 * abs(point.t)))
    depth = settings.zeta_em_depth
    for _ in range(8):
        values, last = _zeta_em(point.s, j_max, cutoff, depth)
        if last <= EM_TOLERANCE * max(abs(values[0]), 1.0):
            break
        cutoff *= 2
    else:
        logger.warning(
            f"Euler-Maclaurin tail {last:.2e} above tolerance at s={point.s}"
        )
    return values


def zeta_ratio(s: complex, j: int) -> complex:
    """z_j(s) = zeta^(j)(s) / zeta(s)."""
    values = zeta_derivatives(s, j)
    return complex(values[j] / values[0])


def log_derivative_taylor(s: complex, order: int) -> np.ndarray:
    """Taylor coefficients q_0..q_order of zeta'/zeta at s."""
    if not 0 <= order < MAX_DERIVATIVE:
        raise ArgumentError(f"order must lie in 0..{MAX_DERIVATIVE - 1}, got {order}")
    derivs = zeta_derivatives(s, order + 1)
    factorials = np.array([math.factorial(j) for j in range(order + 2)])
    zeta_coeffs = derivs / factorials
    numerator = derivs[1:] / factorials[:-1]

    quotient = np.zeros(order + 1, dtype=np.complex128)
    for n in range(order + 1):
        acc = numerator[n] - np.dot(zeta_coeffs[1 : n + 1], quotient[n - 1 :: -1][:n])
        quotient[n] = acc / zeta_coeffs[0]
    return quotient


def alpha_direct(k: int, variant: str | VariantKind, s: complex) -> complex:
    """(-1)^k (zeta'/zeta)^k for conv, (-1)^k zeta^(k)/zeta for gen."""
    if not 1 <= k <= MAX_DERIVATIVE:
        raise ArgumentError(f"k must lie in 1..{MAX_DERIVATIVE}, got {k}")
    kind = parse_family(variant)
    sign = (-1) ** k
    if kind is VariantKind.CONV_POWER:
        return sign * zeta_ratio(s, 1) ** k
    return sign * zeta_ratio(s, k)


def quotient_rule_check(s: complex, m: int, step: float = 1e-3) -> float:
    """Relative defect of z_m' = z_{m+1} - z_1 z_m.

    z_m' comes from a five-point central difference of z_m, so the check
    is independent of the algebra it tests.
    """
    if not 1 <= m < MAX_DERIVATIVE:
        raise ArgumentError(f"m must lie in 1..{MAX_DERIVATIVE - 1}, got {m}")
    s = complex(s)
    stencil = [zeta_ratio(s + o * step, m) for o in (-2, -1, 1, 2)]
    derivative = (stencil[0] - 8 * stencil[1] + 8 * stencil[2] - stencil[3]) / (
        12 * step
    )
    predicted = zeta_ratio(s, m + 1) - zeta_ratio(s, 1) * zeta_ratio(s, m)
    return abs(derivative - predicted) / max(abs(predicted), 1.0)


# ── Gamma derivatives ───────────────────────────────────────────────────────


def _check_gamma_domain(s: complex) -> None:
    nearest = round(s.real)
    if nearest <= 0 and abs(s - nearest) < POLE_PROXIMITY:
        raise DomainError(f"s={s} is within {POLE_PROXIMITY} of the pole at {nearest}")
    if s.real < 0.05:
        raise DomainError(f"Re(s) must be >= 0.05, got s={s}")


def _gamma_cutoff(s: complex) -> int:
    return max(settings.digamma_cutoff, math.ceil(2 * abs(s)))


def digamma(s: complex) -> complex:
    """Gamma'/Gamma(s) = -1/s - gamma_0 + s sum_{n>=1} 1/(n(n+s)).

    The sum runs directly to N-1; the rest, sum_{n>=N} f'(n) with
    f(u) = log(u/(u+s)), is the integral -f(N) plus the sawtooth correction
    expanded in Bernoulli numbers.
    """
    s = complex(s)
    _check_gamma_domain(s)
    cutoff = _gamma_cutoff(s)
    depth = settings.zeta_em_depth
    n = np.arange(1, cutoff, dtype=np.float64)
    direct = _block_sum_complex(s / (n * (n + s)))

    tail = np.log(1 + s / cutoff) + (1 / cutoff - 1 / (cutoff + s)) / 2
    bern = bernoulli(2 * depth)
    for j in range(1, depth + 1):
        r = 2 * j - 1
        g_r = -math.factorial(r) * (cutoff ** (-r - 1) - (cutoff + s) ** (-r - 1))
        tail -= bern[2 * j] / math.factorial(2 * j) * g_r
    return -1 / s - np.euler_gamma + direct + tail


def polygamma(ell: int, s: complex) -> complex:
    """d^ell/ds^ell Gamma'/Gamma(s) = (-1)^(ell-1) ell! (s^-(ell+1) + sum 1/(n+s)^(ell+1))."""
    if not 1 <= ell <= MAX_POLYGAMMA:
        raise ArgumentError(f"ell must lie in 1..{MAX_POLYGAMMA}, got {ell}")
    s = complex(s)
    _check_gamma_domain(s)
    cutoff = _gamma_cutoff(s)
    depth = settings.zeta_em_depth
    n = np.arange(1, cutoff, dtype=np.float64)
    direct = _block_sum_complex((n + s) ** (-ell - 1))

    tail = (cutoff + s) ** (-ell) / ell + (cutoff + s) ** (-ell - 1) / 2
    bern = bernoulli(2 * depth)
    for j in range(1, depth + 1):
        r = 2 * j - 1
        rising = math.prod(range(ell + 1, ell + r + 1))
        h_r = -rising * (cutoff + s) ** (-ell - 1 - r)
        tail -= bern[2 * j] / math.factorial(2 * j) * h_r
    return (-1) ** (ell - 1) * math.factorial(ell) * (s ** (-ell - 1) + direct + tail)


# ── Dirichlet-series identities ─────────────────────────────────────────────


def log_power_tail(r: int, a: float, lower: float) -> float:
    """Closed form of the integral of v^r e^{-a v} over (lower, infinity), a > 0."""
    if a <= 0:
        raise ArgumentError(f"log_power_tail needs a > 0, got {a}")
    return math.exp(-a * lower) * math.fsum(
        math.factorial(r) / math.factorial(i) * lower**i * a ** (i - r - 1)
        for i in range(r + 1)
    )


@dataclass(frozen=True)
class IdentityCheck:
    """Partial Dirichlet sum against its zeta closed form."""

    k: int
    variant: VariantKind
    s: float
    n_max: int
    partial: float
    closed: float
    tail_bound: float

    @property
    def discrepancy(self) -> float:
        return abs(self.partial - self.closed)

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tail_bound + 1e-12 * abs(self.closed)


def dirichlet_identity_check(
    k: int,
    variant: str | VariantKind,
    s: float,
    n_max: int,
    table: ArithTable | None = None,
) -> IdentityCheck:
    """Compare sum_{n<=N} f(n) n^-s with its zeta closed form.

    The omitted tail is bounded by the integral of (log u)^k u^-s over
    (N, infinity), since 0 <= f(n) <= (log n)^k.
    """
    kind = parse_family(variant)
    if s < 2.5:
        raise DomainError(f"identity check needs s >= 2.5, got s={s}")
    if n_max < 10_000:
        raise ArgumentError(f"identity check needs N >= 10^4, got {n_max}")
    if table is None:
        family = (
            Variant.conv_power(k)
            if kind is VariantKind.CONV_POWER
            else Variant.generalized(k)
        )
        table = build_table(family, n_max)
    elif table.n_max < n_max:
        raise ArgumentError(f"table holds {table.n_max} values, need {n_max}")

    weights = table.values[1 : n_max + 1] * np.exp(-s * table.log_n[1 : n_max + 1])
    check = IdentityCheck(
        k=k,
        variant=kind,
        s=float(s),
        n_max=n_max,
        partial=block_sum(weights),
        closed=alpha_direct(k, kind, s).real,
        tail_bound=log_power_tail(k, s - 1, math.log(n_max)),
    )
    logger.info(
        f"Dirichlet identity k={k} {kind.value} s={s}: "
        f"|partial-closed|={check.discrepancy:.3e}, tail<={check.tail_bound:.3e}"
    )
    return check
