"""
Truncated Laurent series around s = 1.

A series is stored as a valuation v and the known coefficients of
(s-1)^v, (s-1)^(v+1), ..., (s-1)^top. Products and quotients keep the
relative precision of the less precise operand (the coefficient count);
sums keep the lower of the two tops; differentiation lowers both v and top
by one. Coefficients are real: every expansion here is of a real function
around the real point s = 1.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from loguru import logger
from numpy.polynomial import Polynomial
from scipy.special import bernoulli

from app.config import settings
from app.exceptions import ArgumentError, NumericalError, SingularSeriesError
from app.services.arith_tables import VariantKind
from app.services.summation import block_sum

MAX_STIELTJES_INDEX = 8
MAX_ALPHA_K = 6
SINGULAR_THRESHOLD = 1e-14


@dataclass(frozen=True)
class PowerSeries:
    """c_0 + c_1 (s-1) + ... + c_M (s-1)^M."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ArgumentError("a power series needs at least one coefficient")
        if not np.all(np.isfinite(self.coeffs)):
            raise NumericalError("power series has non-finite coefficients")

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __getitem__(self, n: int) -> float:
        return float(self.coeffs[n])

    def __call__(self, s: complex) -> complex:
        return Polynomial(self.coeffs)(s - 1)


@dataclass(frozen=True)
class LaurentSeries:
    """Laurent expansion at s = 1 known from (s-1)^valuation up to (s-1)^top."""

    valuation: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ArgumentError("a Laurent series needs at least one coefficient")
        if not np.all(np.isfinite(coeffs)):
            raise NumericalError("Laurent series has non-finite coefficients")
        valuation = self.valuation
        while coeffs.size > 1 and coeffs[0] == 0.0:
            coeffs = coeffs[1:]
            valuation += 1
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "valuation", valuation)

    @property
    def top(self) -> int:
        return self.valuation + self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    @property
    def pole_order(self) -> int:
        if self.is_zero:
            return 0
        return max(0, -self.valuation)

    def coefficient(self, exponent: int) -> float:
        if exponent > self.top:
            raise ArgumentError(
                f"coefficient of (s-1)^{exponent} is beyond the truncation "
                f"order {self.top}"
            )
        if exponent < self.valuation:
            return 0.0
        return float(self.coeffs[exponent - self.valuation])

    def a(self, m: int) -> float:
        """Principal coefficient of (s-1)^(-m)."""
        return self.coefficient(-m)

    def b(self, n: int) -> float:
        """Regular coefficient of (s-1)^n."""
        return self.coefficient(n)

    @property
    def principal(self) -> np.ndarray:
        """a_p, ..., a_1 where p is the pole order."""
        return np.array([self.a(m) for m in range(self.pole_order, 0, -1)])

    @property
    def regular(self) -> PowerSeries:
        return PowerSeries(np.array([self.b(n) for n in range(self.top + 1)]))

    def __call__(self, s: complex) -> complex:
        h = s - 1
        return sum(
            c * h ** (self.valuation + i) for i, c in enumerate(self.coeffs.tolist())
        )

    def __neg__(self) -> "LaurentSeries":
        return LaurentSeries(self.valuation, -self.coeffs)

    def scale(self, factor: float) -> "LaurentSeries":
        return LaurentSeries(self.valuation, factor * self.coeffs)


def _one(count: int) -> LaurentSeries:
    coeffs = np.zeros(count)
    coeffs[0] = 1.0
    return LaurentSeries(0, coeffs)


def series_add(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    valuation = min(a.valuation, b.valuation)
    top = min(a.top, b.top)
    if top < valuation:
        raise ArgumentError("operands share no known coefficients")
    coeffs = [a.coefficient(e) + b.coefficient(e) for e in range(valuation, top + 1)]
    return LaurentSeries(valuation, np.array(coeffs))


def series_mul(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    count = min(a.coeffs.size, b.coeffs.size)
    coeffs = np.convolve(a.coeffs, b.coeffs)[:count]
    return LaurentSeries(a.valuation + b.valuation, coeffs)


def _unit_inverse(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of 1/U for a power series U with U_0 != 0."""
    inverse = np.zeros(coeffs.size)
    inverse[0] = 1.0 / coeffs[0]
    for n in range(1, coeffs.size):
        inverse[n] = -np.dot(coeffs[1 : n + 1], inverse[n - 1 :: -1]) / coeffs[0]
    return inverse


def series_div(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    """a / b by factoring out the pole of b and inverting the unit part."""
    lead = b.coeffs[0]
    if abs(lead) < SINGULAR_THRESHOLD:
        raise SingularSeriesError(
            f"divisor leading coefficient {lead:.3e} is numerically zero"
        )
    reciprocal = LaurentSeries(-b.valuation, _unit_inverse(b.coeffs))
    return series_mul(a, reciprocal)


def series_pow(a: LaurentSeries, n: int) -> LaurentSeries:
    if n < 0:
        raise ArgumentError(f"series_pow needs n >= 0, got {n}")
    result = _one(a.coeffs.size)
    for _ in range(n):
        result = series_mul(result, a)
    return result


def series_derivative(a: LaurentSeries) -> LaurentSeries:
    exponents = np.arange(a.valuation, a.top + 1, dtype=np.float64)
    return LaurentSeries(a.valuation - 1, a.coeffs * exponents)


# ── Stieltjes constants ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class StieltjesSet:
    """gamma_0, ..., gamma_M; gamma_0 is the Euler-Mascheroni constant."""

    gamma: np.ndarray = field(repr=False)

    def __getitem__(self, n: int) -> float:
        return float(self.gamma[n])

    def __len__(self) -> int:
        return self.gamma.size


@lru_cache(maxsize=8)
def _stieltjes_values(count: int, cutoff: int, depth: int) -> np.ndarray:
    """Euler-Maclaurin corrected limits for gamma_0 .. gamma_{count-1}.

    gamma_n = sum_{m<=N} f(m) - (log N)^{n+1}/(n+1) - f(N)/2
              - sum_{j<=depth} B_{2j}/(2j)! f^{(2j-1)}(N),  f(u) = (log u)^n / u.
    A small N keeps the cancellation between the sum and the integral
    within double precision; the correction depth carries the accuracy.
    """
    m = np.arange(1, cutoff + 1, dtype=np.float64)
    logs = np.log(m)
    log_n = math.log(cutoff)
    bern = bernoulli(2 * depth)

    gammas = np.zeros(count)
    for n in range(count):
        direct = block_sum(logs**n / m)
        integral = log_n ** (n + 1) / (n + 1)
        half = log_n**n / cutoff / 2

        # f^{(r)}(u) = u^{-1-r} P_r(log u)
        poly = Polynomial.basis(n)
        corrections = []
        for r in range(1, 2 * depth):
            poly = -r * poly + poly.deriv()
            if r % 2 == 1:
                j = (r + 1) // 2
                weight = bern[2 * j] / math.factorial(2 * j)
                corrections.append(weight * cutoff ** (-1 - r) * poly(log_n))
        gammas[n] = direct - integral - half - math.fsum(corrections)
    return gammas


def stieltjes_constants(M: int) -> StieltjesSet:
    """gamma_0..gamma_M, each accurate to about 1e-10."""
    if not 0 <= M <= MAX_STIELTJES_INDEX:
        raise ArgumentError(
            f"Stieltjes constants are supported for 0 <= M <= "
            f"{MAX_STIELTJES_INDEX}, got M={M}"
        )
    values = _stieltjes_values(
        M + 1, settings.stieltjes_cutoff, settings.stieltjes_depth
    )
    return StieltjesSet(values.copy())


def _zeta_expansion(order: int) -> LaurentSeries:
    gammas = _stieltjes_values(
        order + 1, settings.stieltjes_cutoff, settings.stieltjes_depth
    )
    regular = [(-1) ** n * gammas[n] / math.factorial(n) for n in range(order + 1)]
    return LaurentSeries(-1, np.array([1.0, *regular]))


def zeta_laurent(M: int) -> LaurentSeries:
    """zeta(s) = 1/(s-1) + sum_n (-1)^n gamma_n (s-1)^n / n!, to order M."""
    if not 0 <= M <= MAX_STIELTJES_INDEX:
        raise ArgumentError(
            f"zeta_laurent is supported for 0 <= M <= {MAX_STIELTJES_INDEX}, "
            f"got M={M}"
        )
    return _zeta_expansion(M)


def parse_family(variant: str | VariantKind) -> VariantKind:
    """Normalize a twisted-sum family name to CONV_POWER or GENERALIZED."""
    try:
        kind = VariantKind(variant)
    except ValueError as e:
        raise ArgumentError(f"variant must be 'conv' or 'gen', got '{variant}'") from e
    if kind not in (VariantKind.CONV_POWER, VariantKind.GENERALIZED):
        raise ArgumentError(f"variant must be 'conv' or 'gen', got '{kind.value}'")
    return kind


@lru_cache(maxsize=32)
def _alpha_laurent_cached(k: int, kind: VariantKind, order: int) -> LaurentSeries:
    zeta = _zeta_expansion(order)
    if kind is VariantKind.CONV_POWER:
        log_derivative = series_div(series_derivative(zeta), zeta)
        series = series_pow(log_derivative, k)
    else:
        derivative = zeta
        for _ in range(k):
            derivative = series_derivative(derivative)
        series = series_div(derivative, zeta)
    series = series.scale((-1.0) ** k)

    if series.pole_order != k:
        raise NumericalError(
            f"expansion of alpha for k={k} ({kind.value}) has pole order "
            f"{series.pole_order}, expected {k}"
        )
    logger.debug(
        f"alpha_laurent k={k} {kind.value}: principal={series.principal.tolist()}"
    )
    return series


def alpha_laurent(k: int, variant: str | VariantKind) -> LaurentSeries:
    """Expansion at s = 1 of (-1)^k (zeta'/zeta)^k or (-1)^k zeta^(k)/zeta."""
    if not 1 <= k <= MAX_ALPHA_K:
        raise ArgumentError(f"alpha_laurent supports 1 <= k <= {MAX_ALPHA_K}, got {k}")
    return _alpha_laurent_cached(k, parse_family(variant), settings.laurent_order)
