"""
Main-term service.
Evaluates the residue at w = 1 - iy of alpha(y, w) x^w / w from the
principal coefficients a_1..a_k, checks the Mellin transform of each
residue basis function by quadrature, and probes the residual-size bound.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from scipy.integrate import quad

from app.config import settings
from app.exceptions import ArgumentError, DomainError, NumericalError
from app.services.arith_tables import VariantKind
from app.services.laurent import MAX_ALPHA_K, alpha_laurent, parse_family
from app.services.special import log_power_tail

_FACTORIALS = tuple(math.factorial(n) for n in range(MAX_ALPHA_K + 1))


@dataclass(frozen=True)
class MainTermSpec:
    """Principal coefficients a_1..a_k of alpha(0, s) at s = 1."""

    k: int
    variant: VariantKind
    principal: tuple[float, ...]

    def __post_init__(self):
        if len(self.principal) != self.k:
            raise ArgumentError(
                f"expected {self.k} principal coefficients, got {len(self.principal)}"
            )

    def a(self, m: int) -> float:
        return self.principal[m - 1]


def main_term_spec(k: int, variant: str | VariantKind) -> MainTermSpec:
    """MainTermSpec with a_1..a_k read off alpha_laurent."""
    kind = parse_family(variant)
    series = alpha_laurent(k, kind)
    spec = MainTermSpec(
        k=k, variant=kind, principal=tuple(series.a(m) for m in range(1, k + 1))
    )
    if spec.a(k) == 0.0:
        raise NumericalError(f"leading coefficient a_{k} vanished for {kind.value}")
    return spec


def _factorial(n: int) -> int:
    return _FACTORIALS[n] if n < len(_FACTORIALS) else math.factorial(n)


def residue_basis(m: int, x: float, y: float) -> complex:
    """Res_{w=1} of x^(w-iy) / ((w-1)^m (w-iy)).

    Equals -sum_{j<m} x^(1-iy) (log x)^(m-1-j) / ((m-1-j)! (iy-1)^(j+1)).
    """
    if m < 1:
        raise ArgumentError(f"m must be >= 1, got {m}")
    if x < 1:
        raise DomainError(f"x must be >= 1, got {x}")
    log_x = math.log(x)
    lead = cmath.exp(complex(1.0, -y) * log_x)
    pole = complex(-1.0, y)
    total = 0j
    for j in range(m):
        total += log_x ** (m - 1 - j) / (_factorial(m - 1 - j) * pole ** (j + 1))
    return -lead * total


def main_term(spec: MainTermSpec, x: float, y: float) -> complex:
    """sum_{m=1}^k a_m residue_basis(m, x, y)."""
    return sum(
        (spec.a(m) * residue_basis(m, x, y) for m in range(1, spec.k + 1)), 0j
    )


def main_term_closed_k2(
    variant: str | VariantKind, x: float, y: float, gamma0: float = np.euler_gamma
) -> complex:
    """Closed forms of the k = 2 main terms.

    conv: x^(1-iy)(log x - 2 C_0)/(1-iy) - x^(1-iy)/(1-iy)^2
    gen:  2x^(1-iy)(log x - C_0)/(1-iy) - 2x^(1-iy)/(1-iy)^2
    """
    kind = parse_family(variant)
    log_x = math.log(x)
    power = cmath.exp(complex(1.0, -y) * log_x)
    one_minus_iy = complex(1.0, -y)
    if kind is VariantKind.CONV_POWER:
        return power * (log_x - 2 * gamma0) / one_minus_iy - power / one_minus_iy**2
    return 2 * power * (log_x - gamma0) / one_minus_iy - 2 * power / one_minus_iy**2


# ── Mellin-transform check ──────────────────────────────────────────────────


@dataclass(frozen=True)
class SaloniCheck:
    """Quadrature of the residue basis against its Mellin transform."""

    m: int
    y: float
    s: complex
    lhs: complex
    rhs: complex
    tail_bound: float
    quad_error: float

    @property
    def defect(self) -> float:
        return abs(self.lhs - self.rhs) + self.tail_bound


def _basis_tail_bound(m: int, y: float, sigma: float, log_cutoff: float) -> float:
    """Bound for the integral of |residue_basis(m, x, y)| x^-sigma over (X, inf)."""
    pole = abs(complex(-1.0, y))
    return math.fsum(
        log_power_tail(m - 1 - j, sigma - 2.0, log_cutoff)
        / (_factorial(m - 1 - j) * pole ** (j + 1))
        for j in range(m)
    )


def saloni_check(
    m: int, y: float, s: complex, cutoff: float = 1e30, tol: float = 1e-9
) -> SaloniCheck:
    """Integral over [1, X] of residue_basis(m, x, y) x^-s against
    (1/(s-1)) ((s-2+iy)^-m - (iy-1)^-m).

    Integrates in u = log x, where the integrand is a polynomial in u times
    exp((2 - s) u).
    """
    s = complex(s)
    if s.real < 2.5:
        raise DomainError(f"saloni_check needs Re(s) >= 2.5, got s={s}")
    if cutoff < 1e3:
        raise ArgumentError(f"cutoff must be >= 10^3, got {cutoff}")

    def integrand(u: float) -> complex:
        x = math.exp(u)
        return residue_basis(m, x, y) * cmath.exp((1 - s) * u)

    upper = math.log(cutoff)
    parts = []
    errors = []
    for component in (lambda u: integrand(u).real, lambda u: integrand(u).imag):
        value, error, _ = quad(
            component,
            0.0,
            upper,
            epsabs=tol * 1e-3,
            epsrel=tol,
            limit=settings.quad_limit,
            full_output=1,
        )[:3]
        if error > tol:
            raise NumericalError(
                f"quadrature for m={m}, y={y}, s={s} did not converge", achieved=error
            )
        parts.append(value)
        errors.append(error)

    rhs = (1 / (s - 1)) * ((s - 2 + 1j * y) ** (-m) - (1j * y - 1) ** (-m))
    check = SaloniCheck(
        m=m,
        y=y,
        s=s,
        lhs=complex(parts[0], parts[1]),
        rhs=rhs,
        tail_bound=_basis_tail_bound(m, y, s.real, upper),
        quad_error=max(errors),
    )
    logger.debug(f"Mellin check m={m} y={y} s={s}: defect={check.defect:.3e}")
    return check


# ── Residual-size probe ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class ProbeResult:
    """Calibrated constant for |main term| (|y|+1) / (x (log x)^(k-1))."""

    k: int
    variant: VariantKind
    constant: float
    max_ratio: float
    violations: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def residual_ratio(spec: MainTermSpec, x: float, y: float) -> float:
    return (
        abs(main_term(spec, x, y))
        * (abs(y) + 1)
        / (x * math.log(x) ** (spec.k - 1))
    )


def residual_bound_probe(
    spec: MainTermSpec,
    x_grid: list[float],
    y_grid: list[float],
    calibration_x: float = 1e4,
    calibration_y: float = 1e2,
    headroom: float = 2.0,
) -> ProbeResult:
    """Fit C_k = max ratio on the calibration window, flag points above headroom * C_k."""
    if not x_grid or not y_grid:
        raise ArgumentError("residual_bound_probe needs nonempty grids")
    if min(x_grid) < 2:
        raise DomainError("residual_bound_probe needs x >= 2")

    ratios = {(x, y): residual_ratio(spec, x, y) for x in x_grid for y in y_grid}
    calibration = [
        q for (x, y), q in ratios.items() if x <= calibration_x and abs(y) <= calibration_y
    ]
    if not calibration:
        raise ArgumentError("no grid point falls inside the calibration window")
    constant = max(calibration)
    violations = [
        (x, y, q) for (x, y), q in ratios.items() if q > headroom * constant
    ]
    result = ProbeResult(
        k=spec.k,
        variant=spec.variant,
        constant=constant,
        max_ratio=max(ratios.values()),
        violations=violations,
    )
    if violations:
        logger.warning(
            f"Residual probe k={spec.k} {spec.variant.value}: "
            f"{len(violations)} point(s) above {headroom} x {constant:.4f}"
        )
    return result
