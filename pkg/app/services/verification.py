"""
Verification service.
Runs the oracle and invariant checks of each service module and collects
them into suite reports for the `verify` command.
"""

import math
import tempfile
import time
from collections.abc import Callable, Iterable
from pathlib import Path

import numpy as np
from loguru import logger

from app.exceptions import ArgumentError, LabError
from app.services.arith_tables import (
    VariantKind,
    check_von_mangoldt_bounds,
    lambda_conv_power,
    lambda_generalized,
    lambda_generalized_oracle,
    load_table,
    naive_convolution_power_oracle,
    omega_table,
    save_table,
    sieve_von_mangoldt,
    von_mangoldt_oracle,
)
from app.services.laurent import alpha_laurent, stieltjes_constants
from app.services.mainterm import (
    main_term,
    main_term_closed_k2,
    main_term_spec,
    residual_bound_probe,
    saloni_check,
)
from app.services.models import CheckResult, SuiteReport
from app.services.special import (
    alpha_direct,
    digamma,
    dirichlet_identity_check,
    polygamma,
    quotient_rule_check,
    zeta_derivatives,
)
from app.services.zeros import (
    ZeroTable,
    b_spread,
    zero_sum_linear,
    zero_sum_power,
    zero_sum_power_audit,
)

SUITES = ("arith", "laurent", "mainterm", "special", "zeros")
FAMILIES = (VariantKind.CONV_POWER, VariantKind.GENERALIZED)
AUDIT_POINTS = (2, 2.5, 3, 2 + 10j, 2 + 20j)
SEED = 20240611

# Reference values
PSI_100 = 94.0453
STIELTJES_1 = -0.0728158454836767
ZETA_PRIME_2 = -0.93754825431584375
ZETA_3 = 1.2020569031595942


def _check(
    suite: str, name: str, value: float, tolerance: float, detail: str = ""
) -> CheckResult:
    passed = bool(math.isfinite(value) and value <= tolerance)
    return CheckResult(
        suite=suite, name=name, passed=passed, value=value, tolerance=tolerance, detail=detail
    )


def calibrate_then_hold(
    calibration: Iterable[float], held: Iterable[float], headroom: float = 2.0
) -> tuple[float, float]:
    """(fitted constant, worst held value / fitted constant)."""
    constant = max(calibration)
    if constant <= 0:
        raise ArgumentError("calibration window produced no positive value")
    return constant, max(held) / constant


def _relative(a: complex, b: complex, floor: float = 0.0) -> float:
    return abs(a - b) / max(abs(b), floor, 1e-300)


# ── arith ───────────────────────────────────────────────────────────────────


def arith_checks() -> list[CheckResult]:
    suite = "arith"
    checks = []

    lam = sieve_von_mangoldt(10_000)
    psi = math.fsum(lam.values[:101].tolist())
    direct = math.fsum(von_mangoldt_oracle(m) for m in range(2, 101))
    checks.append(_check(suite, "psi_100_oracle", abs(psi - direct), 1e-12))
    checks.append(_check(suite, "psi_100", abs(psi - PSI_100), 1e-4))

    n = np.arange(2, 10_001)
    for k in (1, 2, 3, 4):
        table = lambda_generalized(k, 10_000, von_mangoldt=lam)
        oracle = np.array([lambda_generalized_oracle(k, int(m)) for m in n])
        scale = np.maximum(np.abs(oracle), np.log(n) ** k)
        worst = float(np.max(np.abs(table.values[2:] - oracle) / scale))
        checks.append(_check(suite, f"gen_oracle_k{k}", worst, 1e-9))

    small = sieve_von_mangoldt(1_000)
    n_small = np.arange(2, 1_001)
    for k in (2, 3):
        table = lambda_conv_power(k, 1_000, von_mangoldt=small)
        oracle = np.array([naive_convolution_power_oracle(k, int(m)) for m in n_small])
        scale = np.maximum(np.abs(oracle), np.log(n_small) ** k)
        worst = float(np.max(np.abs(table.values[2:] - oracle) / scale))
        checks.append(_check(suite, f"conv_oracle_k{k}", worst, 1e-9))

    for k in (1, 2, 3, 4):
        report = check_von_mangoldt_bounds(k, 1_000_000)
        margin = min(report.lower, report.middle, report.upper)
        checks.append(_check(suite, f"bounds_k{k}", max(-margin, 0.0), 0.0))

    omega = omega_table(10_000)
    for k in (1, 2, 3):
        table = lambda_generalized(k, 10_000, von_mangoldt=lam)
        outside = omega[1:] > k
        values = np.abs(table.values[1:][outside]) / np.log(np.arange(1, 10_001)[outside]) ** k
        checks.append(_check(suite, f"support_k{k}", float(values.max(initial=0.0)), 1e-9))

    with tempfile.TemporaryDirectory() as tmp:
        built = lambda_conv_power(2, 10_000, von_mangoldt=lam)
        loaded = load_table(save_table(built, Path(tmp) / "conv-k2.mtl"))
        identical = loaded.variant == built.variant and np.array_equal(
            loaded.values, built.values
        )
        checks.append(
            CheckResult(suite=suite, name="cache_roundtrip", passed=bool(identical))
        )
    return checks


# ── laurent ─────────────────────────────────────────────────────────────────


def laurent_checks() -> list[CheckResult]:
    suite = "laurent"
    checks = []
    gammas = stieltjes_constants(8)
    checks.append(_check(suite, "stieltjes_0", abs(gammas[0] - np.euler_gamma), 1e-12))
    checks.append(_check(suite, "stieltjes_1", abs(gammas[1] - STIELTJES_1), 1e-10))

    expected = {
        VariantKind.CONV_POWER: (1.0, -2 * np.euler_gamma),
        VariantKind.GENERALIZED: (2.0, -2 * np.euler_gamma),
    }
    for kind, (a2, a1) in expected.items():
        series = alpha_laurent(2, kind)
        error = max(abs(series.a(2) - a2), abs(series.a(1) - a1))
        checks.append(_check(suite, f"principal_k2_{kind.value}", error, 1e-10))

    for kind in FAMILIES:
        for k in (1, 2, 3):
            series = alpha_laurent(k, kind)
            worst = max(
                _relative(series(1 + h), alpha_direct(k, kind, 1 + h))
                for h in (0.05, -0.05, 0.05j, 0.1)
            )
            checks.append(_check(suite, f"series_vs_direct_k{k}_{kind.value}", worst, 1e-8))
    return checks


def laurent_table_rows(k_max: int = 4) -> list[str]:
    """CSV rows k,variant,part,index,value for the principal and regular coefficients."""
    rows = ["k,variant,part,index,value"]
    for kind in FAMILIES:
        for k in range(1, k_max + 1):
            series = alpha_laurent(k, kind)
            for m in range(k, 0, -1):
                rows.append(f"{k},{kind.value},a,{m},{series.a(m):.17g}")
            for n in range(min(series.top, 4) + 1):
                rows.append(f"{k},{kind.value},b,{n},{series.b(n):.17g}")
    return rows


# ── mainterm ────────────────────────────────────────────────────────────────


def mainterm_checks() -> list[CheckResult]:
    suite = "mainterm"
    checks = []
    rng = np.random.default_rng(SEED)
    xs = np.exp(rng.uniform(math.log(2), math.log(1e6), 100))
    ys = rng.uniform(-1e4, 1e4, 100)
    for kind in FAMILIES:
        spec = main_term_spec(2, kind)
        worst = 0.0
        for x, y in zip(xs.tolist(), ys.tolist()):
            closed = main_term_closed_k2(kind, x, y)
            scale = 2 * x * (math.log(x) + 2) / abs(complex(1, -y))
            worst = max(worst, abs(main_term(spec, x, y) - closed) / scale)
        checks.append(_check(suite, f"closed_k2_{kind.value}", worst, 1e-10))

    for m in (1, 2, 3):
        for y in (0.0, 5.0):
            for s in (3.0, 3.5):
                result = saloni_check(m, y, s)
                checks.append(
                    _check(suite, f"mellin_m{m}_y{y:g}_s{s:g}", result.defect, 1e-6)
                )
    unit = saloni_check(1, 0.0, 3.0)
    checks.append(_check(suite, "mellin_unit", abs(unit.lhs - 1), 1e-6))

    x_grid = np.geomspace(10, 1e6, 20).tolist()
    y_grid = [0.0, 1.0, 10.0, 100.0, 1000.0, -1000.0]
    for kind in FAMILIES:
        for k in (1, 2, 3):
            probe = residual_bound_probe(main_term_spec(k, kind), x_grid, y_grid)
            checks.append(
                CheckResult(
                    suite=suite,
                    name=f"residual_probe_k{k}_{kind.value}",
                    passed=probe.passed,
                    value=probe.max_ratio,
                    tolerance=2 * probe.constant,
                )
            )
    return checks


# ── special ─────────────────────────────────────────────────────────────────


def special_checks() -> list[CheckResult]:
    suite = "special"
    checks = []
    zeta2 = zeta_derivatives(2.0, 1)
    checks.append(_check(suite, "zeta_2", _relative(zeta2[0], math.pi**2 / 6), 1e-10))
    checks.append(_check(suite, "zeta_prime_2", _relative(zeta2[1], ZETA_PRIME_2), 1e-9))

    gamma0 = np.euler_gamma
    checks.append(_check(suite, "digamma_1", abs(digamma(1) + gamma0), 1e-10))
    checks.append(_check(suite, "digamma_2", abs(digamma(2) - (1 - gamma0)), 1e-10))
    checks.append(_check(suite, "polygamma_1_1", _relative(polygamma(1, 1), math.pi**2 / 6), 1e-10))
    checks.append(_check(suite, "polygamma_2_1", _relative(polygamma(2, 1), -2 * ZETA_3), 1e-10))

    rng = np.random.default_rng(SEED)
    points = rng.uniform(0.5, 10, 100) + 1j * rng.uniform(-100, 100, 100)
    worst = max(
        _relative(digamma(s + 1) - digamma(s), 1 / s) for s in points.tolist()
    )
    checks.append(_check(suite, "digamma_recurrence", worst, 1e-9))

    step = 1e-3
    worst = 0.0
    for x in (0.7, 1.5, 4.0):
        for ell in (1, 2):
            if ell == 1:
                fd = (digamma(x + step) - digamma(x - step)) / (2 * step)
            else:
                fd = (digamma(x + step) - 2 * digamma(x) + digamma(x - step)) / step**2
            worst = max(worst, abs(polygamma(ell, x) - fd))
    checks.append(_check(suite, "polygamma_vs_difference", worst, 1e-4))

    s = 2.5 + 7.0j
    conj_defect = max(
        _relative(zeta_derivatives(s.conjugate(), 2), np.conj(zeta_derivatives(s, 2))),
        _relative(digamma(s.conjugate()), digamma(s).conjugate()),
        _relative(polygamma(2, s.conjugate()), polygamma(2, s).conjugate()),
    )
    checks.append(_check(suite, "conjugate_symmetry", conj_defect, 1e-12))

    for kind in FAMILIES:
        for k in (1, 2):
            identity = dirichlet_identity_check(k, kind, 3.0, 100_000)
            checks.append(
                CheckResult(
                    suite=suite,
                    name=f"dirichlet_identity_k{k}_{kind.value}",
                    passed=identity.passed,
                    value=identity.discrepancy,
                    tolerance=identity.tail_bound,
                )
            )

    for point in (2.0, 1.5 + 3.0j):
        for m in (1, 2, 3):
            checks.append(
                _check(suite, f"quotient_rule_m{m}_s{point}", quotient_rule_check(point, m), 1e-8)
            )

    low = [complex(1, t) for t in np.geomspace(10, 100, 12)]
    high = [complex(1, t) for t in np.geomspace(100, 1000, 12)]

    def tau(s: complex) -> float:
        return abs(s.imag) + 2

    constant, ratio = calibrate_then_hold(
        (abs(digamma(s) - np.log(s)) * tau(s) for s in low),
        (abs(digamma(s) - np.log(s)) * tau(s) for s in high),
    )
    checks.append(_check(suite, "digamma_log_shape", ratio, 2.0, f"C={constant:.6g}"))
    for ell in (1, 2, 3):
        lead = (-1) ** (ell - 1) * math.factorial(ell - 1)

        def scaled(s: complex, ell: int = ell, lead: int = lead) -> float:
            return abs(polygamma(ell, s) - lead * s ** (-ell)) * tau(s) ** (ell + 1)

        constant, ratio = calibrate_then_hold(map(scaled, low), map(scaled, high))
        checks.append(_check(suite, f"polygamma_shape_l{ell}", ratio, 2.0, f"C={constant:.6g}"))
    return checks


# ── zeros ───────────────────────────────────────────────────────────────────


def zeros_checks(table: ZeroTable) -> list[CheckResult]:
    suite = "zeros"
    checks = []
    results = [zero_sum_linear(table, s) for s in AUDIT_POINTS]
    checks.append(_check(suite, "b_spread", b_spread(results), 0.05))

    s = 2 + 10j
    conj_defect = _relative(
        zero_sum_linear(table, s.conjugate()).sum, zero_sum_linear(table, s).sum.conjugate()
    )
    checks.append(_check(suite, "linear_conjugate", conj_defect, 1e-12))

    half = table.count // 2
    if half >= 50:
        coarse = table.head(half)
        for full, s in zip(results, AUDIT_POINTS):
            partial = zero_sum_linear(coarse, s)
            move = abs(full.b_estimate - partial.b_estimate)
            checks.append(_check(suite, f"doubling_s{s}", move, partial.tail))

    for k, s in ((2, 2.0), (2, 1.5 + 5j), (3, 2.0)):
        audit = zero_sum_power_audit(table, k, s)
        checks.append(
            CheckResult(
                suite=suite,
                name=f"power_audit_k{k}_s{s}",
                passed=audit.passed,
                value=audit.defect,
                tolerance=audit.tail,
            )
        )

    if table.count >= 100:
        first, second = table.head(50), table.head(100)
        diff = abs(zero_sum_power(second, 2, 2.0).value - zero_sum_power(first, 2, 2.0).value)
        gaps = table.ordinates[50:100]
        bound = 4 * math.fsum((gaps**-2).tolist()) + zero_sum_power(second, 2, 2.0).tail
        checks.append(_check(suite, "power_prefix_cauchy", diff, bound))
    return checks


# ── Runner ──────────────────────────────────────────────────────────────────


def run_suite(name: str, zeros: ZeroTable | None = None) -> SuiteReport:
    """Run one named suite; a check that raises is recorded as a failure."""
    runners: dict[str, Callable[[], list[CheckResult]]] = {
        "arith": arith_checks,
        "laurent": laurent_checks,
        "mainterm": mainterm_checks,
        "special": special_checks,
    }
    if name == "zeros":
        if zeros is None:
            raise ArgumentError("the zeros suite needs a zero table (--zeros PATH)")
        runners["zeros"] = lambda: zeros_checks(zeros)
    if name not in runners:
        raise ArgumentError(f"unknown suite '{name}', choose from {', '.join(SUITES)}")

    start_time = time.time()
    try:
        checks = runners[name]()
    except LabError as e:
        logger.error(f"Suite {name} aborted: {e}")
        checks = [CheckResult(suite=name, name="suite", passed=False, detail=str(e))]
    report = SuiteReport(suite=name, checks=checks, elapsed_s=time.time() - start_time)
    for failure in report.failures:
        logger.warning(f"Check failed: {failure.line()}")
    logger.info(report.summary())
    return report
