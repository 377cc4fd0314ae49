"""
Pydantic models shared by the services and the command line: scan requests
and verification reports.
"""

import math
from pathlib import Path

from pydantic import BaseModel, Field, field_validator, model_validator

from app.services.arith_tables import VariantKind

MAX_SCAN_K = 6


class ScanSpec(BaseModel):
    """Request model for a twisted-sum scan."""

    k: int = Field(..., ge=1, le=MAX_SCAN_K)
    variant: VariantKind
    x_grid: list[float] = Field(..., min_length=1)
    y_list: list[float] = Field(default_factory=list)
    n_max: int = Field(..., ge=2)
    output: Path | None = None

    @field_validator("variant")
    @classmethod
    def _lambda_family(cls, v: VariantKind) -> VariantKind:
        if v not in (VariantKind.CONV_POWER, VariantKind.GENERALIZED):
            raise ValueError(f"variant must be 'conv' or 'gen', got '{v.value}'")
        return v

    @field_validator("x_grid")
    @classmethod
    def _ascending(cls, v: list[float]) -> list[float]:
        if any(not math.isfinite(x) or x < 2 for x in v):
            raise ValueError("x grid points must be finite and >= 2")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("x grid must be strictly ascending")
        return v

    @field_validator("y_list")
    @classmethod
    def _finite(cls, v: list[float]) -> list[float]:
        if any(not math.isfinite(y) for y in v):
            raise ValueError("y values must be finite")
        return v

    @model_validator(mode="after")
    def _within_table(self) -> "ScanSpec":
        if self.x_grid[-1] > self.n_max:
            raise ValueError(
                f"largest grid point {self.x_grid[-1]:g} exceeds n_max={self.n_max}"
            )
        return self


class CheckResult(BaseModel):
    """Outcome of one verification check."""

    suite: str
    name: str
    passed: bool
    value: float | None = Field(default=None, description="Measured defect or statistic.")
    tolerance: float | None = Field(default=None, description="Bound the value is held to.")
    detail: str = ""

    def line(self) -> str:
        parts = [
            "CHECK",
            f"suite={self.suite}",
            f"name={self.name}",
            f"status={'PASS' if self.passed else 'FAIL'}",
        ]
        if self.value is not None:
            parts.append(f"value={self.value:.17g}")
        if self.tolerance is not None:
            parts.append(f"tol={self.tolerance:.17g}")
        if self.detail:
            parts.append(f"detail={self.detail.replace(' ', '_')}")
        return " ".join(parts)


class SuiteReport(BaseModel):
    """All checks of one suite."""

    suite: str
    checks: list[CheckResult] = Field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        return (
            f"SUITE suite={self.suite} status={'PASS' if self.passed else 'FAIL'} "
            f"checks={len(self.checks)} failed={len(self.failures)} "
            f"elapsed={self.elapsed_s:.2f}"
        )
