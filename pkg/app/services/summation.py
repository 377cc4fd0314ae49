"""
Compensated summation helpers.
Oscillatory sums of up to 10^8 terms lose digits under naive accumulation,
so block sums are formed with math.fsum and blocks are chained with an
error-free running accumulator.
"""

import math

import numpy as np


def two_sum(u: float, v: float) -> tuple[float, float]:
    """Error-free transformation: u + v = s + t exactly."""
    s = u + v
    up = s - v
    vpp = s - up
    up -= u
    vpp -= v
    return s, -(up + vpp)


class CompensatedSum:
    """Running real sum holding a value and its rounding error."""

    __slots__ = ("_s", "_t")

    def __init__(self, value: float = 0.0):
        self._s = float(value)
        self._t = 0.0

    def add(self, value: float) -> "CompensatedSum":
        y, u = two_sum(float(value), self._t)
        self._s, self._t = two_sum(y, self._s)
        if self._s == 0:
            self._s = u
        else:
            self._t += u
        return self

    def __iadd__(self, value: float) -> "CompensatedSum":
        return self.add(value)

    @property
    def value(self) -> float:
        return self._s + self._t


class ComplexCompensatedSum:
    """Compensated accumulation of both components of a complex sum."""

    __slots__ = ("re", "im")

    def __init__(self):
        self.re = CompensatedSum()
        self.im = CompensatedSum()

    def add_block(self, re_block: np.ndarray, im_block: np.ndarray) -> None:
        self.re.add(block_sum(re_block))
        self.im.add(block_sum(im_block))

    @property
    def value(self) -> complex:
        return complex(self.re.value, self.im.value)


def block_sum(values: np.ndarray) -> float:
    """Correctly rounded sum of a float array."""
    if values.size == 0:
        return 0.0
    return math.fsum(values.tolist())
