"""Closed-interval arithmetic for support and moment propagation."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Interval:
    """A closed real interval [lo, hi] with lo <= hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite: [%r, %r]" % (self.lo, self.hi))
        if self.lo > self.hi:
            raise ValueError("interval endpoints out of order: [%r, %r]" % (self.lo, self.hi))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def __add__(self, other: "Interval") -> "Interval":
        # [a,b] + [c,d] = [a+c, b+d]
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def shift(self, offset: float) -> "Interval":
        return Interval(self.lo + offset, self.hi + offset)


def interval_affine(coeff: float, iv: Interval, offset: float = 0.0) -> Interval:
    """Exact image of iv under w -> coeff*w + offset.

    coeff*[a,b] + offset = [min(coeff*a, coeff*b) + offset,
                            max(coeff*a, coeff*b) + offset].
    """
    x, y = coeff * iv.lo, coeff * iv.hi
    if x > y:
        x, y = y, x
    return Interval(x + offset, y + offset)


def interval_sum(intervals) -> Interval:
    """Sum of a sequence of intervals (empty sum is the point 0)."""
    lo = 0.0
    hi = 0.0
    for iv in intervals:
        lo += iv.lo
        hi += iv.hi
    return Interval(lo, hi)
