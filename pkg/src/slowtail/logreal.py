"""Signed log-magnitude reals.

Trajectories in this package routinely reach magnitudes like e^500, far past
the range of a double.  A value is stored as ``sign * exp(log_mag)`` with
``sign`` in {-1, 0, +1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba as nb
import numpy as np

NEG_INF = -math.inf


@nb.njit(cache=True, inline="always")
def lr_add(s1, l1, s2, l2):
    """Sum of two signed log-magnitude numbers, returned as (sign, log)."""
    if s1 == 0.0:
        return s2, l2
    if s2 == 0.0:
        return s1, l1
    if l1 < l2:
        s1, l1, s2, l2 = s2, l2, s1, l1
    if s1 == s2:
        return s1, l1 + np.log1p(np.exp(l2 - l1))
    if l1 == l2:
        return 0.0, -np.inf
    return s1, l1 + np.log1p(-np.exp(l2 - l1))


@nb.njit(cache=True, inline="always")
def lr_from_float(x):
    if x > 0.0:
        return 1.0, np.log(x)
    if x < 0.0:
        return -1.0, np.log(-x)
    return 0.0, -np.inf


def _canonical(sign: float, log_mag: float) -> tuple[float, float]:
    if sign == 0 or log_mag == NEG_INF:
        return 0.0, NEG_INF
    if math.isnan(log_mag):
        raise ValueError("log_mag is NaN")
    return (1.0 if sign > 0 else -1.0), float(log_mag)


@dataclass(frozen=True)
class LogReal:
    sign: float
    log_mag: float
    # the float this value was built from, so that round trips are exact
    exact: Optional[float] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        s, l = _canonical(self.sign, self.log_mag)
        object.__setattr__(self, "sign", s)
        object.__setattr__(self, "log_mag", l)

    @classmethod
    def from_float(cls, x: float) -> "LogReal":
        if math.isnan(x):
            raise ValueError("cannot represent NaN")
        if x == 0:
            return cls(0.0, NEG_INF)
        return cls(math.copysign(1.0, x), math.log(abs(x)), float(x))

    @classmethod
    def exp(cls, log_mag: float, sign: float = 1.0) -> "LogReal":
        return cls(sign, log_mag)

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(0.0, NEG_INF)

    def to_float(self) -> float:
        """Ordinary float; overflows to +-inf and underflows to 0."""
        if self.sign == 0:
            return 0.0
        if self.exact is not None:
            return self.exact
        if self.log_mag > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_mag)

    __float__ = to_float

    @property
    def is_finite(self) -> bool:
        return self.sign == 0 or math.isfinite(self.log_mag)

    def _coerce(self, other) -> "LogReal":
        if isinstance(other, LogReal):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return LogReal.from_float(float(other))
        return NotImplemented

    def __neg__(self) -> "LogReal":
        return LogReal(-self.sign, self.log_mag, None if self.exact is None else -self.exact)

    def __abs__(self) -> "LogReal":
        return LogReal(abs(self.sign), self.log_mag)

    def __add__(self, other) -> "LogReal":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        s, l = lr_add(self.sign, self.log_mag, other.sign, other.log_mag)
        return LogReal(s, l)

    __radd__ = __add__

    def __sub__(self, other) -> "LogReal":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "LogReal":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other) -> "LogReal":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.sign == 0 or other.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.log_mag + other.log_mag)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogReal":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.sign == 0:
            raise ZeroDivisionError("LogReal division by zero")
        if self.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.log_mag - other.log_mag)

    def positive_part(self) -> "LogReal":
        return self if self.sign > 0 else LogReal.zero()

    def _key(self) -> tuple[float, float]:
        # total order: sign first, then magnitude (reversed for negatives)
        if self.sign == 0:
            return (0.0, 0.0)
        return (self.sign, self.sign * self.log_mag)

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __lt__(self, other) -> bool:
        return self._key() < self._coerce(other)._key()

    def __le__(self, other) -> bool:
        return self._key() <= self._coerce(other)._key()

    def __gt__(self, other) -> bool:
        return self._key() > self._coerce(other)._key()

    def __ge__(self, other) -> bool:
        return self._key() >= self._coerce(other)._key()

    def __repr__(self) -> str:
        if self.sign == 0:
            return "LogReal(0)"
        sgn = "-" if self.sign < 0 else ""
        return f"LogReal({sgn}e^{self.log_mag:.6g})"


def logsum(values) -> LogReal:
    """Accurate sum of many LogReals (max-shifted, pairwise in numpy)."""
    signs = np.array([v.sign for v in values], dtype=float)
    logs = np.array([v.log_mag for v in values], dtype=float)
    s, l = logsum_arrays(signs, logs)
    return LogReal(s, l)


def logsum_arrays(signs: np.ndarray, logs: np.ndarray) -> tuple[float, float]:
    mask = signs != 0
    if not mask.any():
        return 0.0, NEG_INF
    top = logs[mask].max()
    total = np.sum(signs[mask] * np.exp(logs[mask] - top))
    if total == 0:
        return 0.0, NEG_INF
    return float(np.sign(total)), float(top + math.log(abs(total)))
