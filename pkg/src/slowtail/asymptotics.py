"""Integrated tail and first-order tail predictions.

Everything here is deterministic: closed forms when the law provides them,
otherwise adaptive quadrature over log-spaced panels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .distributions import InputLaw

QUAD_REL_TOL = 1e-10
_TINY = 1e-16


class NonIntegrableTail(ValueError):
    pass


class RegimeMismatch(ValueError):
    pass


class Source(enum.Enum):
    CLOSED_FORM = "ClosedForm"
    QUADRATURE = "Quadrature"


def _scalar(fn: Callable, x: float) -> float:
    return float(np.asarray(fn(np.asarray(x, dtype=float))))


def tail_integral(tail: Callable, x: float, rel_tol: float = QUAD_REL_TOL,
                  max_panels: int = 4000) -> float:
    """int_x^inf tail(y) dy by quad on panels [x + w_k, x + w_{k+1}] with w_k geometric.

    Stops once the tail is below 1e-16 and the last panel adds less than
    ``rel_tol * 1e-3`` of the running total; a tail that keeps contributing
    for ``max_panels`` panels is treated as non-integrable.
    """
    total = 0.0
    left = x
    width = 1.0
    for _ in range(max_panels):
        right = left + width
        if not math.isfinite(right):
            break
        val, err = integrate.quad(lambda y: _scalar(tail, y), left, right,
                                  epsabs=0.0, epsrel=rel_tol * 1e-2, limit=200)
        total += val
        tr = _scalar(tail, right)
        if tr < _TINY and (val <= rel_tol * 1e-3 * total or total == 0.0):
            return total
        if total == 0.0 and tr == 0.0:
            return 0.0
        left = right
        width *= 2.0
    raise NonIntegrableTail("moment condition violated numerically: tail integral does not converge")


@dataclass
class IntegratedTail:
    """x -> 1 ^ int_x^inf tail(y) dy."""

    eval_fn: Callable
    saturation_x: float
    source: Source
    raw_fn: Optional[Callable] = None

    def __call__(self, x):
        return self.eval_fn(x)

    def eval(self, x):
        return self.eval_fn(x)

    def raw(self, x):
        """The unclipped integral."""
        if self.raw_fn is None:
            raise ValueError("no unclipped integral available")
        return self.raw_fn(x)


def _bisect_saturation(raw: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9) -> float:
    """Largest x with raw(x) >= 1, for raw nonincreasing."""
    step = 1.0
    while raw(lo) < 1.0:
        lo -= step
        step *= 2.0
        if step > 1e12:
            return -math.inf
    step = 1.0
    while raw(hi) >= 1.0:
        hi += step
        step *= 2.0
        if step > 1e12:
            return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if raw(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return lo


def integrated_tail_of(tail: Callable, lower: float = 0.0, rel_tol: float = QUAD_REL_TOL,
                       closed_form: Optional[Callable] = None) -> IntegratedTail:
    """Integrated tail of a bare tail function (``lower`` seeds the saturation search)."""
    if closed_form is not None:
        cf = closed_form

        def raw_cf(x):
            return _scalar(cf, x)

        sat = _bisect_saturation(raw_cf, lower - 1.0, lower + 1.0)
        return IntegratedTail(cf, sat, Source.CLOSED_FORM)

    cache: dict[float, float] = {}

    def raw(x: float) -> float:
        x = float(x)
        if x not in cache:
            cache[x] = tail_integral(tail, x, rel_tol)
        return cache[x]

    sat = _bisect_saturation(raw, lower - 1.0, lower + 1.0)

    def clipped(x):
        arr = np.asarray(x, dtype=float)
        out = np.array([1.0 if v <= sat else min(1.0, raw(v)) for v in arr.ravel()])
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    def raw_vec(x):
        arr = np.asarray(x, dtype=float)
        out = np.array([raw(v) for v in arr.ravel()])
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    return IntegratedTail(clipped, sat, Source.QUADRATURE, raw_vec)


def integrated_tail(law_or_tail: Union[InputLaw, Callable], force_quadrature: bool = False,
                    rel_tol: float = QUAD_REL_TOL) -> IntegratedTail:
    """F_I(x) = 1 ^ int_x^inf P[log(A v B) > y] dy for a law (or a bare tail)."""
    if isinstance(law_or_tail, InputLaw):
        law = law_or_tail
        cf = None if force_quadrature else law.closed_form_fi
        return integrated_tail_of(law.log_ab_tail, law.lower_log_support, rel_tol, cf)
    return integrated_tail_of(law_or_tail, 0.0, rel_tol)


class RegimeKind(enum.Enum):
    GENERAL_BOUNDS = "GeneralBounds"
    POSITIVE_BD = "PositiveBD"
    B_DOMINATES = "BDominates"
    A_DOMINATES = "ADominates"


@dataclass(frozen=True)
class Regime:
    """Which first-order statement applies, with P[R > 0] (or its interval) when needed."""

    kind: RegimeKind
    aux: Optional[float] = None
    aux_interval: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.aux is not None and not 0.0 <= self.aux <= 1.0:
            raise ValueError("aux is a probability and must lie in [0, 1]")
        if self.kind is RegimeKind.A_DOMINATES and self.aux is None:
            raise ValueError("ADominates needs aux = P[R > 0]")

    @classmethod
    def parse(cls, name: str, aux: Optional[float] = None) -> "Regime":
        return cls(RegimeKind(name), aux)


@dataclass(frozen=True)
class Prediction:
    point: Optional[float]
    lower: Optional[float]
    upper: Optional[float]

    def as_row(self) -> tuple:
        return self.point, self.lower, self.upper


def _check_flags(law: InputLaw, regime: Regime) -> None:
    if regime.kind is RegimeKind.POSITIVE_BD and not law.flags["b_minus_d_positive_as"]:
        raise RegimeMismatch("PositiveBD requested but B - D > 0 a.s. does not hold for this law")


def _interval(regime: Regime, scale: float) -> tuple[Optional[float], Optional[float]]:
    if regime.aux_interval is not None:
        lo, hi = regime.aux_interval
        return lo * scale, hi * scale
    return None, None


def theory_tail_stationary(law: InputLaw, regime: Regime, u: float,
                           fi: Optional[IntegratedTail] = None) -> Prediction:
    """First-order prediction for P[R > e^u]."""
    _check_flags(law, regime)
    mu = law.mu
    kind = regime.kind
    if kind in (RegimeKind.GENERAL_BOUNDS, RegimeKind.POSITIVE_BD):
        fi = fi or integrated_tail(law)
        if u <= fi.saturation_x:
            raise ValueError(f"u = {u} is not above the saturation point {fi.saturation_x:.6g}")
        base = float(fi(u)) / mu
        if kind is RegimeKind.POSITIVE_BD:
            return Prediction(base, base, base)
        aux = 0.0 if regime.aux is None else regime.aux
        lo, _ = _interval(regime, base)
        return Prediction(None, aux * base if lo is None else lo, base)
    if kind is RegimeKind.B_DOMINATES:
        val = tail_integral(law.log_b_pos_tail, u) / mu
        return Prediction(val, val, val)
    val = tail_integral(law.log_a_tail, u) / mu if regime.aux else 0.0
    point = regime.aux * val if val else 0.0
    lo, hi = _interval(regime, val)
    return Prediction(point, point if lo is None else lo, point if hi is None else hi)


def theory_tail_finite(law: InputLaw, n: int, w: float, regime: Regime, u: float,
                       r_pos: Optional[Sequence[float]] = None) -> Prediction:
    """First-order prediction for P[R_n > e^u] when P[R_0 > x] ~ w P[A v B > x]."""
    if n < 0 or w < 0:
        raise ValueError("need n >= 0 and w >= 0")
    _check_flags(law, regime)
    kind = regime.kind
    f_ab = float(law.log_ab_tail(u))
    needs_pos = kind in (RegimeKind.GENERAL_BOUNDS, RegimeKind.A_DOMINATES)
    if needs_pos and n > 0 and (r_pos is None or len(r_pos) < n):
        raise ValueError(f"{kind.value} needs P[R_k > 0] estimates for k = 0..{n - 1}")
    weight_pos = w + (float(np.sum(r_pos[:n])) if needs_pos and n > 0 else 0.0)
    if kind is RegimeKind.POSITIVE_BD:
        val = (w + n) * f_ab
        return Prediction(val, val, val)
    if kind is RegimeKind.GENERAL_BOUNDS:
        return Prediction(None, weight_pos * f_ab, (w + n) * f_ab)
    if kind is RegimeKind.B_DOMINATES:
        val = (w + n) * float(law.log_b_pos_tail(u))
        return Prediction(val, val, val)
    val = weight_pos * float(law.log_a_tail(u))
    return Prediction(val, val, val)


def theory_sup_walk(law: InputLaw, u: float) -> float:
    """(1/mu) int_u^inf P[log(A v Bbar) > y] dy, the first-order tail of the walk supremum."""
    mu = law.mu
    if law.closed_form_fi is not None and u >= 0 and law.flags["d_is_zero"] and u > law.lower_log_support:
        # above 0, log(A v Bbar) and log(A v B) exceed the same levels
        fi = law.closed_form_fi
        return float(fi(u)) / mu
    return tail_integral(law.log_a_bbar_tail, u) / mu


def prediction_rows(law: InputLaw, regime: Regime, grid: Sequence[float]) -> list[tuple]:
    """CSV rows (u, prediction, lower, upper, regime) for the stationary tail."""
    fi = integrated_tail(law) if regime.kind in (RegimeKind.GENERAL_BOUNDS, RegimeKind.POSITIVE_BD) else None
    rows = []
    for u in grid:
        p = theory_tail_stationary(law, regime, u, fi)
        rows.append((u, p.point, p.lower, p.upper, regime.kind.value))
    return rows
