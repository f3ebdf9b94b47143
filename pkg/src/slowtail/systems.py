"""Random Lipschitz maps with an affine envelope.

Each draw of a system is a map Psi together with coefficients (A, B, D)
satisfying

    A t + B - D  <=  Psi(t)  <=  A t+ + B+ + D

and a Lipschitz constant ``lip >= A``.  Built-in kinds are evaluated by
compiled scalar routines (shared with the simulation kernels); custom maps
run through plain Python closures.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba as nb
import numpy as np

from .distributions import ConfigurationError, Family, InputLaw, draw_arrays
from .logreal import LogReal, lr_add
from .rng import RngStream


class Kind(enum.Enum):
    AFFINE = 0
    AFFINE_POSITIVE = 1
    ARCH1 = 2
    CUSTOM = 9


@nb.njit(cache=True, inline="always")
def _logaddexp(x, y):
    if x == -np.inf:
        return y
    if y == -np.inf:
        return x
    if x > y:
        return x + np.log1p(np.exp(y - x))
    return y + np.log1p(np.exp(x - y))


@nb.njit(cache=True)
def apply_map(kind, la, sb, lb, ld, st, lt):
    """Psi(t) for one draw of a built-in kind, in signed-log form."""
    if kind == 0:
        if st == 0.0 or la == -np.inf:
            return sb, lb
        return lr_add(st, la + lt, sb, lb)
    if kind == 1:
        if st <= 0.0 or la == -np.inf:
            return sb, lb
        return lr_add(st, la + lt, sb, lb)
    # ARCH(1): |A1 t + sqrt(D + A2 (t+)^2)| with (A1, A2, D) = (a, b, d)
    if st > 0.0 and sb > 0.0:
        ly = 0.5 * _logaddexp(ld, lb + 2.0 * lt)
    else:
        ly = 0.5 * ld
    sy = 1.0 if ly > -np.inf else 0.0
    if st == 0.0 or la == -np.inf:
        sx, lx = 0.0, -np.inf
    else:
        sx, lx = st, la + lt
    s, l = lr_add(sx, lx, sy, ly)
    if s != 0.0:
        s = 1.0
    return s, l


@nb.njit(cache=True, inline="always")
def envelope_coeffs(kind, la, sb, lb, ld):
    """(log A, sign B, log|B|, log D, log lip) of the registered envelope."""
    if kind == 2:
        half = 0.5 * lb if sb > 0.0 else -np.inf
        lip = _logaddexp(la, half)
        return lip, 0.0, -np.inf, 0.5 * ld, lip
    return la, sb, lb, -np.inf, la


@nb.njit(cache=True)
def _envelope_slacks(kind, raw, ts, tl):
    """Lower slack Psi - (At + B - D) and upper slack (At+ + B+ + D) - Psi."""
    n = raw.shape[0]
    m = ts.shape[0]
    out = np.empty((n, m, 6))
    for i in range(n):
        la, sb, lb, ld = raw[i, 0], raw[i, 1], raw[i, 2], raw[i, 3]
        ea, esb, elb, eld, _ = envelope_coeffs(kind, la, sb, lb, ld)
        for j in range(m):
            st, lt = ts[j], tl[j]
            ps, pl = apply_map(kind, la, sb, lb, ld, st, lt)
            # lower envelope value
            if st == 0.0 or ea == -np.inf:
                ls, ll = esb, elb
            else:
                ls, ll = lr_add(st, ea + lt, esb, elb)
            ls, ll = lr_add(ls, ll, -1.0 if eld > -np.inf else 0.0, eld)
            # upper envelope value
            if st > 0.0 and ea > -np.inf:
                us, ul = 1.0, ea + lt
            else:
                us, ul = 0.0, -np.inf
            if esb > 0.0:
                us, ul = lr_add(us, ul, 1.0, elb)
            if eld > -np.inf:
                us, ul = lr_add(us, ul, 1.0, eld)
            s1, l1 = lr_add(ps, pl, -ls, ll)
            s2, l2 = lr_add(us, ul, -ps, pl)
            scale = max(pl, ll, ul, ea + lt, elb, eld, 0.0)
            out[i, j, 0] = s1
            out[i, j, 1] = l1
            out[i, j, 2] = s2
            out[i, j, 3] = l2
            out[i, j, 4] = scale
            out[i, j, 5] = 0.0
    return out


@dataclass(frozen=True)
class MapDraw:
    """One realisation (Psi, A, B, D, lip)."""

    apply: Callable[[LogReal], LogReal]
    a: LogReal
    b: LogReal
    d: LogReal
    lip: float

    def __call__(self, t: LogReal) -> LogReal:
        return self.apply(_as_lr(t))

    def lower(self) -> "MapDraw":
        """t -> A t + (B - D)."""
        blow = self.b - self.d
        a = self.a
        return MapDraw(lambda t: a * _as_lr(t) + blow, a, blow, LogReal.zero(), self.lip)

    def upper(self) -> "MapDraw":
        """t -> A t+ + ((B+ + D) v 1)."""
        bbar = max(self.b.positive_part() + self.d, LogReal.from_float(1.0))
        a = self.a
        return MapDraw(lambda t: a * _as_lr(t).positive_part() + bbar, a, bbar, LogReal.zero(), self.lip)


def _as_lr(t) -> LogReal:
    return t if isinstance(t, LogReal) else LogReal.from_float(float(t))


@dataclass(frozen=True)
class LipschitzSystem:
    """A family of i.i.d. random Lipschitz maps driven by ``law``.

    ``domain_min`` marks the part of the line the chain can visit after one
    step; envelope checks skip points below it.
    """

    kind: Kind
    law: InputLaw
    custom_apply: Optional[Callable] = None
    custom_envelope: Optional[Callable] = None
    custom_lip: Optional[Callable] = None
    domain_min: float = -math.inf
    name: str = ""

    @property
    def code(self) -> int:
        return self.kind.value

    def raw_draws(self, rng: RngStream, paths, steps) -> np.ndarray:
        return draw_arrays(self.law, rng, paths, steps)

    def draw_from_raw(self, row) -> MapDraw:
        la, sb, lb, ld = (float(v) for v in row)
        if self.kind is Kind.CUSTOM:
            a = LogReal(1.0 if la > -math.inf else 0.0, la)
            b = LogReal(sb, lb)
            d = LogReal(1.0 if ld > -math.inf else 0.0, ld)
            fn = self.custom_apply
            ea, eb, ed = self.custom_envelope(a, b, d) if self.custom_envelope else (a, b, d)
            lip = float(self.custom_lip(a, b, d)) if self.custom_lip else ea.to_float()
            return MapDraw(lambda t: fn(_as_lr(t), a, b, d), ea, eb, ed, lip)
        code = self.code
        ea, esb, elb, eld, llip = envelope_coeffs(code, la, sb, lb, ld)

        def apply(t, code=code, la=la, sb=sb, lb=lb, ld=ld):
            t = _as_lr(t)
            s, l = apply_map(code, la, sb, lb, ld, t.sign, t.log_mag)
            return LogReal(s, l)

        return MapDraw(
            apply,
            LogReal(1.0 if ea > -math.inf else 0.0, ea),
            LogReal(esb, elb),
            LogReal(1.0 if eld > -math.inf else 0.0, eld),
            math.exp(llip) if llip < 709 else math.inf,
        )

    def draw(self, rng: RngStream, path: Optional[int] = None, step: int = 1) -> MapDraw:
        """Map at (path, step); without ``path`` the next path of ``rng`` is used."""
        if path is None:
            path = rng.take(1)
        return self.draw_from_raw(self.raw_draws(rng, [path], [step])[0])

    def log_lip_samples(self, rng: RngStream, n: int) -> np.ndarray:
        start = rng.take(n)
        raw = self.raw_draws(rng, np.arange(start, start + n, dtype=np.uint64), 1)
        if self.kind is Kind.CUSTOM:
            return np.array([math.log(self.draw_from_raw(r).lip) for r in raw])
        if self.kind is Kind.ARCH1:
            half = np.where(raw[:, 1] > 0, 0.5 * raw[:, 2], -np.inf)
            return np.logaddexp(raw[:, 0], half)
        return raw[:, 0].copy()

    def contraction_check(self, rng: RngStream, n: int = 100_000) -> tuple[float, float]:
        """Monte Carlo mean of log lip and its one-sided 99% upper confidence bound."""
        x = self.log_lip_samples(rng, n)
        if not np.all(np.isfinite(x)):
            x = x[np.isfinite(x)] if np.any(np.isfinite(x)) else np.array([-np.inf])
        mean = float(np.mean(x))
        upper = mean + 2.3263478740408408 * float(np.std(x, ddof=1)) / math.sqrt(len(x)) if len(x) > 1 else mean
        return mean, upper


def make_affine(law: InputLaw) -> LipschitzSystem:
    """Psi(t) = A t + B; envelope (A, B, 0); lip = A."""
    return LipschitzSystem(Kind.AFFINE, law, name=f"Affine[{law.name}]")


def make_affine_positive(law: InputLaw) -> LipschitzSystem:
    """Psi(t) = A t+ + B; envelope (A, B, 0); lip = A."""
    return LipschitzSystem(Kind.AFFINE_POSITIVE, law, name=f"AffinePositive[{law.name}]")


def make_arch1(law: InputLaw) -> LipschitzSystem:
    """Psi(t) = |A1 t + sqrt(D + A2 (t+)^2)| with (A1, A2, D) taken from the law's (A, B, D).

    Registered envelope: (A1 + sqrt(A2), 0, sqrt(D)), lip = A1 + sqrt(A2).
    The envelope holds on t >= 0, which contains the range of the map.
    """
    if law.family in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
        if np.any(law.atoms < 0):
            raise ConfigurationError("Arch1: A1, A2 and D must be nonnegative")
    elif law.family is Family.INDICATOR_COUNTER:
        raise ConfigurationError("Arch1: IndicatorCounter has negative B")
    return LipschitzSystem(Kind.ARCH1, law, domain_min=0.0, name=f"Arch1[{law.name}]")


def make_arch1_params(a1: float, a2: float, d: float) -> LipschitzSystem:
    from .distributions import deterministic

    if min(a1, a2, d) < 0:
        raise ConfigurationError("Arch1: A1, A2 and D must be nonnegative")
    return make_arch1(deterministic(a1, a2, d, check_drift=False))


def make_custom(law: InputLaw, apply: Callable, envelope: Optional[Callable] = None,
                lip: Optional[Callable] = None, domain_min: float = -math.inf,
                name: str = "Custom") -> LipschitzSystem:
    """User map ``apply(t, a, b, d) -> LogReal`` with its declared envelope.

    ``envelope(a, b, d)`` returns the (A, B, D) triple and ``lip(a, b, d)`` the
    Lipschitz constant; both default to the law's own coefficients.
    """
    return LipschitzSystem(Kind.CUSTOM, law, custom_apply=apply, custom_envelope=envelope,
                           custom_lip=lip, domain_min=domain_min, name=name)


def standard_t_grid() -> list[float]:
    """41 points: 0 and +-10^k for 20 log-spaced k in [-3, 3]."""
    mags = np.logspace(-3, 3, 20)
    return sorted([0.0, *mags.tolist(), *(-mags).tolist()])


@dataclass
class Violation:
    draw: int
    t: float
    inequality: str
    slack: float


@dataclass
class EnvelopeReport:
    passed: bool
    worst_lower_slack: float
    worst_upper_slack: float
    violations: list = field(default_factory=list)
    skipped_points: list = field(default_factory=list)

    def raise_for_violations(self) -> None:
        if self.violations:
            v = self.violations[0]
            raise EnvelopeViolation(v)


class EnvelopeViolation(AssertionError):
    def __init__(self, v: Violation):
        super().__init__(f"envelope {v.inequality} inequality fails at draw {v.draw}, t = {v.t!r}")
        self.violation = v


def envelope_check(system: LipschitzSystem, t_grid: Sequence, n_draws: int, rng: RngStream,
                   tol: float = 1e-12) -> EnvelopeReport:
    """Worst slack of both envelope inequalities over ``n_draws`` maps and the grid."""
    ts = [_as_lr(t) for t in t_grid]
    skipped = [t.to_float() for t in ts if t.to_float() < system.domain_min]
    ts = [t for t in ts if t.to_float() >= system.domain_min]
    start = rng.take(n_draws)
    raw = system.raw_draws(rng, np.arange(start, start + n_draws, dtype=np.uint64), 1)
    violations = []
    if system.kind is Kind.CUSTOM:
        rows = []
        for i, r in enumerate(raw):
            m = system.draw_from_raw(r)
            for t in ts:
                psi = m(t)
                low = m.a * t + m.b - m.d
                up = m.a * t.positive_part() + m.b.positive_part() + m.d
                scale = max(abs(psi).log_mag, abs(low).log_mag, abs(up).log_mag, 0.0)
                s1, s2 = psi - low, up - psi
                rows.append((i, t.to_float(), s1.sign, s1.log_mag, s2.sign, s2.log_mag, scale))
        arr = np.array(rows, dtype=float).reshape(-1, 7)
        draw_idx, tvals = arr[:, 0].astype(int), arr[:, 1]
        s1, l1, s2, l2, scale = arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5], arr[:, 6]
    else:
        out = _envelope_slacks(system.code, raw, np.array([t.sign for t in ts]),
                               np.array([t.log_mag for t in ts]))
        m = len(ts)
        draw_idx = np.repeat(np.arange(n_draws), m)
        tvals = np.tile([t.to_float() for t in ts], n_draws)
        flat = out.reshape(-1, 6)
        s1, l1, s2, l2, scale = flat[:, 0], flat[:, 1], flat[:, 2], flat[:, 3], flat[:, 4]

    with np.errstate(over="ignore"):
        lower = s1 * np.exp(np.minimum(l1 - scale, 700.0))
        upper = s2 * np.exp(np.minimum(l2 - scale, 700.0))
    lower = np.where(s1 == 0, 0.0, lower)
    upper = np.where(s2 == 0, 0.0, upper)
    for which, slack in (("lower", lower), ("upper", upper)):
        for k in np.flatnonzero(slack < -tol):
            violations.append(Violation(int(draw_idx[k]), float(tvals[k]), which, float(slack[k])))
    violations.sort(key=lambda v: (v.draw, v.t))
    return EnvelopeReport(
        passed=not violations,
        worst_lower_slack=float(lower.min()) if len(lower) else 0.0,
        worst_upper_slack=float(upper.min()) if len(upper) else 0.0,
        violations=violations,
        skipped_points=skipped,
    )


class CompositionOverflow(OverflowError):
    def __init__(self, depth: int, total: int):
        super().__init__(f"LogReal overflow after {depth} of {total} maps")
        self.depth = depth


def backward_compose(draws: Sequence[MapDraw], t) -> LogReal:
    """Psi_1 o ... o Psi_n (t); the empty composition is the identity."""
    value = _as_lr(t)
    n = len(draws)
    for depth, m in enumerate(reversed(draws), start=1):
        value = m(value)
        if not value.is_finite:
            raise CompositionOverflow(depth - 1, n)
    return value
