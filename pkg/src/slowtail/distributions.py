"""Input laws for the envelope triple (A, B, D) and distribution-class checks.

A law is a value object: parameters, exact tail functions of ``log A`` and
``log(A v B)``, the drift ``mu = -E[log A]`` and a few flags the theory
needs.  The built-in families are packed into flat arrays so the simulation
kernels can draw from them without calling back into Python.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba as nb
import numpy as np
from scipy import special

from .logreal import LogReal
from .rng import RngStream, uniform_pair

TailFn = Callable[[np.ndarray], np.ndarray]


class ConfigurationError(ValueError):
    """Invalid law or system parameters, or a sampler that broke its contract."""


class TailVanishes(ValueError):
    pass


class GridTooCoarse(ValueError):
    def __init__(self, message: str, required_step: float):
        super().__init__(message)
        self.required_step = required_step


class Family(enum.Enum):
    DETERMINISTIC = 0
    DISCRETE_FINITE = 1
    PARETO_LOG = 2
    WEIBULL_LOG = 3
    INDICATOR_COUNTER = 4
    CUSTOM = 9


class Coupling(enum.Enum):
    B_EQUALS_A = 0
    INDEPENDENT = 1
    JOINT = 2


# ---------------------------------------------------------------------------
# marginal tails of log A for the continuous families


def _pareto_tail(x, alpha, shift):
    z = np.asarray(x, dtype=float) + shift
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(z > 1.0, np.power(np.maximum(z, 1.0), -alpha), 1.0)
    return out


def _weibull_tail(x, beta, scale, shift):
    z = np.asarray(x, dtype=float) + shift
    return np.where(z > 0.0, np.exp(-np.power(np.maximum(z, 0.0) / scale, beta)), 1.0)


def _step_tail(x, levels, probs):
    """P[L > x] for a discrete variable L with the given atoms."""
    x = np.asarray(x, dtype=float)
    return np.sum(probs * (levels > x[..., None]), axis=-1)


@dataclass(frozen=True)
class InputLaw:
    """Joint law of (A, B, D).

    ``params`` holds the family parameters by name; ``atoms`` is an (s, 3)
    array of (a, b, d) rows with ``probs`` for the finite families.  Use the
    constructor helpers (`pareto_log`, `weibull_log`, ...) rather than
    building instances by hand.
    """

    family: Family
    coupling: Coupling
    params: dict = field(default_factory=dict)
    atoms: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    base: Optional["InputLaw"] = None
    gamma: float = 1.0
    name: str = ""
    # Custom family hooks
    sampler: Optional[Callable] = None
    custom_log_a_tail: Optional[TailFn] = None
    custom_log_ab_tail: Optional[TailFn] = None
    custom_mu: Optional[float] = None
    custom_flags: Optional[dict] = None
    custom_fi: Optional[TailFn] = None

    # --- derived quantities -------------------------------------------------

    @property
    def mu(self) -> float:
        """-E[log A]."""
        f = self.family
        p = self.params
        if f is Family.PARETO_LOG:
            a = p["alpha"]
            return math.inf if a <= 1 else p["shift"] - a / (a - 1.0)
        if f is Family.WEIBULL_LOG:
            return p["shift"] - p["scale"] * math.gamma(1.0 + 1.0 / p["beta"])
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            a = self.atoms[:, 0]
            if np.any(a <= 0):
                return math.inf
            return float(-np.sum(self.probs * np.log(a)))
        if f is Family.INDICATOR_COUNTER:
            return self.base.mu
        return float(self.custom_mu)

    @property
    def mu_is_estimated(self) -> bool:
        return self.family is Family.CUSTOM and self.custom_flags is not None and bool(
            self.custom_flags.get("mu_estimated", False)
        )

    @property
    def flags(self) -> dict:
        f = self.family
        if f is Family.CUSTOM:
            base = {"d_is_zero": False, "b_minus_d_positive_as": False, "tail_condition_35_holds": False}
            base.update(self.custom_flags or {})
            return base
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            a, b, d = self.atoms.T
            live = self.probs > 0
            return {
                "d_is_zero": bool(np.all(d[live] == 0)),
                "b_minus_d_positive_as": bool(np.all((b - d)[live] > 0)),
                # bounded support: the heavy-tail condition is vacuous, not satisfied
                "tail_condition_35_holds": False,
            }
        if f is Family.INDICATOR_COUNTER:
            return {"d_is_zero": True, "b_minus_d_positive_as": False, "tail_condition_35_holds": False}
        return {"d_is_zero": True, "b_minus_d_positive_as": True, "tail_condition_35_holds": True}

    def _marginal_tail(self, x):
        p = self.params
        if self.family is Family.PARETO_LOG:
            return _pareto_tail(x, p["alpha"], p["shift"])
        if self.family is Family.WEIBULL_LOG:
            return _weibull_tail(x, p["beta"], p["scale"], p["shift"])
        raise AssertionError(self.family)

    def log_a_tail(self, x):
        """P[log A > x]."""
        f = self.family
        if f in (Family.PARETO_LOG, Family.WEIBULL_LOG):
            return self._marginal_tail(x)
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            with np.errstate(divide="ignore"):
                return _step_tail(x, np.log(self.atoms[:, 0]), self.probs)
        if f is Family.INDICATOR_COUNTER:
            return self.base.log_a_tail(x)
        return np.asarray(self.custom_log_a_tail(np.asarray(x, dtype=float)), dtype=float)

    def log_ab_tail(self, x):
        """P[log(A v B) > x]."""
        f = self.family
        if f in (Family.PARETO_LOG, Family.WEIBULL_LOG):
            t = self._marginal_tail(x)
            if self.coupling is Coupling.INDEPENDENT:
                return 1.0 - (1.0 - t) ** 2
            return t
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            m = np.maximum(self.atoms[:, 0], self.atoms[:, 1])
            with np.errstate(divide="ignore"):
                return _step_tail(x, np.log(m), self.probs)
        if f is Family.INDICATOR_COUNTER:
            return self._indicator_ab_tail(x)
        return np.asarray(self.custom_log_ab_tail(np.asarray(x, dtype=float)), dtype=float)

    def _indicator_ab_tail(self, x):
        # A v B = A when A > 1, and max(A, 1 - A) in [1/2, 1] otherwise
        x = np.asarray(x, dtype=float)
        ta = self.base.log_a_tail
        c = np.exp(np.minimum(x, 0.0))
        with np.errstate(divide="ignore"):
            below = 1.0 - ta(np.log(np.maximum(1.0 - c, 0.0)))
        mid = np.clip(ta(x) + below, 0.0, 1.0)
        return np.where(x >= 0.0, ta(x), np.where(c < 0.5, 1.0, mid))

    def log_b_pos_tail(self, x):
        """P[log+ B > x]; zero for x < 0 is never used by callers."""
        f = self.family
        x = np.asarray(x, dtype=float)
        if f in (Family.PARETO_LOG, Family.WEIBULL_LOG):
            return np.where(x >= 0, self._marginal_tail(x), 1.0)
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            b = np.maximum(self.atoms[:, 1], 1.0)
            return np.where(x >= 0, _step_tail(x, np.log(b), self.probs), 1.0)
        if f is Family.INDICATOR_COUNTER:
            return np.where(x >= 0, 0.0, 1.0)
        raise ConfigurationError("log+ B tail is not available for custom laws")

    def log_a_bbar_tail(self, x):
        """P[log(A v Bbar) > x] with Bbar = (B+ + D) v 1."""
        f = self.family
        x = np.asarray(x, dtype=float)
        if f in (Family.PARETO_LOG, Family.WEIBULL_LOG):
            return np.where(x >= 0, self.log_ab_tail(x), 1.0)
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            a, b, d = self.atoms.T
            bbar = np.maximum(np.maximum(b, 0.0) + d, 1.0)
            return _step_tail(x, np.log(np.maximum(a, bbar)), self.probs)
        if f is Family.INDICATOR_COUNTER:
            return np.where(x >= 0, self.base.log_a_tail(x), 1.0)
        if self.flags["d_is_zero"]:
            return np.where(x >= 0, self.log_ab_tail(x), 1.0)
        raise ConfigurationError("A v Bbar tail is not available for this custom law")

    @property
    def closed_form_fi(self) -> Optional[TailFn]:
        """x -> 1 ^ int_x^inf P[log(A v B) > y] dy, when known in closed form."""
        f = self.family
        if f is Family.PARETO_LOG:
            a, m = self.params["alpha"], self.params["shift"]
            if a <= 1:
                return None
            lo = 1.0 - m
            if self.coupling is Coupling.INDEPENDENT:
                def raw(z):
                    return 2.0 * z ** (1.0 - a) / (a - 1.0) - z ** (1.0 - 2.0 * a) / (2.0 * a - 1.0)
            else:
                def raw(z):
                    return z ** (1.0 - a) / (a - 1.0)

            def fi(x):
                x = np.asarray(x, dtype=float)
                z = np.maximum(x + m, 1.0)
                val = raw(z) + np.maximum(lo - x, 0.0)
                return np.minimum(1.0, val)

            return fi
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            m = np.maximum(self.atoms[:, 0], self.atoms[:, 1])
            with np.errstate(divide="ignore"):
                levels = np.log(m)
            probs = self.probs

            def fi(x):
                x = np.asarray(x, dtype=float)
                val = np.sum(probs * np.maximum(levels - x[..., None], 0.0), axis=-1)
                return np.minimum(1.0, val)

            return fi
        if f is Family.CUSTOM:
            return self.custom_fi
        return None

    @property
    def lower_log_support(self) -> float:
        """A point below which P[log(A v B) > x] = 1 (used to bracket integrals)."""
        f = self.family
        p = self.params
        if f is Family.PARETO_LOG:
            return 1.0 - p["shift"]
        if f is Family.WEIBULL_LOG:
            return -p["shift"]
        if f in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            with np.errstate(divide="ignore"):
                m = np.log(np.maximum(self.atoms[:, 0], self.atoms[:, 1]))
            return float(np.min(m[self.probs > 0])) - 1.0
        if f is Family.INDICATOR_COUNTER:
            return math.log(0.5) - 1.0
        return -50.0

    # --- packing for the kernels ---------------------------------------------

    def packed(self):
        """(family code, coupling code, params[6], atoms[s, 4]) for the kernels.

        atoms columns: cumulative probability, a, b, d.
        """
        if self.family is Family.CUSTOM:
            raise ConfigurationError("custom laws have no compiled sampler; use the reference path")
        params = np.zeros(6)
        atoms = np.zeros((1, 4))
        f = self.family
        src = self.base if f is Family.INDICATOR_COUNTER else self
        if src.family is Family.PARETO_LOG:
            params[0], params[1] = src.params["alpha"], src.params["shift"]
        elif src.family is Family.WEIBULL_LOG:
            params[0], params[1], params[2] = src.params["beta"], src.params["scale"], src.params["shift"]
        elif src.family in (Family.DETERMINISTIC, Family.DISCRETE_FINITE):
            atoms = np.column_stack([np.cumsum(src.probs), src.atoms])
            atoms[-1, 0] = 1.0
        params[5] = src.family.value
        return f.value, self.coupling.value, params, np.ascontiguousarray(atoms)

    def describe(self) -> dict:
        out = {"family": self.family.name, "coupling": self.coupling.name}
        out.update({k: float(v) for k, v in self.params.items()})
        if self.atoms is not None:
            out["atoms"] = self.atoms.tolist()
            out["probs"] = self.probs.tolist()
        if self.base is not None:
            out["base"] = self.base.describe()
        return out


# ---------------------------------------------------------------------------
# constructors


def _check_mu(law: InputLaw, allow_nonneg_a: bool = False) -> InputLaw:
    mu = law.mu
    if not allow_nonneg_a and not (0.0 < mu < math.inf):
        raise ConfigurationError(f"{law.family.name}: need 0 < -E[log A] < inf, got mu = {mu}")
    return law


def pareto_log(alpha: float, shift: float, coupling: Coupling = Coupling.B_EQUALS_A) -> InputLaw:
    """P[log A > x] = (x + shift)^(-alpha) for x >= 1 - shift, D = 0."""
    if alpha <= 1:
        raise ConfigurationError("ParetoLog needs alpha > 1 for a finite mean of log A")
    if coupling is Coupling.JOINT:
        raise ConfigurationError("ParetoLog supports BEqualsA or Independent coupling")
    law = InputLaw(
        Family.PARETO_LOG, coupling, {"alpha": float(alpha), "shift": float(shift)},
        gamma=(alpha - 1.0) / 2.0, name=f"ParetoLog({alpha:g},{shift:g})",
    )
    return _check_mu(law)


def weibull_log(beta: float, scale: float, shift: float,
                coupling: Coupling = Coupling.B_EQUALS_A) -> InputLaw:
    """P[log A > x] = exp(-((x + shift)/scale)^beta) for x >= -shift, D = 0."""
    if not (beta > 0 and scale > 0):
        raise ConfigurationError("WeibullLog needs beta > 0 and scale > 0")
    if coupling is Coupling.JOINT:
        raise ConfigurationError("WeibullLog supports BEqualsA or Independent coupling")
    law = InputLaw(
        Family.WEIBULL_LOG, coupling,
        {"beta": float(beta), "scale": float(scale), "shift": float(shift)},
        gamma=1.0, name=f"WeibullLog({beta:g},{scale:g},{shift:g})",
    )
    return _check_mu(law)


def discrete_finite(atoms: Sequence[Sequence[float]], probs: Sequence[float],
                    check_drift: bool = True) -> InputLaw:
    """Finitely many (a, b, d) atoms with the given probabilities."""
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    probs = np.asarray(probs, dtype=float)
    if atoms.shape[1] == 2:
        atoms = np.column_stack([atoms, np.zeros(len(atoms))])
    if atoms.shape != (len(probs), 3):
        raise ConfigurationError("atoms must be (s, 2) or (s, 3) rows matching probs")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ConfigurationError("probs must be nonnegative and sum to 1")
    if np.any(atoms[:, 0] < 0) or np.any(atoms[:, 2] < 0):
        raise ConfigurationError("DiscreteFinite: a and d must be nonnegative")
    law = InputLaw(Family.DISCRETE_FINITE, Coupling.JOINT, {}, atoms=atoms, probs=probs,
                   name=f"DiscreteFinite(s={len(probs)})")
    return _check_mu(law) if check_drift else law


def deterministic(a: float, b: float, d: float = 0.0, check_drift: bool = True) -> InputLaw:
    if a < 0 or d < 0:
        raise ConfigurationError("Deterministic: a and d must be nonnegative")
    law = InputLaw(Family.DETERMINISTIC, Coupling.JOINT, {"a": float(a), "b": float(b), "d": float(d)},
                   atoms=np.array([[a, b, d]], dtype=float), probs=np.array([1.0]),
                   name=f"Deterministic({a:g},{b:g},{d:g})")
    return _check_mu(law) if check_drift else law


def indicator_counter(base: InputLaw) -> InputLaw:
    """B = 1{A <= 1} - A, D = 0, with A drawn from ``base``."""
    if base.family not in (Family.PARETO_LOG, Family.WEIBULL_LOG):
        raise ConfigurationError("IndicatorCounter base must be ParetoLog or WeibullLog")
    return InputLaw(Family.INDICATOR_COUNTER, Coupling.JOINT, {}, base=base, gamma=base.gamma,
                    name=f"IndicatorCounter[{base.name}]")


def custom(sampler: Callable, log_a_tail: TailFn, log_ab_tail: TailFn, mu: float,
           gamma: float = 1.0, flags: Optional[dict] = None,
           closed_form_fi: Optional[TailFn] = None, name: str = "Custom") -> InputLaw:
    """A user law.  ``sampler(u)`` maps uniforms of shape (n, 4) to arrays (a, b, d)."""
    law = InputLaw(Family.CUSTOM, Coupling.JOINT, {}, gamma=gamma, name=name, sampler=sampler,
                   custom_log_a_tail=log_a_tail, custom_log_ab_tail=log_ab_tail,
                   custom_mu=float(mu), custom_flags=dict(flags or {}), custom_fi=closed_form_fi)
    return _check_mu(law)


# ---------------------------------------------------------------------------
# compiled sampling


@nb.njit(cache=True, inline="always")
def _marginal_log(code, params, u):
    if code == 2:
        return u ** (-1.0 / params[0]) - params[1]
    # WeibullLog
    return params[1] * (-np.log(u)) ** (1.0 / params[0]) - params[2]


@nb.njit(cache=True)
def draw_triple(fam, coup, params, atoms, k0, k1, path, step):
    """One draw of (A, B, D) as (log a, sign b, log|b|, log d).

    Zero values carry log = -inf (and sign 0 for B).
    """
    u, v = uniform_pair(k0, k1, path, step, 0)
    if fam == 2 or fam == 3:
        la = _marginal_log(fam, params, u)
        if coup == 1:
            lb = _marginal_log(fam, params, v)
        else:
            lb = la
        return la, 1.0, lb, -np.inf
    if fam == 4:
        la = _marginal_log(np.int64(params[5]), params, u)
        if la > 0.0:
            return la, -1.0, la, -np.inf
        if la == 0.0:
            return la, 0.0, -np.inf, -np.inf
        return la, 1.0, np.log(-np.expm1(la)), -np.inf
    # finite atoms
    j = 0
    n = atoms.shape[0]
    while j < n - 1 and u > atoms[j, 0]:
        j += 1
    a = atoms[j, 1]
    b = atoms[j, 2]
    d = atoms[j, 3]
    la = np.log(a) if a > 0.0 else -np.inf
    ld = np.log(d) if d > 0.0 else -np.inf
    if b > 0.0:
        return la, 1.0, np.log(b), ld
    if b < 0.0:
        return la, -1.0, np.log(-b), ld
    return la, 0.0, -np.inf, ld


@nb.njit(cache=True)
def _draw_block(fam, coup, params, atoms, k0, k1, paths, steps):
    n = paths.shape[0]
    out = np.empty((n, 4))
    for i in range(n):
        la, sb, lb, ld = draw_triple(fam, coup, params, atoms, k0, k1, paths[i], steps[i])
        out[i, 0] = la
        out[i, 1] = sb
        out[i, 2] = lb
        out[i, 3] = ld
    return out


def draw_arrays(law: InputLaw, rng: RngStream, paths, steps) -> np.ndarray:
    """Raw draws at the given (path, step) cells: columns log a, sign b, log|b|, log d."""
    paths = np.ascontiguousarray(paths, dtype=np.uint64)
    steps = np.ascontiguousarray(np.broadcast_to(steps, paths.shape), dtype=np.int64)
    if law.family is Family.CUSTOM:
        u = np.column_stack([rng.uniforms(paths, steps, 0), rng.uniforms(paths, steps, 1)])
        a, b, d = (np.asarray(v, dtype=float) for v in law.sampler(u))
        with np.errstate(divide="ignore"):
            return np.column_stack([np.log(a), np.sign(b), np.log(np.abs(b)), np.log(d)])
    fam, coup, params, atoms = law.packed()
    k0, k1 = rng.key
    return _draw_block(fam, coup, params, atoms, k0, k1, paths, steps)


def sample_input(law: InputLaw, rng: RngStream, step: int = 1) -> tuple[LogReal, LogReal, LogReal]:
    """One joint draw of (A, B, D); consecutive calls use consecutive paths."""
    path = rng.take(1)
    row = draw_arrays(law, rng, [path], [step])[0]
    la, sb, lb, ld = row
    if np.isnan(row).any() or la == -math.inf or ld == math.inf:
        raise ConfigurationError(f"{law.family.name}: sampler produced A <= 0 or an invalid D")
    if law.family is Family.CUSTOM and not np.isfinite(la):
        raise ConfigurationError(f"{law.name}: sampler produced A <= 0")
    return LogReal(1.0, la), LogReal(sb, lb), LogReal(1.0 if ld > -math.inf else 0.0, ld)


def validate_draws(law: InputLaw, raw: np.ndarray) -> None:
    if np.isnan(raw).any() or np.any(raw[:, 0] == -np.inf):
        raise ConfigurationError(f"{law.name or law.family.name}: sampler produced A <= 0 or D < 0")


# ---------------------------------------------------------------------------
# distribution-class diagnostics


@dataclass
class DiagnosticTable:
    """Rows (x, y, value, bound, verdict) plus an overall verdict."""

    rows: list
    verdict: str
    extra: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value", "bound", "verdict"])
            for r in self.rows:
                w.writerow([repr(float(r[0])), repr(float(r[1])), repr(float(r[2])),
                            "" if r[3] is None else repr(float(r[3])), r[4]])


def check_long_tailed(tail: TailFn, shifts: Sequence[float], grid: Sequence[float],
                      tol: float = 0.05) -> DiagnosticTable:
    """Ratios F(x+y)/F(x) on the grid; verdict per the class-L limit."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing")
    base = np.asarray(tail(grid), dtype=float)
    if np.any(base <= 0):
        raise TailVanishes("tail vanishes: not in L on this range")
    rows = []
    ok = True
    for y in shifts:
        shifted = np.asarray(tail(grid + y), dtype=float)
        ratio = shifted / base
        dev = np.abs(ratio - 1.0)
        col_ok = dev[-1] <= tol and bool(np.all(np.diff(dev) <= 1e-12 * (1 + dev[:-1])))
        ok &= col_ok
        for x, r in zip(grid, ratio):
            rows.append((x, y, r, 1.0, "ok" if abs(r - 1) <= tol else "far"))
    return DiagnosticTable(rows, "consistent with L" if ok else "not in L")


@dataclass
class GridDensity:
    """Density values on an increasing grid (spacing may vary)."""

    x: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        if self.x.shape != self.f.shape or self.x.ndim != 1:
            raise ValueError("x and f must be 1-D arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(self.f < 0):
            raise ValueError("density must be nonnegative")

    @classmethod
    def from_pdf(cls, pdf: Callable, x) -> "GridDensity":
        x = np.asarray(x, dtype=float)
        f = np.asarray(pdf(x), dtype=float)
        return cls(x, f / np.trapezoid(f, x))

    @classmethod
    def point_mass(cls, at: float = 0.0, width: float = 1e-6, n: int = 1001) -> "GridDensity":
        """A narrow triangle standing in for a unit atom."""
        x = np.concatenate([[at], at + width + np.linspace(0.0, 1.0, n)])
        f = np.zeros_like(x)
        f[0] = 2.0 / width
        return cls(x, f)

    def tail(self) -> np.ndarray:
        """F(x_i) = integral of f over [x_i, x_end] (trapezoid)."""
        seg = 0.5 * (self.f[1:] + self.f[:-1]) * np.diff(self.x)
        return np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])


def _conv_tail(x, fbar, dens, points):
    """P[X1 + X2 > t] = 2 int_0^{t/2} f(s) F(t - s) ds + F(t/2)^2 for X >= 0."""
    out = np.empty(len(points))

    def fbar_at(t):
        return np.interp(t, x, fbar, left=1.0, right=0.0)

    for i, t in enumerate(points):
        half = 0.5 * t
        k = np.searchsorted(x, half, side="right")
        xs = np.concatenate([x[:k], [half]])
        fs = np.concatenate([dens[:k], [np.interp(half, x, dens)]])
        integrand = fs * fbar_at(t - xs)
        out[i] = 2.0 * np.trapezoid(integrand, xs) + fbar_at(half) ** 2
    return out


def check_subexponential(dist: GridDensity, x_max: float, n_points: int = 120,
                         step_fraction: float = 1e-4) -> DiagnosticTable:
    """Curve x -> F*2(x)/F(x) on [x0, x_max] for a density supported on [0, inf)."""
    x, f = dist.x, dist.f
    if x[0] < 0:
        raise ValueError("density must be supported on [0, inf)")
    mass = np.trapezoid(f, x)
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"density integrates to {mass!r}, not 1")
    fbar = dist.tail()
    fbar_xmax = float(np.interp(x_max, x, fbar))
    if fbar_xmax <= 0.0:
        raise TailVanishes("tail vanishes: F(x_max) = 0")

    inside = x <= x_max
    h_max = float(np.max(np.diff(x[inside | np.roll(inside, 1)])))
    if h_max > step_fraction * x_max:
        raise GridTooCoarse(
            f"grid step {h_max:.3g} exceeds {step_fraction:g} * x_max", step_fraction * x_max
        )
    # discretisation error estimate: full grid against every other point
    fine = _conv_tail(x, fbar, f, [x_max])[0]
    coarse = _conv_tail(x[::2], GridDensity(x[::2], f[::2]).tail(), f[::2], [x_max])[0]
    err = abs(fine - coarse) / 3.0
    if err > 0.01 * fbar_xmax:
        need = h_max * math.sqrt(0.01 * fbar_xmax / err)
        raise GridTooCoarse(f"trapezoid error {err:.3g} exceeds 1% of F(x_max)", need)

    lo = max(x[np.searchsorted(x, x[0] + 1e-12)], x_max * 1e-3)
    pts = np.geomspace(lo, x_max, n_points)
    conv = _conv_tail(x, fbar, f, pts)
    base = np.interp(pts, x, fbar)
    if np.any(base <= 0):
        raise TailVanishes("tail vanishes inside [x0, x_max]")
    ratio = conv / base
    last = pts >= x_max / 10.0
    dev = np.abs(ratio[last] - 2.0)
    monotone = bool(np.all(np.diff(dev) <= 1e-9))
    ok = 1.9 <= ratio[-1] <= 2.1 and monotone
    rows = [(p, 0.0, r, 2.0, "") for p, r in zip(pts, ratio)]
    return DiagnosticTable(rows, "consistent with S" if ok else "not consistent with S",
                           {"terminal": float(ratio[-1]), "error_estimate": err})


@dataclass
class PotterReport:
    threshold: Optional[float]
    violations: list
    all_violations: list


def potter_check(tail: TailFn, delta_cap: float, delta_exp: float,
                 pairs: Sequence[tuple[float, float]]) -> PotterReport:
    """Smallest grid level above which F(x)/F(y) <= cap * exp(delta |x - y|) on all pairs."""
    if delta_cap <= 1 or delta_exp <= 0:
        raise ValueError("need delta_cap > 1 and delta_exp > 0")
    pairs = np.asarray(pairs, dtype=float)
    if np.any(pairs <= 0):
        raise ValueError("grid points must be positive")
    fx = np.asarray(tail(pairs[:, 0]), dtype=float)
    fy = np.asarray(tail(pairs[:, 1]), dtype=float)
    gap = np.abs(pairs[:, 0] - pairs[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        # compare in logs so e^{-x^2} type tails do not underflow into 0/0
        lhs = np.log(fx) - np.log(fy)
    lhs = np.where((fx == 0) & (fy == 0), np.inf, lhs)
    bad = ~(lhs <= math.log(delta_cap) + delta_exp * gap)
    lows = pairs.min(axis=1)
    levels = np.unique(lows)
    viol = [tuple(p) for p in pairs[bad]]
    if not bad.any():
        return PotterReport(float(levels[0]), [], [])
    worst = lows[bad].max()
    above = levels[levels > worst]
    if len(above) == 0:
        return PotterReport(None, viol, viol)
    return PotterReport(float(above[0]), [], viol)


def convolve_equiv_tails(components: Sequence[tuple[Optional[TailFn], float]], reference: TailFn,
                         x: float) -> float:
    """(c_1 + ... + c_n) * F(x): the tail of G_1 * ... * G_n when G_i ~ c_i F, F in S."""
    weights = np.array([c for _, c in components], dtype=float)
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    total = weights.sum()
    if total <= 0:
        raise ValueError("degenerate: convolution closure requires a positive weight sum")
    return float(total * np.asarray(reference(x), dtype=float))
