"""Empirical tails with Wilson intervals, theory overlays and ratio trends."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import engine
from .asymptotics import (Regime, RegimeKind, integrated_tail, theory_sup_walk, theory_tail_finite,
                          theory_tail_stationary)
from .distributions import Coupling, Family, InputLaw, pareto_log, weibull_log
from .logreal import LogReal
from .rng import RngStream

Z95 = 1.959963984540054


def wilson(k, n, z: float = Z95):
    """Wilson score interval for k successes out of n."""
    k = np.asarray(k, dtype=float)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = np.clip(centre - half, 0.0, 1.0)
    hi = np.clip(centre + half, 0.0, 1.0)
    # keep p inside its interval when rounding would push it out
    return np.minimum(lo, p), np.maximum(hi, p)


def _as_sign_log(samples):
    if isinstance(samples, (engine.SampleBatch, engine.HorizonBatch)):
        return samples.sign, samples.log_mag
    if isinstance(samples, engine.SupBatch):
        return np.ones(len(samples.m)), samples.m
    if isinstance(samples, tuple) and len(samples) == 2:
        return np.asarray(samples[0], dtype=float), np.asarray(samples[1], dtype=float)
    samples = list(samples)
    if samples and isinstance(samples[0], LogReal):
        return np.array([s.sign for s in samples]), np.array([s.log_mag for s in samples])
    vals = np.asarray(samples, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sign(vals), np.log(np.abs(vals))


def count_exceedances(sign: np.ndarray, log_mag: np.ndarray, grid: Sequence[float]) -> np.ndarray:
    """Number of samples with value > e^u, for each u."""
    pos = np.sort(log_mag[sign > 0])
    return len(pos) - np.searchsorted(pos, np.asarray(grid, dtype=float), side="right")


@dataclass
class TailCurve:
    grid: np.ndarray
    n_samples: int
    counts: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    theory: Optional[np.ndarray] = None
    theory_lo: Optional[np.ndarray] = None
    theory_hi: Optional[np.ndarray] = None
    regime: Optional[Regime] = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, grid, counts, n_samples: int) -> "TailCurve":
        grid = np.asarray(grid, dtype=float)
        counts = np.asarray(counts, dtype=np.int64)
        if n_samples <= 0:
            raise ValueError("need at least one sample")
        lo, hi = wilson(counts, n_samples)
        return cls(grid, int(n_samples), counts, counts / n_samples, lo, hi)

    @property
    def reference(self) -> Optional[np.ndarray]:
        """Theory point where defined, else the upper bound."""
        if self.theory is None:
            return None
        return np.where(np.isnan(self.theory), self.theory_hi, self.theory)

    def ratios(self) -> np.ndarray:
        return self.p_hat / self.reference

    def rows(self) -> list[list]:
        ref = self.reference
        out = []
        for i, u in enumerate(self.grid):
            def cell(arr):
                return "" if arr is None or np.isnan(arr[i]) else repr(float(arr[i]))
            ratio = "" if ref is None or not ref[i] > 0 else repr(float(self.p_hat[i] / ref[i]))
            out.append([repr(float(u)), self.n_samples, int(self.counts[i]), repr(float(self.p_hat[i])),
                        repr(float(self.ci_lo[i])), repr(float(self.ci_hi[i])),
                        cell(self.theory), cell(self.theory_lo), cell(self.theory_hi), ratio])
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "n_samples", "count", "p_hat", "ci_lo", "ci_hi",
                        "theory", "theory_lo", "theory_hi", "ratio"])
            w.writerows(self.rows())


def empirical_tail(samples, grid: Sequence[float]) -> TailCurve:
    """Exceedance frequencies of e^u for each u in the (increasing) grid."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing")
    sign, logs = _as_sign_log(samples)
    if len(sign) == 0:
        raise ValueError("empty sample")
    return TailCurve.from_counts(grid, count_exceedances(sign, logs, grid), len(sign))


def attach_theory(curve: TailCurve, law: InputLaw, regime: Regime, horizon: Optional[int] = None,
                  w: Optional[float] = None, aux: Optional[Sequence[float]] = None,
                  quantity: str = "stationary") -> TailCurve:
    """Fill the theory columns pointwise.

    ``quantity`` is "stationary" (P[R > e^u]), "finite" (P[R_n > e^u], needs
    ``horizon``; ``aux`` then holds P[R_k > 0] for k < n) or "sup_walk"
    (P[M > u]).
    """
    if (horizon is not None) != (quantity == "finite"):
        if quantity == "stationary" and horizon is not None:
            quantity = "finite"
        elif quantity == "finite":
            raise ValueError("finite-horizon theory needs a horizon")
    th, lo, hi = [], [], []
    fi = None
    if quantity == "stationary" and regime.kind in (RegimeKind.GENERAL_BOUNDS, RegimeKind.POSITIVE_BD):
        fi = integrated_tail(law)
    for u in curve.grid:
        if quantity == "finite":
            p = theory_tail_finite(law, horizon, w or 0.0, regime, u, aux)
            th.append(p.point); lo.append(p.lower); hi.append(p.upper)
        elif quantity == "sup_walk":
            v = theory_sup_walk(law, u)
            th.append(v); lo.append(v); hi.append(v)
        else:
            p = theory_tail_stationary(law, regime, u, fi)
            th.append(p.point); lo.append(p.lower); hi.append(p.upper)

    def arr(xs):
        return np.array([np.nan if x is None else x for x in xs], dtype=float)

    curve.theory, curve.theory_lo, curve.theory_hi = arr(th), arr(lo), arr(hi)
    curve.regime = regime
    curve.meta["quantity"] = quantity
    return curve


@dataclass
class TrendReport:
    ratios: np.ndarray
    ratio_lo: np.ndarray
    ratio_hi: np.ndarray
    verdict: str
    companion: Optional[np.ndarray] = None
    companion_verdict: Optional[str] = None


def _overlap(a_lo, a_hi, b_lo, b_hi) -> bool:
    return a_lo <= b_hi and b_lo <= a_hi


def ratio_trend(curve: TailCurve, law: Optional[InputLaw] = None) -> TrendReport:
    """Empirical/theory ratios with interval propagation and a stability verdict.

    With ``law``, the companion ratio p_hat / P[A v B > e^u] is reported too;
    it is "diverging" when it rises monotonically by at least 2x over the grid.
    """
    ref = curve.reference
    if ref is None:
        raise ValueError("attach theory first")
    if np.any(~(ref > 0)):
        raise ValueError("theory value is zero on the grid")
    r, lo, hi = curve.p_hat / ref, curve.ci_lo / ref, curve.ci_hi / ref
    tail = list(range(max(0, len(r) - 3), len(r)))
    stable = all(_overlap(lo[i], hi[i], lo[j], hi[j]) for i in tail for j in tail if i < j)
    comp = comp_verdict = None
    if law is not None:
        base = np.asarray(law.log_ab_tail(curve.grid), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            comp = curve.p_hat / base
        rising = bool(np.all(np.diff(comp) > 0)) and comp[-1] >= 2.0 * comp[0]
        comp_verdict = "diverging" if rising else "not diverging"
    return TrendReport(r, lo, hi, "stable" if stable else "unstable", comp, comp_verdict)


# ---------------------------------------------------------------------------
# sharded counting (only counts leave the shards, so 10^7 samples fit in memory)


class _Counting:
    def __init__(self, job, grid, kind):
        self.job, self.grid, self.kind = job, np.asarray(grid, dtype=float), kind

    def __call__(self, a, c):
        out = self.job(a, c)
        if self.kind == "sup":
            sign, logs = np.ones(len(out.m)), out.m
            extra = np.array([out.capped.sum(), 0], dtype=np.int64)
        elif self.kind == "horizon":
            sign, logs = out[0], out[1]
            extra = out[2]
        else:
            sign, logs = out.sign, out.log_mag
            extra = np.array([(~out.converged).sum(), out.terms_used.sum()], dtype=np.int64)
        return count_exceedances(sign, logs, self.grid), extra, float(np.max(np.where(sign > 0, logs, -np.inf)))


def _merge(parts):
    counts = np.sum([p[0] for p in parts], axis=0)
    extra = np.sum([p[1] for p in parts], axis=0)
    top = max(p[2] for p in parts)
    return counts, extra, top


def stationary_curve(law: InputLaw, rng: RngStream, n: int, grid: Sequence[float],
                     rel_tol_log: float = engine.DEFAULT_REL_TOL_LOG, workers: int = 1,
                     coefficient: str = "b", n_max: int = engine.N_MAX) -> TailCurve:
    """Empirical tail of the perpetuity from ``n`` backward-series draws."""
    which = {"b": engine.SERIES_B, "lower": engine.SERIES_LOWER, "upper": engine.SERIES_UPPER}[coefficient]
    engine._check_law(law)
    engine._check_drift(law.mu)
    start = rng.take(n)
    job = engine._SeriesJob(law, rng.key, which, rel_tol_log, n_max)
    counts, extra, top = _merge(engine.run_sharded(_Counting(job, grid, "series"), start, n, workers))
    if extra[0]:
        raise engine.TruncationCapHit(f"truncation cap hit on {extra[0]} paths")
    curve = TailCurve.from_counts(grid, counts, n)
    curve.meta.update({"mean_terms": extra[1] / n, "max_log": top, "rel_tol_log": rel_tol_log})
    return curve


def sup_walk_curve(law: InputLaw, rng: RngStream, n: int, grid: Sequence[float],
                   guard_log: float = engine.DEFAULT_GUARD_LOG, workers: int = 1,
                   n_max: int = engine.N_MAX) -> TailCurve:
    engine._check_law(law)
    engine._check_drift(law.mu)
    start = rng.take(n)
    job = engine._SupJob(law, rng.key, guard_log, n_max)
    counts, extra, top = _merge(engine.run_sharded(_Counting(job, grid, "sup"), start, n, workers))
    if extra[0]:
        raise engine.TruncationCapHit(f"truncation cap hit on {extra[0]} paths")
    curve = TailCurve.from_counts(grid, counts, n)
    curve.meta.update({"guard_log": guard_log, "max_log": top})
    return curve


def horizon_curve(system, r0, n_steps: int, rng: RngStream, n: int, grid: Sequence[float],
                  workers: int = 1) -> TailCurve:
    """Empirical tail of R_{n_steps}; meta carries the P[R_k > 0] estimates."""
    r0 = r0 if isinstance(r0, LogReal) else LogReal.from_float(float(r0))
    args = engine._system_args(system, rng)
    start = rng.take(n)
    job = engine._ForwardJob(args, n_steps, r0)
    counts, pos, top = _merge(engine.run_sharded(_Counting(job, grid, "horizon"), start, n, workers))
    curve = TailCurve.from_counts(grid, counts, n)
    curve.meta.update({"positive_fractions": (pos / n).tolist(), "max_log": top})
    return curve


def coupling_curve(system, rng: RngStream, n: int, grid: Sequence[float],
                   couple_tol_log: float = engine.DEFAULT_REL_TOL_LOG, workers: int = 1) -> tuple[TailCurve, float, float]:
    """Tail curve from coupled compositions; also returns (max value, fraction > 0)."""
    b = engine.coupling_batch(system, rng, n, couple_tol_log, workers=workers)
    curve = empirical_tail(b, grid)
    vals = b.to_float()
    return curve, float(np.max(vals)), float(np.mean(b.sign > 0))


# ---------------------------------------------------------------------------
# two couplings with equal marginals


@dataclass
class FactorCurve:
    grid: np.ndarray
    factor: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    counts_joint: np.ndarray
    counts_independent: np.ndarray
    n: int

    def rows(self) -> list[list]:
        return [[repr(float(u)), self.n, int(c1), int(c2), repr(float(f)), repr(float(l)), repr(float(h))]
                for u, c1, c2, f, l, h in zip(self.grid, self.counts_joint, self.counts_independent,
                                              self.factor, self.lo, self.hi)]


def ratio_interval(k1, k2, n1: int, n2: int, z: float = Z95):
    """Ratio (k2/n2)/(k1/n1) with the log-scale (Katz) interval."""
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (k2 / n2) / (k1 / n1)
        se = np.sqrt(1 / k2 - 1 / n2 + 1 / k1 - 1 / n1)
        return r, r * np.exp(-z * se), r * np.exp(z * se)


def _with_coupling(base: InputLaw, coupling: Coupling) -> InputLaw:
    p = base.params
    if base.family is Family.PARETO_LOG:
        return pareto_log(p["alpha"], p["shift"], coupling)
    if base.family is Family.WEIBULL_LOG:
        return weibull_log(p["beta"], p["scale"], p["shift"], coupling)
    raise ValueError("the comparison needs a ParetoLog or WeibullLog base law")


def compare_example_3_4(base: InputLaw, rng: RngStream, grid: Sequence[float], n: int,
                        rel_tol_log: float = engine.DEFAULT_REL_TOL_LOG, workers: int = 1) -> FactorCurve:
    """P[R2 > e^u] / P[R1 > e^u] for B = A (R1) against independent B with A's law (R2)."""
    joint = _with_coupling(base, Coupling.B_EQUALS_A)
    indep = _with_coupling(base, Coupling.INDEPENDENT)
    c1 = stationary_curve(joint, rng, n, grid, rel_tol_log, workers)
    c2 = stationary_curve(indep, rng, n, grid, rel_tol_log, workers)
    f, lo, hi = ratio_interval(c1.counts, c2.counts, n, n)
    return FactorCurve(np.asarray(grid, dtype=float), f, lo, hi, c1.counts, c2.counts, n)
