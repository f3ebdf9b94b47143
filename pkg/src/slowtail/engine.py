"""Simulation in log space: trajectories, stationary samples, upper
perpetuity, perturbed-random-walk supremum, and exact enumeration.

Every routine addresses its randomness by (path index, step), so a batch
can be cut into shards and run on any number of workers with identical
output.  Step k of a path always uses the k-th map Psi_k, whichever routine
consumes it: the backward series, the coupled composition and the supremum
all see the same draws for the same path.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numba as nb
import numpy as np

from .distributions import ConfigurationError, Family, InputLaw, draw_triple
from .logreal import LogReal, lr_add
from .rng import RngStream
from .systems import Kind, LipschitzSystem, _logaddexp, apply_map

LOG_FLOOR = -700.0
N_MAX = 1_000_000
DEFAULT_REL_TOL_LOG = 50.0
DEFAULT_GUARD_LOG = 60.0
SHARD = 1 << 16


class TruncationCapHit(RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Method(enum.Enum):
    BACKWARD_SERIES = "BackwardSeries"
    FORWARD_COUPLING = "ForwardCoupling"


@dataclass(frozen=True)
class StationarySample:
    value: LogReal
    terms_used: int
    residual_log_bound: float
    method: Method
    converged: bool = True


@dataclass
class SampleBatch:
    """Struct-of-arrays form of many stationary samples."""

    sign: np.ndarray
    log_mag: np.ndarray
    terms_used: np.ndarray
    residual_log_bound: np.ndarray
    converged: np.ndarray
    method: Method

    def __len__(self) -> int:
        return len(self.sign)

    def __getitem__(self, i) -> StationarySample:
        return StationarySample(LogReal(self.sign[i], self.log_mag[i]), int(self.terms_used[i]),
                                float(self.residual_log_bound[i]), self.method, bool(self.converged[i]))

    def values(self) -> list[LogReal]:
        return [LogReal(s, l) for s, l in zip(self.sign, self.log_mag)]

    def to_float(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.where(self.sign == 0, 0.0, self.sign * np.exp(self.log_mag))

    @staticmethod
    def concat(parts: list["SampleBatch"]) -> "SampleBatch":
        return SampleBatch(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                             ("sign", "log_mag", "terms_used", "residual_log_bound", "converged")),
                           parts[0].method)


@dataclass
class SupBatch:
    m: np.ndarray
    stopped_at: np.ndarray
    record_index: np.ndarray
    walk_at_stop: np.ndarray
    capped: np.ndarray

    def __len__(self) -> int:
        return len(self.m)

    @staticmethod
    def concat(parts: list["SupBatch"]) -> "SupBatch":
        return SupBatch(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                          ("m", "stopped_at", "record_index", "walk_at_stop", "capped")))


# ---------------------------------------------------------------------------
# kernels

SERIES_B, SERIES_LOWER, SERIES_UPPER = 0, 1, 2


@nb.njit(cache=True, inline="always")
def _coefficients(sb, lb, ld):
    """(sign, log) of B - D and log of Bbar = (B+ + D) v 1."""
    sd = 1.0 if ld > -np.inf else 0.0
    sl, ll = lr_add(sb, lb, -sd, ld)
    bpos = lb if sb > 0.0 else -np.inf
    lbar = max(_logaddexp(bpos, ld), 0.0)
    return sl, ll, lbar


@nb.njit(cache=True)
def _series_kernel(fam, coup, params, atoms, k0, k1, start, n, which, rel_tol, n_max):
    sign = np.zeros(n)
    logv = np.full(n, -np.inf)
    terms = np.zeros(n, dtype=np.int64)
    resid = np.zeros(n)
    conv = np.zeros(n, dtype=np.bool_)
    bad = 0
    for i in range(n):
        path = start + i
        walk = 0.0
        ss, ls = 0.0, -np.inf
        env = -np.inf
        k = 0
        r = np.inf
        while k < n_max:
            k += 1
            la, sb, lb, ld = draw_triple(fam, coup, params, atoms, k0, k1, path, k)
            if not (la > -np.inf) or np.isnan(la):
                bad += 1
                break
            sl, ll, lbar = _coefficients(sb, lb, ld)
            if which == 0:
                cs, cl = sb, lb
            elif which == 1:
                cs, cl = sl, ll
            else:
                cs, cl = 1.0, lbar
            if cs != 0.0:
                ss, ls = lr_add(ss, ls, cs, cl + walk)
            e = max(lbar, ll)
            if e > env:
                env = e
            walk += la
            scale = ls if (ss != 0.0 and ls > LOG_FLOOR) else LOG_FLOOR
            r = env + walk
            if r <= scale - rel_tol:
                conv[i] = True
                break
        sign[i] = ss
        logv[i] = ls
        terms[i] = k
        resid[i] = r
    return sign, logv, terms, resid, conv, bad


@nb.njit(cache=True)
def _joint_kernel(fam, coup, params, atoms, k0, k1, start, n, rel_tol, n_max):
    """Lower, plain and upper series plus the walk supremum, all over the same terms.

    The stop waits for the smallest of the three sums, so every path uses one
    common depth and the termwise orderings carry over to the partial sums.
    """
    sign = np.zeros((n, 3))
    logv = np.full((n, 3), -np.inf)
    mvals = np.full(n, -np.inf)
    terms = np.zeros(n, dtype=np.int64)
    conv = np.zeros(n, dtype=np.bool_)
    bad = 0
    for i in range(n):
        path = start + i
        walk = 0.0
        s0, l0, s1, l1, s2, l2 = 0.0, -np.inf, 0.0, -np.inf, 0.0, -np.inf
        env = -np.inf
        m = -np.inf
        k = 0
        while k < n_max:
            k += 1
            la, sb, lb, ld = draw_triple(fam, coup, params, atoms, k0, k1, path, k)
            if not (la > -np.inf) or np.isnan(la):
                bad += 1
                break
            sl, ll, lbar = _coefficients(sb, lb, ld)
            if sl != 0.0:
                s0, l0 = lr_add(s0, l0, sl, ll + walk)
            if sb != 0.0:
                s1, l1 = lr_add(s1, l1, sb, lb + walk)
            s2, l2 = lr_add(s2, l2, 1.0, lbar + walk)
            if lbar + walk > m:
                m = lbar + walk
            e = max(lbar, ll)
            if e > env:
                env = e
            walk += la
            scale = LOG_FLOOR
            lo_scale = min(l0 if s0 != 0.0 else LOG_FLOOR, l1 if s1 != 0.0 else LOG_FLOOR, l2)
            if lo_scale > scale:
                scale = lo_scale
            if env + walk <= scale - rel_tol:
                conv[i] = True
                break
        sign[i, 0], logv[i, 0] = s0, l0
        sign[i, 1], logv[i, 1] = s1, l1
        sign[i, 2], logv[i, 2] = s2, l2
        mvals[i] = m
        terms[i] = k
    return sign, logv, mvals, terms, conv, bad


@nb.njit(cache=True)
def _sup_kernel(fam, coup, params, atoms, k0, k1, start, n, guard, n_max):
    mvals = np.empty(n)
    stopped = np.zeros(n, dtype=np.int64)
    record = np.zeros(n, dtype=np.int64)
    walk_stop = np.zeros(n)
    capped = np.zeros(n, dtype=np.bool_)
    bad = 0
    for i in range(n):
        path = start + i
        walk = 0.0
        m = -np.inf
        rec = 0
        k = 0
        done = False
        while k < n_max:
            k += 1
            la, sb, lb, ld = draw_triple(fam, coup, params, atoms, k0, k1, path, k)
            if not (la > -np.inf) or np.isnan(la):
                bad += 1
                done = True
                break
            bpos = lb if sb > 0.0 else -np.inf
            lbar = max(_logaddexp(bpos, ld), 0.0)
            y = lbar + walk
            if y > m:
                m = y
                rec = k - 1
            walk += la
            if walk <= m - guard:
                done = True
                break
        mvals[i] = m
        stopped[i] = k
        record[i] = rec
        walk_stop[i] = walk
        capped[i] = not done
    return mvals, stopped, record, walk_stop, capped, bad


@nb.njit(cache=True)
def _forward_kernel(kind, fam, coup, params, atoms, k0, k1, start, n, steps, r0s, r0l, keep):
    """R_steps for n paths; per-step counts of R_k > 0; full paths when keep > 0."""
    fs = np.empty(n)
    fl = np.empty(n)
    pos = np.zeros(steps + 1, dtype=np.int64)
    traj = np.zeros((keep, steps + 1, 2))
    bad = 0
    for i in range(n):
        path = start + i
        s, l = r0s, r0l
        if s > 0.0:
            pos[0] += 1
        if i < keep:
            traj[i, 0, 0] = s
            traj[i, 0, 1] = l
        for k in range(1, steps + 1):
            la, sb, lb, ld = draw_triple(fam, coup, params, atoms, k0, k1, path, k)
            s, l = apply_map(kind, la, sb, lb, ld, s, l)
            if np.isnan(l) or l == np.inf:
                bad += 1
            if s > 0.0:
                pos[k] += 1
            if i < keep:
                traj[i, k, 0] = s
                traj[i, k, 1] = l
        fs[i] = s
        fl[i] = l
    return fs, fl, pos, traj, bad


@nb.njit(cache=True)
def _coupling_kernel(kind, fam, coup, params, atoms, k0, k1, start, n, tol, n_max, depth0):
    sign = np.zeros(n)
    logv = np.full(n, -np.inf)
    terms = np.zeros(n, dtype=np.int64)
    resid = np.zeros(n)
    conv = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        path = start + i
        depth = depth0
        while True:
            s0, l0 = 0.0, -np.inf
            s1, l1 = 1.0, 0.0
            for k in range(depth, 0, -1):
                la, sb, lb, ld = draw_triple(fam, coup, params, atoms, k0, k1, path, k)
                s0, l0 = apply_map(kind, la, sb, lb, ld, s0, l0)
                s1, l1 = apply_map(kind, la, sb, lb, ld, s1, l1)
            gs, gl = lr_add(s0, l0, -s1, l1)
            scale = l0 if (s0 != 0.0 and l0 > LOG_FLOOR) else LOG_FLOOR
            if gs == 0.0 or gl <= scale - tol:
                conv[i] = True
                break
            if depth >= n_max:
                break
            depth = min(2 * depth, n_max)
        sign[i] = s0
        logv[i] = l0
        terms[i] = depth
        resid[i] = gl
    return sign, logv, terms, resid, conv


# ---------------------------------------------------------------------------
# sharding


def _shards(start: int, n: int, shard: int):
    return [(start + j, min(shard, n - j)) for j in range(0, n, shard)]


def run_sharded(fn: Callable[[int, int], object], start: int, n: int, workers: int = 1,
                shard: int = SHARD) -> list:
    """Evaluate ``fn(first_path, count)`` over fixed shards; results in shard order.

    Shards are cut at fixed offsets and each path's draws depend only on its
    index, so the output does not depend on ``workers``.
    """
    jobs = _shards(start, n, shard)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(a, c) for a, c in jobs]
    import multiprocessing as mp

    ctx = mp.get_context("fork") if os.name == "posix" else None
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(_call, [(fn, a, c) for a, c in jobs]))


def _call(args):
    fn, a, c = args
    return fn(a, c)


def _check_law(law: InputLaw) -> None:
    if law.family is Family.CUSTOM:
        raise ConfigurationError("compiled samplers need a built-in family; use the reference path")


def _check_drift(mu: float) -> None:
    if not (0.0 < mu < math.inf):
        raise ConfigurationError(f"need E[log A] < 0, got mu = {mu}")


class _SeriesJob:
    def __init__(self, law, key, which, rel_tol, n_max):
        self.args = (*law.packed(), *key)
        self.which, self.rel_tol, self.n_max = which, rel_tol, n_max
        self.name = law.name

    def __call__(self, a, c):
        fam, coup, params, atoms, k0, k1 = self.args
        s, l, t, r, cv, bad = _series_kernel(fam, coup, params, atoms, k0, k1, np.uint64(a), c,
                                             self.which, float(self.rel_tol), int(self.n_max))
        if bad:
            raise ConfigurationError(f"{self.name}: sampler produced A <= 0")
        return SampleBatch(s, l, t, r, cv, Method.BACKWARD_SERIES)


def _series_batch(law, rng, n, which, rel_tol_log, n_max, workers, strict):
    _check_law(law)
    _check_drift(law.mu)
    if rel_tol_log < 30:
        raise ValueError("rel_tol_log must be at least 30")
    start = rng.take(n)
    job = _SeriesJob(law, rng.key, which, rel_tol_log, n_max)
    out = SampleBatch.concat(run_sharded(job, start, n, workers))
    if strict and not out.converged.all():
        bad = int(np.flatnonzero(~out.converged)[0])
        raise TruncationCapHit(
            f"truncation cap hit: {n_max} terms without convergence",
            {"path": start + bad, "partial": out[bad], "unconverged": int((~out.converged).sum())},
        )
    return out


def perpetuity_batch(law: InputLaw, rng: RngStream, n: int, rel_tol_log: float = DEFAULT_REL_TOL_LOG,
                     n_max: int = N_MAX, workers: int = 1, strict: bool = True,
                     coefficient: str = "b") -> SampleBatch:
    """``n`` perpetuities sum_k C_{k+1} A_1...A_k with C = B, B - D ("lower") or Bbar ("upper")."""
    which = {"b": SERIES_B, "lower": SERIES_LOWER, "upper": SERIES_UPPER}[coefficient]
    return _series_batch(law, rng, n, which, rel_tol_log, n_max, workers, strict)


def sample_perpetuity(law: InputLaw, rng: RngStream, rel_tol_log: float = DEFAULT_REL_TOL_LOG,
                      n_max: int = N_MAX) -> StationarySample:
    """One draw of the perpetuity sum_{n>=0} B_{n+1} A_1 ... A_n."""
    return perpetuity_batch(law, rng, 1, rel_tol_log, n_max)[0]


def sample_upper_perpetuity(law: InputLaw, rng: RngStream, rel_tol_log: float = DEFAULT_REL_TOL_LOG,
                            n_max: int = N_MAX) -> StationarySample:
    """The dominating perpetuity built from Bbar = (B+ + D) v 1."""
    return perpetuity_batch(law, rng, 1, rel_tol_log, n_max, coefficient="upper")[0]


class _JointJob:
    def __init__(self, law, key, rel_tol, n_max):
        self.args = (*law.packed(), *key)
        self.rel_tol, self.n_max = rel_tol, n_max

    def __call__(self, a, c):
        return _joint_kernel(*self.args, np.uint64(a), c, float(self.rel_tol), int(self.n_max))


@dataclass
class JointBatch:
    """Lower, plain and upper perpetuities and M on shared draws and a common depth."""

    sign: np.ndarray  # (n, 3): lower, plain, upper
    log_mag: np.ndarray
    m: np.ndarray
    terms_used: np.ndarray
    converged: np.ndarray

    def to_float(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.where(self.sign == 0, 0.0, self.sign * np.exp(self.log_mag))


def joint_batch(law: InputLaw, rng: RngStream, n: int, rel_tol_log: float = DEFAULT_REL_TOL_LOG,
                n_max: int = N_MAX, workers: int = 1) -> JointBatch:
    """Pathwise comparison run: the three series and M built from one set of draws."""
    _check_law(law)
    _check_drift(law.mu)
    start = rng.take(n)
    parts = run_sharded(_JointJob(law, rng.key, rel_tol_log, n_max), start, n, workers)
    if any(p[5] for p in parts):
        raise ConfigurationError(f"{law.name}: sampler produced A <= 0")
    return JointBatch(*(np.concatenate([p[j] for p in parts]) for j in range(5)))


class _SupJob:
    def __init__(self, law, key, guard, n_max):
        self.args = (*law.packed(), *key)
        self.guard, self.n_max = guard, n_max
        self.name = law.name

    def __call__(self, a, c):
        fam, coup, params, atoms, k0, k1 = self.args
        m, st, rec, w, cap, bad = _sup_kernel(fam, coup, params, atoms, k0, k1, np.uint64(a), c,
                                              float(self.guard), int(self.n_max))
        if bad:
            raise ConfigurationError(f"{self.name}: sampler produced A <= 0")
        return SupBatch(m, st, rec, w, cap)


def sup_walk_batch(law: InputLaw, rng: RngStream, n: int, guard_log: float = DEFAULT_GUARD_LOG,
                   n_max: int = N_MAX, workers: int = 1, strict: bool = True) -> SupBatch:
    """``n`` draws of M = sup_n {log Bbar_{n+1} + S_n}, stopped once S_n <= max - guard."""
    _check_law(law)
    _check_drift(law.mu)
    if guard_log <= 0:
        raise ValueError("guard_log must be positive")
    start = rng.take(n)
    out = SupBatch.concat(run_sharded(_SupJob(law, rng.key, guard_log, n_max), start, n, workers))
    if strict and out.capped.any():
        i = int(np.flatnonzero(out.capped)[0])
        raise TruncationCapHit(
            f"truncation cap hit after {n_max} steps; maximum so far {out.m[i]:.6g} may be biased low",
            {"path": start + i, "current_max": float(out.m[i])},
        )
    return out


def sample_sup_walk(law: InputLaw, rng: RngStream, guard_log: float = DEFAULT_GUARD_LOG,
                    n_max: int = N_MAX) -> tuple[float, int, int]:
    """(M, stopped_at, record_index) for one path."""
    b = sup_walk_batch(law, rng, 1, guard_log, n_max)
    return float(b.m[0]), int(b.stopped_at[0]), int(b.record_index[0])


def late_record_bias(batch: SupBatch, integrated_tail: Callable, mu: float) -> float:
    """Mean of (1/mu) F_I(M - S_stop): estimated chance that a record arrives after stopping."""
    gap = batch.m - batch.walk_at_stop
    return float(np.mean(np.asarray(integrated_tail(gap)) / mu))


# ---------------------------------------------------------------------------
# systems


def _system_args(system: LipschitzSystem, rng: RngStream):
    if system.kind is Kind.CUSTOM or system.law.family is Family.CUSTOM:
        raise ConfigurationError("compiled paths need a built-in kind and family")
    return (system.code, *system.law.packed(), *rng.key)


class _ForwardJob:
    def __init__(self, args, steps, r0: LogReal):
        self.args, self.steps, self.r0 = args, steps, r0

    def __call__(self, a, c):
        fs, fl, pos, _, bad = _forward_kernel(*self.args, np.uint64(a), c, self.steps,
                                              self.r0.sign, self.r0.log_mag, 0)
        if bad:
            raise OverflowError("LogReal overflow in forward iteration")
        return fs, fl, pos


@dataclass
class HorizonBatch:
    """R_n over many paths, plus counts of R_k > 0 for k = 0..n."""

    sign: np.ndarray
    log_mag: np.ndarray
    positive_counts: np.ndarray

    @property
    def positive_fractions(self) -> np.ndarray:
        return self.positive_counts / len(self.sign)

    def to_float(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.where(self.sign == 0, 0.0, self.sign * np.exp(self.log_mag))


def forward_batch(system: LipschitzSystem, r0, n_steps: int, rng: RngStream, n: int,
                  workers: int = 1) -> HorizonBatch:
    """R_{n_steps} = Psi_{n_steps} o ... o Psi_1 (r0) for ``n`` independent paths."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    r0 = r0 if isinstance(r0, LogReal) else LogReal.from_float(float(r0))
    args = _system_args(system, rng)
    start = rng.take(n)
    parts = run_sharded(_ForwardJob(args, n_steps, r0), start, n, workers)
    return HorizonBatch(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                        np.sum([p[2] for p in parts], axis=0))


def iterate_forward(system: LipschitzSystem, r0, n: int, rng: RngStream) -> list[LogReal]:
    """Trajectory (R_0, ..., R_n) of one path with R_{k+1} = Psi_{k+1}(R_k)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    r0 = r0 if isinstance(r0, LogReal) else LogReal.from_float(float(r0))
    if system.kind is Kind.CUSTOM or system.law.family is Family.CUSTOM:
        path = rng.take(1)
        out = [r0]
        for k in range(1, n + 1):
            out.append(system.draw(rng, path, k)(out[-1]))
            if not out[-1].is_finite:
                raise OverflowError(f"LogReal overflow; last finite index {k - 1}")
        return out
    args = _system_args(system, rng)
    start = rng.take(1)
    _, _, _, traj, _ = _forward_kernel(*args, np.uint64(start), 1, n, r0.sign, r0.log_mag, 1)
    out = []
    for k in range(n + 1):
        v = LogReal(traj[0, k, 0], traj[0, k, 1])
        if not v.is_finite:
            raise OverflowError(f"LogReal overflow; last finite index {k - 1}")
        out.append(v)
    return out


class _CouplingJob:
    def __init__(self, args, tol, n_max, depth0):
        self.args, self.tol, self.n_max, self.depth0 = args, tol, n_max, depth0

    def __call__(self, a, c):
        s, l, t, r, cv = _coupling_kernel(*self.args, np.uint64(a), c, float(self.tol),
                                          int(self.n_max), int(self.depth0))
        return SampleBatch(s, l, t, r, cv, Method.FORWARD_COUPLING)


def coupling_batch(system: LipschitzSystem, rng: RngStream, n: int,
                   couple_tol_log: float = DEFAULT_REL_TOL_LOG, n_max: int = N_MAX,
                   workers: int = 1, strict: bool = True, depth0: int = 32) -> SampleBatch:
    """Stationary draws by running two starts (0 and 1) through shared maps until they merge.

    The maps are composed Psi_1 o ... o Psi_n with n doubled until the two
    images agree to ``couple_tol_log`` nats below the value's magnitude.
    Composing from the past, rather than pushing a chain forward and stopping
    when it happens to couple, keeps the output free of stopping-time bias.
    """
    contraction = system.law.mu if system.kind is not Kind.ARCH1 else None
    if contraction is not None:
        _check_drift(contraction)
    args = _system_args(system, rng)
    start = rng.take(n)
    out = SampleBatch.concat(run_sharded(_CouplingJob(args, couple_tol_log, n_max, depth0), start, n, workers))
    if strict and not out.converged.all():
        i = int(np.flatnonzero(~out.converged)[0])
        raise TruncationCapHit(f"coupling not reached within {n_max} maps", {"path": start + i})
    return out


def sample_stationary_forward(system: LipschitzSystem, rng: RngStream,
                              couple_tol_log: float = DEFAULT_REL_TOL_LOG,
                              n_max: int = N_MAX) -> StationarySample:
    return coupling_batch(system, rng, 1, couple_tol_log, n_max)[0]


# ---------------------------------------------------------------------------
# exact enumeration

ENUMERATION_LIMIT = 10_000_000


@nb.njit(cache=True)
def _enumerate_step(kind, s, l, p, atoms_log, probs):
    m = s.shape[0]
    r = probs.shape[0]
    ns = np.empty(m * r)
    nl = np.empty(m * r)
    np_ = np.empty(m * r)
    for i in range(m):
        for j in range(r):
            a, b1, b2, d = atoms_log[j, 0], atoms_log[j, 1], atoms_log[j, 2], atoms_log[j, 3]
            vs, vl = apply_map(kind, a, b1, b2, d, s[i], l[i])
            ns[i * r + j] = vs
            nl[i * r + j] = vl
            np_[i * r + j] = p[i] * probs[j]
    return ns, nl, np_


def enumerate_finite(system: LipschitzSystem, r0: float, n: int) -> list[tuple[float, float]]:
    """Exact law of R_n as sorted (value, probability) atoms, by enumerating all paths."""
    law = system.law
    if law.family not in (Family.DISCRETE_FINITE, Family.DETERMINISTIC):
        raise ConfigurationError("enumeration needs a DiscreteFinite law")
    live = law.probs > 0
    atoms, probs = law.atoms[live], law.probs[live]
    s = len(probs)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if s ** n > ENUMERATION_LIMIT:
        raise ValueError(f"{s}^{n} paths exceed the enumeration bound {ENUMERATION_LIMIT}")
    if system.kind is Kind.CUSTOM:
        raise ConfigurationError("enumeration supports built-in kinds only")
    with np.errstate(divide="ignore"):
        atoms_log = np.column_stack([
            np.log(atoms[:, 0]), np.sign(atoms[:, 1]), np.log(np.abs(atoms[:, 1])), np.log(atoms[:, 2]),
        ])
    v = LogReal.from_float(r0)
    sg, lg, pr = np.array([v.sign]), np.array([v.log_mag]), np.array([1.0])
    for _ in range(n):
        sg, lg, pr = _enumerate_step(system.code, sg, lg, pr, atoms_log, probs)
    with np.errstate(over="ignore"):
        vals = np.where(sg == 0, 0.0, sg * np.exp(lg))
    keys = np.round(vals, 12)
    uniq, inv = np.unique(keys, return_inverse=True)
    mass = np.bincount(inv, weights=pr)
    rep = np.zeros(len(uniq))
    rep[inv] = vals
    return [(float(x), float(p)) for x, p in zip(rep, mass)]
