"""Scenario files: schema, built-in catalog and the end-to-end runner."""

from __future__ import annotations

import json
import math
import os
import platform
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__, engine, plotting
from .asymptotics import Regime, RegimeKind, integrated_tail
from .distributions import (ConfigurationError, Coupling, GridDensity, InputLaw, check_subexponential,
                            deterministic, discrete_finite, indicator_counter, pareto_log, potter_check,
                            weibull_log)
from .estimation import (attach_theory, compare_example_3_4, coupling_curve, horizon_curve, ratio_trend,
                         stationary_curve, sup_walk_curve)
from .rng import RngStream
from .systems import LipschitzSystem, make_affine, make_affine_positive, make_arch1

SCHEMA_VERSION = 1
MODES = ("deterministic", "enumeration", "stationary", "finite_horizon", "sup_walk",
         "example34", "bounded", "separation", "diagnostics")


class SchemaError(ValueError):
    """A config problem, reported with its line and field."""

    def __init__(self, message: str, line: Optional[int] = None, path: str = ""):
        where = f"line {line}: " if line else ""
        what = f"field '{path}': " if path else ""
        super().__init__(f"{where}{what}{message}")
        self.line, self.path = line, path


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage


# ---------------------------------------------------------------------------
# parsing with line numbers


def _lines(node, path="", out=None) -> dict:
    """Map dotted field paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = f"{path}.{k.value}" if path else str(k.value)
            out[p] = k.start_mark.line + 1
            _lines(v, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            p = f"{path}[{i}]"
            out[p] = v.start_mark.line + 1
            _lines(v, p, out)
    return out


@dataclass
class Scenario:
    name: str
    mode: str
    description: str = ""
    theorem: str = ""
    criterion: str = ""
    law: Optional[dict] = None
    system: str = "affine"
    regime: Optional[dict] = None
    grid: list = field(default_factory=list)
    n_samples: int = 0
    seed: int = 0
    workers: int = 1
    horizon: Optional[dict] = None
    engine: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


_TOP = {"schema_version", "name", "mode", "description", "theorem", "criterion", "law", "system",
        "regime", "grid", "n_samples", "seed", "workers", "horizon", "engine", "checks"}
_NEEDS_LAW = {"deterministic", "enumeration", "stationary", "finite_horizon", "sup_walk", "example34", "bounded"}
_NEEDS_GRID = {"stationary", "finite_horizon", "sup_walk", "example34", "separation"}


def parse_scenario(text: str, source: str = "<config>") -> Scenario:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemaError(f"{source}: not valid YAML ({getattr(exc, 'problem', exc)})",
                          mark.line + 1 if mark else None) from None
    lines = _lines(node) if node is not None else {}

    def fail(path, msg):
        line = lines.get(path)
        if line is None and "." in path:
            line = lines.get(path.rsplit(".", 1)[0])
        raise SchemaError(msg, line, path)

    if not isinstance(data, dict):
        raise SchemaError("top level must be a mapping", 1)
    for key in data:
        if key not in _TOP:
            fail(key, "unknown field")
    if data.get("schema_version") != SCHEMA_VERSION:
        fail("schema_version", f"must be {SCHEMA_VERSION}")
    for key in ("name", "mode"):
        if not isinstance(data.get(key), str):
            fail(key, "required string")
    mode = data["mode"]
    if mode not in MODES:
        fail("mode", f"must be one of {', '.join(MODES)}")
    if mode in _NEEDS_LAW and not isinstance(data.get("law"), dict):
        fail("law", "required mapping for this mode")
    if "law" in data:
        _check_law_spec(data["law"], "law", fail)
    if mode in _NEEDS_GRID:
        grid = data.get("grid")
        if not isinstance(grid, list) or not grid or not all(isinstance(g, (int, float)) for g in grid):
            fail("grid", "required non-empty list of numbers")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            fail("grid", "must be strictly increasing")
    for key in ("n_samples", "seed", "workers"):
        if key in data and (not isinstance(data[key], int) or isinstance(data[key], bool) or data[key] < 0):
            fail(key, "must be a nonnegative integer")
    if mode not in ("separation", "diagnostics") and data.get("n_samples", 0) <= 0 and mode != "deterministic":
        fail("n_samples", "required positive integer")
    if data.get("workers", 1) < 1:
        fail("workers", "must be at least 1")
    if "system" in data and data["system"] not in ("affine", "affine_positive", "arch1"):
        fail("system", "must be affine, affine_positive or arch1")
    if mode in ("finite_horizon", "enumeration"):
        hz = data.get("horizon")
        if not isinstance(hz, dict) or not isinstance(hz.get("n"), int) or hz["n"] < 0:
            fail("horizon", "needs an integer n >= 0")
    if "regime" in data:
        rg = data["regime"]
        kinds = [k.value for k in RegimeKind]
        if not isinstance(rg, dict) or rg.get("kind") not in kinds:
            fail("regime.kind" if isinstance(rg, dict) else "regime", f"must be one of {', '.join(kinds)}")
    for key in ("engine", "checks"):
        if key in data and not isinstance(data[key], dict):
            fail(key, "must be a mapping")
    return Scenario(
        name=data["name"], mode=mode, description=data.get("description", ""),
        theorem=data.get("theorem", ""), criterion=data.get("criterion", ""), law=data.get("law"),
        system=data.get("system", "affine"), regime=data.get("regime"), grid=list(data.get("grid", [])),
        n_samples=int(data.get("n_samples", 0)), seed=int(data.get("seed", 0)),
        workers=int(data.get("workers", 1)), horizon=data.get("horizon"), engine=dict(data.get("engine", {})),
        checks=dict(data.get("checks", {})), raw=data,
    )


_FAMILY_FIELDS = {
    "pareto_log": {"alpha", "shift", "coupling"},
    "weibull_log": {"beta", "scale", "shift", "coupling"},
    "discrete_finite": {"atoms", "probs"},
    "deterministic": {"a", "b", "d"},
    "indicator_counter": {"base"},
}


def _check_law_spec(spec, path, fail) -> None:
    if not isinstance(spec, dict):
        fail(path, "must be a mapping")
    fam = spec.get("family")
    if fam not in _FAMILY_FIELDS:
        fail(f"{path}.family", f"must be one of {', '.join(_FAMILY_FIELDS)}")
    for key in spec:
        if key != "family" and key not in _FAMILY_FIELDS[fam]:
            fail(f"{path}.{key}", f"not a parameter of {fam}")
    if fam == "indicator_counter":
        _check_law_spec(spec.get("base"), f"{path}.base", fail)
    if "coupling" in spec and spec["coupling"] not in ("b_equals_a", "independent"):
        fail(f"{path}.coupling", "must be b_equals_a or independent")


def build_law(spec: dict) -> InputLaw:
    fam = spec["family"]
    coupling = {"b_equals_a": Coupling.B_EQUALS_A, "independent": Coupling.INDEPENDENT}[
        spec.get("coupling", "b_equals_a")]
    if fam == "pareto_log":
        return pareto_log(spec["alpha"], spec["shift"], coupling)
    if fam == "weibull_log":
        return weibull_log(spec["beta"], spec["scale"], spec["shift"], coupling)
    if fam == "discrete_finite":
        return discrete_finite(spec["atoms"], spec["probs"])
    if fam == "deterministic":
        return deterministic(spec["a"], spec["b"], spec.get("d", 0.0))
    return indicator_counter(build_law(spec["base"]))


def build_system(kind: str, law: InputLaw) -> LipschitzSystem:
    return {"affine": make_affine, "affine_positive": make_affine_positive, "arch1": make_arch1}[kind](law)


# ---------------------------------------------------------------------------
# built-in catalog

_PARETO = {"family": "pareto_log", "alpha": 2, "shift": 4, "coupling": "b_equals_a"}

BUILTINS: dict[str, dict[str, Any]] = {
    "deterministic-smoke": dict(
        mode="deterministic", law={"family": "deterministic", "a": 0.5, "b": 1, "d": 0},
        description="A = 1/2, B = 1: the perpetuity is the geometric sum 2.",
        theorem="perpetuity as the series sum of B_{n+1} A_1...A_n (geometric case)",
        criterion="deterministic exactness: R = 2 within 1e-12, under 1 s",
        n_samples=1, checks={"expect": 2.0, "tol": 1e-12}),
    "enumeration-oracle": dict(
        mode="enumeration", law={"family": "discrete_finite", "atoms": [[0.5, 0, 0], [0.5, 1, 0]],
                                 "probs": [0.5, 0.5]},
        description="Forward iteration against exact enumeration of all 2^10 paths.",
        theorem="forward iteration R_n = Psi_n(R_{n-1}) with i.i.d. maps",
        criterion="enumeration equivalence: total variation <= 4 sqrt(2n/N)",
        horizon={"n": 10, "r0": 0.0}, n_samples=1_000_000),
    "thm33-finite-horizon": dict(
        mode="finite_horizon", law=_PARETO, regime={"kind": "PositiveBD"},
        description="P[R_3 > e^60] from R_0 = 1 against (w + n) P[A v B > e^60].",
        theorem="finite-horizon tail: P[R_n > x] ~ (w + n) P[A v B > x] when B - D > 0",
        criterion="finite-horizon ratio at u = 60 within [0.85, 1.15] at 1e7 samples",
        horizon={"n": 3, "r0": 1.0, "w": 0.0}, grid=[15, 30, 60], n_samples=10_000_000,
        checks={"at": 60, "ratio": [0.85, 1.15]}),
    "thm25-sup-walk": dict(
        mode="sup_walk", law=_PARETO,
        description="Supremum of the perturbed walk S_{n-1} + log(A_n v Bbar_n), stopped with guard 60.",
        theorem="supremum of a perturbed random walk: P[M > u] ~ F_I(u) / mu",
        criterion="walk supremum ratio at u = 196 within [0.7, 1.3], trending toward 1",
        grid=[50, 100, 196], n_samples=10_000_000, engine={"guard_log": 60},
        checks={"at": 196, "ratio": [0.7, 1.3], "trend_to_one": True}),
    "thm31-positive-bd": dict(
        mode="stationary", law=_PARETO, regime={"kind": "PositiveBD"},
        description="Stationary tail of R = AR + B with B = A, against F_I(u)/mu.",
        theorem="stationary tail: P[R > x] ~ F_I(log x) / mu, within the general sandwich",
        criterion="sandwich: Wilson intervals meet [0.5 lo, 1.5 hi]; ratios nondecreasing in u",
        grid=[50, 100, 200], n_samples=1_000_000, engine={"rel_tol_log": 3000},
        checks={"sandwich": [0.5, 1.5], "nondecreasing": True}),
    "example-3-4": dict(
        mode="example34", law=_PARETO,
        description="Same marginals, B = A against independent B: the tails differ by a factor 2.",
        theorem="the joint law of (A, B), not the marginals, fixes the tail constant",
        criterion="factor interval at u = 100 inside [1.5, 2.5] with 1e6 samples per coupling",
        grid=[25, 50, 100], n_samples=1_000_000, engine={"rel_tol_log": 3000},
        checks={"at": 100, "interval": [1.5, 2.5]}),
    "bounded-example": dict(
        mode="bounded", law={"family": "indicator_counter", "base": _PARETO},
        description="B = 1{A <= 1} - A: heavy-tailed inputs with a solution bounded by 1.",
        theorem="the input tail condition is needed: here R <= 1 almost surely",
        criterion="maximum of 1e6 stationary samples <= 1 + 1e-9",
        grid=[-2, -1, -0.5, -0.1], n_samples=1_000_000, checks={"max_bound": 1.000000001}),
    "remark32-separation": dict(
        mode="separation", grid=[25, 200],
        description="P[A v B > e^u] / F_I(u) shrinks: the input tail is negligible next to R's.",
        theorem="P[A v B > x] = o(P[R > x])",
        criterion="F(u)/F_I(u) at u = 200 below half its value at u = 25 on both families",
        checks={"shrink": 0.5, "families": [_PARETO, {"family": "weibull_log", "beta": 0.5, "scale": 1,
                                                         "shift": 4, "coupling": "b_equals_a"}]}),
    "diagnostics": dict(
        mode="diagnostics",
        description="Class checks: Pareto in S, Exponential not in S, Potter bounds.",
        theorem="subexponential and long-tailed classes, Potter-type bounds",
        criterion="Pareto ratio in [1.9, 2.1]; Exponential not in S; Potter passes/fails as expected",
        checks={"pareto_x_max": 10000.0, "exponential_x_max": 40.0, "delta_cap": 2.0, "delta_exp": 0.1}),
    "weibull-stationary": dict(
        mode="stationary",
        law={"family": "weibull_log", "beta": 0.5, "scale": 1, "shift": 4, "coupling": "b_equals_a"},
        regime={"kind": "PositiveBD"},
        description="Stationary tail with a Weibull-type (beta = 1/2) log-tail.",
        theorem="stationary tail: P[R > x] ~ F_I(log x) / mu",
        criterion="sandwich as for the Pareto case (exploratory, not an acceptance item)",
        grid=[10, 20, 40, 80], n_samples=200_000, engine={"rel_tol_log": 400},
        checks={"sandwich": [0.5, 1.5], "companion": True}),
}


def builtin_text(name: str, seed: int = 20240601) -> str:
    if name not in BUILTINS:
        raise KeyError(f"no built-in scenario '{name}'")
    body = {"schema_version": SCHEMA_VERSION, "name": name, "seed": seed, "workers": 1, **BUILTINS[name]}
    return yaml.safe_dump(body, sort_keys=False)


def list_scenarios() -> list[dict]:
    return [{"name": k, "mode": v["mode"], "description": v["description"], "theorem": v["theorem"],
             "criterion": v["criterion"]} for k, v in BUILTINS.items()]


def load_scenario(ref: str) -> Scenario:
    """A path to a YAML file, or the name of a built-in."""
    p = Path(ref)
    if p.exists():
        return parse_scenario(p.read_text(), str(p))
    if ref in BUILTINS:
        return parse_scenario(builtin_text(ref), ref)
    raise SchemaError(f"no config file or built-in named '{ref}'")


# ---------------------------------------------------------------------------
# outputs


def write_atomic(path: Path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, (float, np.floating)):
            return "" if math.isnan(v) else repr(float(v))
        return str(v)
    return "\n".join([",".join(header)] + [",".join(cell(v) for v in r) for r in rows]) + "\n"


def _curve_csv(curve) -> str:
    return _csv(["u", "n_samples", "count", "p_hat", "ci_lo", "ci_hi", "theory", "theory_lo", "theory_hi",
                 "ratio"], curve.rows())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


@dataclass
class RunResult:
    scenario: Scenario
    passed: bool
    verdicts: dict
    files: dict  # file name -> text content
    summary: dict

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 2


# ---------------------------------------------------------------------------
# mode runners; each returns (verdicts, values, files, svgs)


def _regime(sc: Scenario) -> Regime:
    rg = sc.regime or {"kind": "PositiveBD"}
    reg = Regime(RegimeKind(rg["kind"]), rg.get("aux"),
                 tuple(rg["aux_interval"]) if rg.get("aux_interval") else None)
    return reg


def _at(grid, u) -> int:
    idx = [i for i, g in enumerate(grid) if abs(g - u) < 1e-12]
    if not idx:
        raise ConfigurationError(f"checks.at = {u} is not a grid point")
    return idx[0]


def _run_deterministic(sc, rng, workers):
    law = build_law(sc.law)
    b = engine.perpetuity_batch(law, rng, max(sc.n_samples, 1), sc.engine.get("rel_tol_log", engine.DEFAULT_REL_TOL_LOG),
                                workers=workers)
    vals = b.to_float()
    expect, tol = sc.checks.get("expect", 2.0), sc.checks.get("tol", 1e-12)
    err = float(np.max(np.abs(vals - expect)))
    return {"exact_value": err <= tol}, {"value": float(vals[0]), "max_abs_error": err,
                                         "terms_used": int(b.terms_used[0])}, {}, {}


def _run_enumeration(sc, rng, workers):
    law = build_law(sc.law)
    system = build_system(sc.system, law)
    n, r0 = sc.horizon["n"], float(sc.horizon.get("r0", 0.0))
    exact = engine.enumerate_finite(system, r0, n)
    atoms = np.array([v for v, _ in exact])
    probs = np.array([p for _, p in exact])
    fb = engine.forward_batch(system, r0, n, rng, sc.n_samples, workers)
    vals = fb.to_float()
    pos = np.clip(np.searchsorted(atoms, vals), 1, len(atoms) - 1) if len(atoms) > 1 else np.zeros(len(vals), int)
    if len(atoms) > 1:
        left = atoms[pos - 1]
        pos = np.where(np.abs(vals - left) <= np.abs(vals - atoms[pos]), pos - 1, pos)
    off = np.abs(vals - atoms[pos]) > 1e-9 * np.maximum(1.0, np.abs(vals))
    counts = np.bincount(pos[~off], minlength=len(atoms))
    freq = counts / sc.n_samples
    tv = 0.5 * (np.abs(freq - probs).sum() + off.sum() / sc.n_samples)
    bound = sc.checks.get("tv_max", 4.0 * math.sqrt(2.0 * n / sc.n_samples))
    rows = [(a, p, c, f) for a, p, c, f in zip(atoms, probs, counts, freq)]
    return ({"total_variation": tv <= bound},
            {"total_variation": tv, "tv_bound": bound, "atoms": len(atoms), "off_atom": int(off.sum())},
            {"enumeration.csv": _csv(["value", "probability", "count", "frequency"], rows)}, {})


def _run_finite(sc, rng, workers):
    law = build_law(sc.law)
    system = build_system(sc.system, law)
    hz = sc.horizon
    n, r0, w = hz["n"], float(hz.get("r0", 1.0)), float(hz.get("w", 0.0))
    curve = horizon_curve(system, r0, n, rng, sc.n_samples, sc.grid, workers)
    attach_theory(curve, law, _regime(sc), horizon=n, w=w, aux=curve.meta["positive_fractions"])
    verdicts, values = {}, {}
    if "at" in sc.checks:
        i = _at(sc.grid, sc.checks["at"])
        r = float(curve.ratios()[i])
        lo, hi = sc.checks.get("ratio", [0.85, 1.15])
        verdicts["ratio_in_band"] = lo <= r <= hi
        values.update(ratio_at=r, band=[lo, hi])
    values["ratios"] = curve.ratios()
    return verdicts, values, {"tail_curve.csv": _curve_csv(curve)}, {"tail_curve.svg": (plotting.tail_curve_svg, curve)}


def _run_sup(sc, rng, workers):
    law = build_law(sc.law)
    guard = sc.engine.get("guard_log", engine.DEFAULT_GUARD_LOG)
    curve = sup_walk_curve(law, rng, sc.n_samples, sc.grid, guard, workers)
    attach_theory(curve, law, Regime(RegimeKind.POSITIVE_BD), quantity="sup_walk")
    ratios = curve.ratios()
    verdicts, values = {}, {"ratios": ratios, "guard_log": guard}
    if "at" in sc.checks:
        i = _at(sc.grid, sc.checks["at"])
        lo, hi = sc.checks.get("ratio", [0.7, 1.3])
        verdicts["ratio_in_band"] = lo <= ratios[i] <= hi
        values["ratio_at"] = ratios[i]
    if sc.checks.get("trend_to_one"):
        dev = np.abs(ratios - 1.0)
        verdicts["trend_to_one"] = bool(np.all(np.diff(dev) <= 0))
    return verdicts, values, {"tail_curve.csv": _curve_csv(curve)}, {"tail_curve.svg": (plotting.tail_curve_svg, curve)}


def _run_stationary(sc, rng, workers):
    law = build_law(sc.law)
    rel_tol = sc.engine.get("rel_tol_log", engine.DEFAULT_REL_TOL_LOG)
    curve = stationary_curve(law, rng, sc.n_samples, sc.grid, rel_tol, workers)
    attach_theory(curve, law, _regime(sc))
    trend = ratio_trend(curve, law if sc.checks.get("companion") else None)
    verdicts = {}
    values = {"ratios": trend.ratios, "ratio_lo": trend.ratio_lo, "ratio_hi": trend.ratio_hi,
              "trend": trend.verdict, "rel_tol_log": rel_tol, "mean_terms": curve.meta["mean_terms"]}
    if "sandwich" in sc.checks:
        m_lo, m_hi = sc.checks["sandwich"]
        lo = np.nan_to_num(curve.theory_lo, nan=0.0) * m_lo
        hi = curve.theory_hi * m_hi
        verdicts["sandwich"] = bool(np.all((curve.ci_hi >= lo) & (curve.ci_lo <= hi)))
    if sc.checks.get("nondecreasing"):
        verdicts["nondecreasing"] = bool(np.all(np.diff(trend.ratios) >= 0))
    if trend.companion is not None:
        values["companion"] = trend.companion
        values["companion_verdict"] = trend.companion_verdict
    svgs = {"tail_curve.svg": (plotting.tail_curve_svg, curve),
            "ratios.svg": (plotting.ratio_svg, sc.grid, trend.ratios, trend.ratio_lo, trend.ratio_hi)}
    return verdicts, values, {"tail_curve.csv": _curve_csv(curve)}, svgs


def _run_example34(sc, rng, workers):
    law = build_law(sc.law)
    rel_tol = sc.engine.get("rel_tol_log", engine.DEFAULT_REL_TOL_LOG)
    fc = compare_example_3_4(law, rng, sc.grid, sc.n_samples, rel_tol, workers)
    verdicts, values = {}, {"factor": fc.factor, "lo": fc.lo, "hi": fc.hi}
    if "at" in sc.checks:
        i = _at(sc.grid, sc.checks["at"])
        a, b = sc.checks.get("interval", [1.5, 2.5])
        verdicts["factor_interval"] = bool(a <= fc.lo[i] and fc.hi[i] <= b)
    text = _csv(["u", "n_per_coupling", "count_b_equals_a", "count_independent", "factor", "lo", "hi"], fc.rows())
    return verdicts, values, {"factor.csv": text}, {"factor.svg": (plotting.factor_svg, fc)}


def _run_bounded(sc, rng, workers):
    law = build_law(sc.law)
    system = build_system(sc.system, law)
    curve, top, frac_pos = coupling_curve(system, rng, sc.n_samples, sc.grid,
                                          sc.engine.get("couple_tol_log", engine.DEFAULT_REL_TOL_LOG), workers)
    bound = sc.checks.get("max_bound", 1.0 + 1e-9)
    return ({"bounded": top <= bound}, {"max": top, "bound": bound, "fraction_positive": frac_pos},
            {"tail_curve.csv": _curve_csv(curve)}, {"tail_curve.svg": (plotting.tail_curve_svg, curve)})


def _run_separation(sc, rng, workers):
    shrink = sc.checks.get("shrink", 0.5)
    rows, verdicts = [], {}
    for spec in sc.checks["families"]:
        law = build_law(spec)
        fi = integrated_tail(law)
        r = [float(law.log_ab_tail(u)) / float(fi(u)) for u in sc.grid]
        rows += [(law.name, u, v) for u, v in zip(sc.grid, r)]
        verdicts[f"shrinks[{law.name}]"] = r[-1] < shrink * r[0]
    return verdicts, {"rows": rows}, {"separation.csv": _csv(["law", "u", "tail_over_integrated_tail"], rows)}, {}


def pareto_density_grid(x_max: float) -> GridDensity:
    """Pareto(2, 1) density on a geometric grid fine enough for the check at ``x_max``."""
    n = int(math.log(1.01 * x_max) / 1e-4 * 1.1) + 2
    x = np.unique(np.concatenate([np.geomspace(1.0, 1.01 * x_max, n), np.geomspace(1.01 * x_max, 1e6, 3000)]))
    return GridDensity.from_pdf(lambda s: 2.0 * s ** -3.0, x)


def exponential_density_grid(x_max: float) -> GridDensity:
    x = np.linspace(0.0, 1.5 * x_max, int(1.5 * x_max / (1e-4 * x_max) * 1.01) + 1)
    return GridDensity.from_pdf(lambda s: np.exp(-s), x)


def _run_diagnostics(sc, rng, workers):
    ch = sc.checks
    verdicts, values, files = {}, {}, {}
    par = check_subexponential(pareto_density_grid(ch.get("pareto_x_max", 1e4)), ch.get("pareto_x_max", 1e4))
    verdicts["pareto_terminal_ratio"] = 1.9 <= par.extra["terminal"] <= 2.1
    values["pareto_terminal_ratio"] = par.extra["terminal"]
    values["pareto_verdict"] = par.verdict
    ex = check_subexponential(exponential_density_grid(ch.get("exponential_x_max", 40.0)),
                              ch.get("exponential_x_max", 40.0))
    verdicts["exponential_not_s"] = ex.verdict == "not consistent with S"
    values["exponential_terminal_ratio"] = ex.extra["terminal"]
    files["subexponential.csv"] = _csv(["law", "x", "ratio"],
                                       [("pareto", r[0], r[2]) for r in par.rows] +
                                       [("exponential", r[0], r[2]) for r in ex.rows])
    xs = np.geomspace(1.0, 1e4, 25)
    pairs = [(a, b) for a in xs for b in xs] + [(a, a + 1.0) for a in xs]
    cap, dexp = ch.get("delta_cap", 2.0), ch.get("delta_exp", 0.1)
    pl = potter_check(pareto_log(2, 4).log_ab_tail, cap, dexp, pairs)
    gauss = potter_check(lambda x: np.exp(-np.asarray(x) ** 2), cap, dexp, pairs)
    verdicts["potter_pareto_passes"] = pl.threshold is not None
    verdicts["potter_gaussian_fails"] = gauss.threshold is None
    values.update(potter_pareto_threshold=pl.threshold, potter_gaussian_violations=len(gauss.all_violations))
    return verdicts, values, files, {}


_RUNNERS = {
    "deterministic": _run_deterministic, "enumeration": _run_enumeration, "finite_horizon": _run_finite,
    "sup_walk": _run_sup, "stationary": _run_stationary, "example34": _run_example34,
    "bounded": _run_bounded, "separation": _run_separation, "diagnostics": _run_diagnostics,
}


def run_scenario(sc: Scenario, out_dir=None, seed: Optional[int] = None, workers: Optional[int] = None,
                 svg: bool = False, n_samples: Optional[int] = None) -> RunResult:
    """Run one scenario; write CSV/JSON (and SVG) into ``out_dir`` when given."""
    if seed is not None:
        sc.seed = seed
    if n_samples is not None:
        sc.n_samples = n_samples
    nw = workers if workers is not None else sc.workers
    sc.raw = {**sc.raw, "seed": sc.seed, "n_samples": sc.n_samples}
    rng = RngStream(sc.seed)
    t0 = time.perf_counter()
    try:
        verdicts, values, files, svgs = _RUNNERS[sc.mode](sc, rng, nw)
    except (ConfigurationError, ValueError, OverflowError, engine.TruncationCapHit) as exc:
        raise StageError(sc.mode, exc) from exc
    elapsed = time.perf_counter() - t0
    verdicts = {k: bool(v) for k, v in verdicts.items()}
    passed = all(verdicts.values())
    summary = _jsonable({
        "scenario": sc.name, "mode": sc.mode, "theorem": sc.theorem, "criterion": sc.criterion,
        "seed": sc.seed, "grid": sc.grid, "n_samples": sc.n_samples, "law": sc.law,
        "verdicts": verdicts, "passed": passed, "values": values, "version": __version__,
    })
    files = dict(files)
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if svg:
        for name, (fn, *args) in svgs.items():
            files[name] = fn(*args, title=sc.name)
    if out_dir is not None:
        out = Path(out_dir)
        for name, text in files.items():
            write_atomic(out / name, text)
        meta = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "elapsed_seconds": elapsed,
                "workers": nw, "python": platform.python_version(), "numpy": np.__version__,
                "config": sc.raw}
        write_atomic(out / "metadata.json", json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
        write_atomic(out / "scenario.yaml", yaml.safe_dump(sc.raw, sort_keys=False))
    return RunResult(sc, passed, verdicts, files, summary)
