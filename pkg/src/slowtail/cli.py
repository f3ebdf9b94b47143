"""Command line entry point: ``slowtail run|list|theory|diagnose|enumerate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import engine
from .asymptotics import prediction_rows
from .distributions import check_long_tailed, potter_check
from .scenarios import (SchemaError, StageError, _csv, _regime, build_law, build_system, list_scenarios,
                        load_scenario, run_scenario, write_atomic)


def _out(args, name: str) -> Path:
    return Path(args.out or f"out/{name}")


def cmd_run(args) -> int:
    sc = load_scenario(args.config)
    res = run_scenario(sc, _out(args, sc.name), seed=args.seed, workers=args.workers, svg=args.svg,
                       n_samples=args.n_samples)
    for k, v in res.verdicts.items():
        print(f"{'PASS' if v else 'FAIL'}  {k}")
    print(f"{sc.name}: {'passed' if res.passed else 'FAILED'} -> {_out(args, sc.name)}")
    return res.exit_code


def cmd_list(args) -> int:
    for s in list_scenarios():
        print(f"{s['name']:<22} {s['description']}")
        print(f"{'':<22} result: {s['theorem']}")
        print(f"{'':<22} checks: {s['criterion']}")
    return 0


def cmd_theory(args) -> int:
    sc = load_scenario(args.config)
    if sc.law is None or not sc.grid:
        raise SchemaError("theory needs a scenario with a law and a grid")
    rows = prediction_rows(build_law(sc.law), _regime(sc), sc.grid)
    text = _csv(["u", "prediction", "lower", "upper", "regime"], rows)
    if args.out:
        write_atomic(Path(args.out) / "theory.csv", text)
    sys.stdout.write(text)
    return 0


def cmd_diagnose(args) -> int:
    if args.config is None:
        args.config = "diagnostics"
        return cmd_run(args)
    sc = load_scenario(args.config)
    law = build_law(sc.law)
    grid = [1e2, 1e3, 1e4, 1e5, 1e6]
    lt = check_long_tailed(law.log_ab_tail, [1.0, 5.0], grid)
    xs = [10.0 * 2 ** k for k in range(14)]
    pot = potter_check(law.log_ab_tail, 2.0, 0.1, [(a, b) for a in xs for b in xs])
    report = {"law": law.name, "long_tailed": lt.verdict, "potter_threshold": pot.threshold}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        lt.to_csv(Path(args.out) / "long_tailed.csv")
    print(json.dumps(report, indent=2))
    return 0


def cmd_enumerate(args) -> int:
    sc = load_scenario(args.config)
    if sc.horizon is None:
        raise SchemaError("enumerate needs a scenario with a horizon")
    system = build_system(sc.system, build_law(sc.law))
    atoms = engine.enumerate_finite(system, float(sc.horizon.get("r0", 0.0)), sc.horizon["n"])
    text = _csv(["value", "probability"], atoms)
    if args.out:
        write_atomic(Path(args.out) / "enumeration.csv", text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slowtail", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, optional=False):
        if config:
            sp.add_argument("config", nargs="?" if optional else None,
                            help="scenario YAML file or built-in name")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--svg", action="store_true", help="also render SVG figures")
        sp.add_argument("--n-samples", type=int, default=None, help="override the sample count")

    common(sub.add_parser("run", help="run a scenario and write CSV/JSON outputs"))
    common(sub.add_parser("list", help="list built-in scenarios"), config=False)
    common(sub.add_parser("theory", help="evaluate predictions only"))
    common(sub.add_parser("diagnose", help="distribution-class checks"), optional=True)
    common(sub.add_parser("enumerate", help="exact law of R_n for a finite law"))
    return p


COMMANDS = {"run": cmd_run, "list": cmd_list, "theory": cmd_theory, "diagnose": cmd_diagnose,
            "enumerate": cmd_enumerate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (SchemaError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
