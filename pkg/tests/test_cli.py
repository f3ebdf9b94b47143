import json

import pytest

from slowtail import cli
from slowtail.scenarios import (BUILTINS, SchemaError, builtin_text, list_scenarios, load_scenario,
                                parse_scenario, run_scenario)


def test_catalog():
    names = {s["name"] for s in list_scenarios()}
    assert {"thm31-positive-bd", "thm33-finite-horizon", "thm25-sup-walk", "example-3-4",
            "bounded-example", "deterministic-smoke"} <= names
    for s in list_scenarios():
        assert s["theorem"] and s["criterion"] and s["description"]


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_parse(name):
    sc = parse_scenario(builtin_text(name))
    assert sc.name == name


@pytest.mark.parametrize("text,line,field", [
    ("schema_version: 2\nname: x\nmode: stationary\n", 1, "schema_version"),
    ("schema_version: 1\nname: x\nmode: nonsense\n", 3, "mode"),
    ("schema_version: 1\nname: x\nmode: stationary\nlaw:\n  family: pareto_log\n  alpha: 2\n  shfit: 4\n",
     7, "law.shfit"),
    ("schema_version: 1\nname: x\nmode: stationary\nlaw: {family: pareto_log, alpha: 2, shift: 4}\n"
     "grid: [3, 2]\nn_samples: 10\n", 5, "grid"),
    ("schema_version: 1\nname: x\nmode: deterministic\nlaw: {family: deterministic, a: 0.5, b: 1}\n"
     "seed: -1\n", 5, "seed"),
    ("schema_version: 1\nname: x\nmode: stationary\nlaw: {family: pareto_log, alpha: 2, shift: 4}\n"
     "grid: [1]\nn_samples: 5\nregime: {kind: Wrong}\n", 7, "regime.kind"),
])
def test_schema_errors(text, line, field):
    with pytest.raises(SchemaError) as exc:
        parse_scenario(text)
    assert exc.value.line == line and exc.value.path == field
    assert f"line {line}" in str(exc.value) and field in str(exc.value)


def test_bad_yaml():
    with pytest.raises(SchemaError, match=r"line 3: .*not valid YAML"):
        parse_scenario("a: 1\nb: [\n")


def test_deterministic_smoke(tmp_path, capsys):
    code = cli.main(["run", "deterministic-smoke", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["values"]["value"] == pytest.approx(2.0, abs=1e-12)
    assert summary["seed"] == load_scenario("deterministic-smoke").seed
    assert "PASS" in capsys.readouterr().out


def test_bounded_small(tmp_path):
    res = run_scenario(load_scenario("bounded-example"), tmp_path, n_samples=20_000, svg=True)
    assert res.passed and res.summary["values"]["max"] <= 1 + 1e-9
    assert (tmp_path / "tail_curve.svg").read_text().lstrip().startswith("<?xml")


def _files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "metadata.json"}


def test_byte_identical_reruns(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["run", "thm31-positive-bd", "--n-samples", "3000", "--out", str(tmp_path / d),
                         "--svg", "--seed", "7"]) in (0, 2)
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a.keys() == b.keys() and "tail_curve.svg" in a
    assert a == b
    assert (tmp_path / "a" / "metadata.json").exists()


def test_workers_do_not_change_counts(tmp_path):
    args = ["run", "thm25-sup-walk", "--n-samples", "140000", "--seed", "3"]
    cli.main(args + ["--out", str(tmp_path / "w1"), "--workers", "1"])
    cli.main(args + ["--out", str(tmp_path / "w8"), "--workers", "8"])
    assert (tmp_path / "w1" / "tail_curve.csv").read_bytes() == (tmp_path / "w8" / "tail_curve.csv").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema_version: 1\nname: x\nmode: stationary\nlaw: {family: nope}\n")
    assert cli.main(["run", str(bad)]) == 1
    assert "line 4" in capsys.readouterr().err
    # a verdict failure: sandwich margins that cannot hold
    cfg = tmp_path / "tight.yaml"
    cfg.write_text(builtin_text("thm31-positive-bd").replace("- 0.5\n  - 1.5", "- 0.0001\n  - 0.0001"))
    assert cli.main(["run", str(cfg), "--n-samples", "2000", "--out", str(tmp_path / "t")]) == 2


def test_stage_error_names_stage(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("schema_version: 1\nname: x\nmode: finite_horizon\nlaw: {family: pareto_log, alpha: 2, shift: 4}\n"
                   "grid: [10]\nn_samples: 100\nhorizon: {n: 2}\nregime: {kind: GeneralBounds}\n"
                   "checks: {at: 11}\n")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "stage 'finite_horizon'" in capsys.readouterr().err


def test_other_subcommands(tmp_path, capsys):
    assert cli.main(["list"]) == 0
    assert "thm33-finite-horizon" in capsys.readouterr().out
    assert cli.main(["theory", "thm31-positive-bd", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "theory.csv").read_text().splitlines()[0] == "u,prediction,lower,upper,regime"
    assert cli.main(["enumerate", "enumeration-oracle", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "enumeration.csv").read_text().splitlines()
    assert len(rows) == 1 + 1024
    capsys.readouterr()
    assert cli.main(["diagnose", "thm31-positive-bd"]) == 0
    assert json.loads(capsys.readouterr().out)["long_tailed"] == "consistent with L"
