import csv
import json
import math
from pathlib import Path

import pytest

from wmlimits.cli import (
    EXIT_AUDIT,
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_OK,
    evaluate_scheme_file,
    run,
)

GOLDEN = Path(__file__).parent / "golden"
RATE_LIMIT_FLIP_01 = 0.325082973391448


def write_config(directory: Path, **fields) -> Path:
    path = directory / "config.json"
    path.write_text(json.dumps(fields))
    return path


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def sweep(panel: str, out: Path) -> Path:
    config = GOLDEN / ("sweep_e_config.json" if panel == "e" else "sweep_config.json")
    assert run(["sweep", "--config", str(config), "--out", str(out), "--panel", panel]) == EXIT_OK
    return out


@pytest.mark.parametrize("panel", ["a", "b", "c", "d", "e", "f"])
def test_sweep_matches_golden_tables(panel, tmp_path, capsys):
    out = sweep(panel, tmp_path / panel)
    expected = sorted((GOLDEN / f"panel_{panel}").glob("*.csv"))
    produced = sorted(out.glob("*.csv"))
    assert [p.name for p in produced] == [p.name for p in expected]
    for mine, golden in zip(produced, expected):
        assert mine.read_bytes() == golden.read_bytes(), mine.name


def test_panel_a_monotone_in_rate_and_ordered_in_alpha(tmp_path, capsys):
    out = sweep("a", tmp_path)
    low = [float(r["beta_bar"]) for r in read_rows(out / "panel_a__alpha_0.2.csv")]
    high = [float(r["beta_bar"]) for r in read_rows(out / "panel_a__alpha_0.4.csv")]
    assert all(b >= a for a, b in zip(low, low[1:]))
    assert all(h <= l for h, l in zip(high, low))


def test_panel_f_nonincreasing_in_budget(tmp_path, capsys):
    out = sweep("f", tmp_path)
    for path in out.glob("panel_f__*.csv"):
        values = [float(r["beta_bar"]) for r in read_rows(path)]
        assert all(b <= a for a, b in zip(values, values[1:])), path.name


def test_panel_e_carries_rate_limit(tmp_path, capsys):
    out = sweep("e", tmp_path)
    rows = read_rows(out / "panel_e__alpha_0.2.csv")
    assert [int(r["T"]) for r in rows] == [2, 3, 4, 5, 6]
    for row in rows:
        assert math.isclose(float(row["bound_value"]), RATE_LIMIT_FLIP_01, rel_tol=1e-12)
        assert float(row["rate_or_beta"]) > 0


def test_sweep_json_format(tmp_path, capsys):
    config = GOLDEN / "sweep_config.json"
    code = run(["sweep", "--config", str(config), "--out", str(tmp_path), "--panel", "a",
                "--format", "json"])
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "panel_a__alpha_0.2.json").read_text())
    assert payload["columns"][:2] == ["R", "beta_bar"]
    assert payload["x"] == "R"


def test_bound_on_uniform_four(tmp_path, capsys):
    config = write_config(tmp_path, pmf=[0.25] * 4, alpha=0.2, m=2)
    assert run(["bound", "--config", str(config), "--out", str(tmp_path)]) == EXIT_OK
    result = json.loads((tmp_path / "bound.json").read_text())
    assert math.isclose(result["value"], 0.6, abs_tol=1e-12)
    assert (tmp_path / "optimizer.csv").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"bound.json", "optimizer.csv"}


def test_deterministic_scheme_example_and_reload(tmp_path, capsys):
    config = write_config(tmp_path, pmf=[0.5, 0.17, 0.17, 0.16], alpha=0.4, m=2,
                          scheme="deterministic")
    assert run(["scheme", "--config", str(config), "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "evaluation.json").read_text())
    assert math.isclose(summary["avg_beta"], 0.43, abs_tol=1e-12)
    assert math.isclose(summary["residual"], 0.13, abs_tol=1e-12)
    assert evaluate_scheme_file(tmp_path / "scheme.json") == summary


@pytest.mark.parametrize("kind", ["randomized", "typical"])
def test_scheme_file_round_trip(kind, tmp_path, capsys):
    fields = {"alpha": 0.2, "m": 2, "scheme": kind, "T": [4]}
    config = write_config(tmp_path, **fields)
    assert run(["scheme", "--config", str(config), "--out", str(tmp_path)]) == EXIT_OK
    reloaded = evaluate_scheme_file(tmp_path / "scheme.json")
    summary = json.loads((tmp_path / "evaluation.json").read_text())
    assert reloaded["beta"] == summary["beta"]
    assert reloaded["fa"] == summary["fa"]


def test_all_heavy_schemes_agree(tmp_path, capsys):
    results = {}
    for kind in ("randomized", "deterministic"):
        out = tmp_path / kind
        config = write_config(tmp_path, pmf=[0.25] * 4, alpha=0.25, m=4, scheme=kind)
        assert run(["scheme", "--config", str(config), "--out", str(out)]) == EXIT_OK
        results[kind] = json.loads((out / "evaluation.json").read_text())
    assert results["randomized"]["avg_beta"] == pytest.approx(
        results["deterministic"]["avg_beta"], abs=1e-12
    )
    assert results["deterministic"]["residual"] == 0.0


def test_simulate_rerun_is_byte_identical(tmp_path, capsys):
    config = write_config(tmp_path, pmf=[0.4, 0.3, 0.2, 0.1], alpha=0.3, m=2,
                          trials=20000, seed=7)
    first, second = tmp_path / "one", tmp_path / "two"
    assert run(["simulate", "--config", str(config), "--out", str(first)]) == EXIT_OK
    assert run(["simulate", "--config", str(config), "--out", str(second)]) == EXIT_OK
    for name in ("simulation.json", "manifest.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    payload = json.loads((first / "simulation.json").read_text())
    assert payload["audit_failures"] == []
    assert payload["secrecy"]["passed"]


def test_seed_flag_overrides_config(tmp_path, capsys):
    config = write_config(tmp_path, pmf=[0.4, 0.3, 0.2, 0.1], alpha=0.3, m=2,
                          trials=2000, seed=7)
    a, b = tmp_path / "a", tmp_path / "b"
    run(["simulate", "--config", str(config), "--out", str(a)])
    run(["simulate", "--config", str(config), "--out", str(b), "--seed", "8"])
    assert (a / "simulation.json").read_bytes() != (b / "simulation.json").read_bytes()


def test_missing_alpha_is_config_error(tmp_path, capsys):
    config = write_config(tmp_path, pmf=[0.5, 0.5], m=1)
    assert run(["bound", "--config", str(config), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config.alpha: required field is missing" in capsys.readouterr().err


@pytest.mark.parametrize(
    "fields, fragment",
    [
        ({"pmf": [0.5, 0.5], "alpha": 0.2, "m": 1, "d": -0.1}, "config.d[0]"),
        ({"pmf": [0.5, 0.5], "alpha": 1.5, "m": 1}, "config.alpha[0]"),
        ({"pmf": [0.5, 0.5], "alpha": 0.2}, "config.m"),
        ({"pmf": [0.5, 0.5], "alpha": 0.2, "m": 1, "rate": 0.1}, "config.m"),
        ({"pmf": [0.5, 0.5], "alpha": 0.2, "m": 1, "scheme": "magic"}, "config.scheme"),
        ({"pmf": [0.5, 0.5], "alpha": [0.2, 0.3], "m": 1}, "single value"),
    ],
)
def test_invalid_configs_exit_with_config_code(fields, fragment, tmp_path, capsys):
    config = write_config(tmp_path, **fields)
    assert run(["scheme", "--config", str(config), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert fragment in capsys.readouterr().err


def test_unreadable_config_exit_code(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert run(["bound", "--config", str(missing), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_too_many_messages_is_infeasible(tmp_path, capsys):
    config = write_config(tmp_path, pmf=[0.25] * 4, alpha=0.2, m=9)
    assert run(["scheme", "--config", str(config), "--out", str(tmp_path)]) == EXIT_INFEASIBLE
    assert "exceeds m*" in capsys.readouterr().err


def test_deterministic_beyond_message_limit_is_infeasible(tmp_path, capsys):
    config = write_config(tmp_path, pmf=[0.95, 0.03, 0.02], alpha=0.2, m=2,
                          scheme="deterministic")
    code = run(["scheme", "--config", str(config), "--out", str(tmp_path)])
    assert code == EXIT_INFEASIBLE
    assert "m* = 1" in capsys.readouterr().err


def test_monte_carlo_mismatch_exits_with_audit_code(tmp_path, capsys):
    # a single trial gives a zero-width normal interval that cannot cover beta = 0.41
    config = write_config(tmp_path, alpha=0.2, m=1, T=[3], trials=1, seed=3)
    assert run(["simulate", "--config", str(config), "--out", str(tmp_path)]) == EXIT_AUDIT
    assert "audit failed" in capsys.readouterr().err
