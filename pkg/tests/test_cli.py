from __future__ import annotations

import json

import pandas as pd
import pytest

from scripts.arena_cli import EXIT_ERROR, main

FIXTURE_ARGS = ["--users", "40", "--bot-frac", "0.25", "--seed", "5"]


def _csv_bytes(run):
    return {p.relative_to(run).as_posix(): p.read_bytes() for p in sorted(run.rglob("*.csv"))}


def test_fixture_twice_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["fixture", *FIXTURE_ARGS, "--out", str(tmp_path / name)]) == 0
    a, b = _csv_bytes(tmp_path / "a"), _csv_bytes(tmp_path / "b")
    assert a and a == b


def test_manifest_records_subcommand_and_seed(tmp_path):
    assert main(["fixture", *FIXTURE_ARGS, "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "fixture"
    assert manifest["seed"] == 5
    assert manifest["config"]["corpus"]["users"] == 40


def test_spread_twice_is_byte_identical(tmp_path):
    args = ["simulate-spread", "--seed", "2", "--steps", "4", "--keywords", "vaccine", "--seed-count", "5"]
    for name in ("a", "b"):
        assert main([*args, "--out", str(tmp_path / name)]) == 0
    a, b = _csv_bytes(tmp_path / "a"), _csv_bytes(tmp_path / "b")
    assert "spread.csv" in a
    assert a == b


def test_theory_check_reports_and_writes_trajectory(tmp_path, capsys):
    code = main(["theory-check", "--seed", "1", "--outer-steps", "20", "--inner-steps", "5", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "steps=20" in out
    assert "aborted=False" in out
    lines = (tmp_path / "theory.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0].startswith("step,avg_tv")
    assert len(lines) == 21


def test_metrics_of_a_prediction_file(tmp_path, capsys):
    preds = tmp_path / "preds.csv"
    preds.write_text("prob,label\n0.9,human\n0.8,human\n0.7,bot\n0.2,human\n0.1,bot\n", encoding="utf-8")
    assert main(["metrics", "--predictions", str(preds), "--out", str(tmp_path / "m")]) == 0
    assert "accuracy=0.6000" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv, kind",
    [
        (["run-arena", "--rounds", "0"], "ConfigError"),
        (["fixture", "--bot-frac", "1.5"], "ConfigError"),
        (["ingest"], "ConfigError"),
        (["simulate-spread", "--keywords", "vaccine", "--users", "4", "--seed-count", "9", "--steps", "2"], "ValueError"),
    ],
)
def test_errors_exit_two_with_one_line_per_issue(tmp_path, capsys, argv, kind):
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert f"error={kind} detail=" in err


def test_config_file_flag(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 4\n[corpus]\nusers = 30\n", encoding="utf-8")
    assert main(["fixture", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 4


def test_opinion_model_comparison_against_a_trace(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 1\n[corpus]\nusers = 30\n", encoding="utf-8")
    base = ["simulate-opinion", "--config", str(cfg), "--steps", "5", "--seeds", "0,1"]
    assert main([*base, "--out", str(tmp_path / "real")]) == 0
    trace = tmp_path / "real" / "trace_seed0.csv"
    argv = [*base, "--real-trace", str(trace), "--compare-model", "lorenz", "--out", str(tmp_path / "cmp")]
    assert main(argv) == 0
    lines = (tmp_path / "cmp" / "model_comparison.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "metric,model_a,model_b,statistic,p_value,exact"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["delta_bias", "delta_div"]


def test_opinion_metrics_against_a_hand_written_trace(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 1\n[corpus]\nusers = 30\n", encoding="utf-8")
    base = ["simulate-opinion", "--config", str(cfg), "--steps", "3", "--seeds", "0"]
    assert main([*base, "--out", str(tmp_path / "sim")]) == 0
    sim_trace = pd.read_csv(tmp_path / "sim" / "trace_seed0.csv")
    assert sorted(sim_trace["step"].unique()) == [0, 1, 2]

    # everyone neutral at every step: ΔBias is |mean| and ΔDiv is the std
    users = sorted(sim_trace["user"].astype(str).unique())
    lines = ["step,user,opinion"] + [f"{t},{u},0.0" for t in range(3) for u in users]
    real = tmp_path / "real.csv"
    real.write_text("\n".join(lines) + "\n", encoding="utf-8")

    assert main([*base, "--real-trace", str(real), "--out", str(tmp_path / "cmp")]) == 0
    row = pd.read_csv(tmp_path / "cmp" / "opinion_metrics.csv").iloc[0]
    assert row["delta_div"] == pytest.approx(row["std"], abs=1e-9)
    assert row["delta_bias"] >= abs(row["mean"]) - 1e-9
