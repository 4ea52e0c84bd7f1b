from __future__ import annotations

from pathlib import Path

import pytest

from config.constants import WEIGHT_EXP
from config.run_config import load_run_config, run_config_issues, validate_run_config
from domain.errors import ConfigError

DESK = Path(__file__).resolve().parents[1] / "configs" / "desk.toml"


def test_defaults_are_valid():
    cfg = validate_run_config(load_run_config())
    assert cfg.seed == 0
    assert cfg.arena.rounds >= 1


def test_desk_config_loads():
    cfg = validate_run_config(load_run_config(str(DESK)), check_paths=False)
    assert cfg.seed == 7
    assert cfg.corpus.users == 300
    assert cfg.simulation.keywords == ["vaccine", "lockdown"]
    assert cfg.endpoint_config().max_concurrency == 4


def test_flags_override_file_values():
    cfg = load_run_config(str(DESK), {"seed": 3, "arena.rounds": 5, "arena.strategy": WEIGHT_EXP, "output.dir": "x"})
    assert (cfg.seed, cfg.arena.rounds, cfg.arena.strategy, cfg.output.dir) == (3, 5, WEIGHT_EXP, "x")


def test_none_overrides_are_ignored():
    cfg = load_run_config(str(DESK), {"seed": None})
    assert cfg.seed == 7


def test_comma_lists_from_flags():
    cfg = load_run_config(None, {"simulation.seeds": "4, 5", "features.strip_markers": "emoji,hashtag"})
    assert cfg.simulation.seeds == [4, 5]
    assert cfg.features.strip_markers == ["emoji", "hashtag"]


def test_unknown_keys_and_bad_types_reported_together(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('seed = "abc"\n[arena]\nroundz = 2\n[nope]\nx = 1\n', encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        load_run_config(str(path))
    issues = err.value.issues
    assert len(issues) == 3
    assert any("arena.roundz" in i for i in issues)
    assert any("'nope'" in i for i in issues)


def test_fractional_integer_is_rejected():
    with pytest.raises(ConfigError):
        load_run_config(None, {"arena.rounds": 1.5})


def test_missing_file():
    with pytest.raises(ConfigError):
        load_run_config("/no/such/run.toml")


def test_semantic_issues_are_all_listed():
    cfg = load_run_config(None, {"arena.rounds": 0, "arena.candidates": 1, "threads": 0, "simulation.model": "voter"})
    issues = run_config_issues(cfg)
    assert len(issues) == 4
    assert any(i.startswith("arena.rounds") for i in issues)
    with pytest.raises(ConfigError):
        validate_run_config(cfg)


def test_endpoint_backend_needs_endpoint_settings():
    cfg = load_run_config(None, {"generator.backend": "endpoint"})
    assert any(i.startswith("endpoint") for i in run_config_issues(cfg))


def test_unknown_strip_marker():
    cfg = load_run_config(None, {"features.strip_markers": "emoji,url"})
    assert any("strip_markers" in i for i in run_config_issues(cfg))


def test_endpoint_concurrency_capped_by_threads():
    cfg = load_run_config(None, {"threads": 2, "endpoint.max_concurrency": 8})
    assert cfg.endpoint_config().max_concurrency == 2


def test_louvain_resolution_must_be_positive():
    cfg = load_run_config(None, {"corpus.resolution": 0})
    assert run_config_issues(cfg) == ["corpus.resolution must be > 0, got 0.0"]
