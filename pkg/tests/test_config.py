from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from utils.config import get_settings
from utils.rng import shot_stream
from utils.run_logger import RunLogger


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("ANYONKIT_TOL", "1e-7")
    monkeypatch.setenv("ANYONKIT_THREADS", "0")
    monkeypatch.setenv("ANYONKIT_CLOSURE_CAP", "not-a-number")
    monkeypatch.setenv("ANYONKIT_BRANCH_FLOOR", "1e-6")
    settings = get_settings(reload=True)
    assert settings.tol == 1e-7
    assert settings.threads == 1
    assert settings.closure_cap == 10_000
    assert settings.branch_floor == 1e-6
    assert settings.log_enabled is False


def test_yaml_section_wins_over_environment(monkeypatch, tmp_path):
    config = tmp_path / "anyonkit.yaml"
    config.write_text(
        "anyonkit:\n  max_attempts: 5\n  log_enabled: yes\n  log_path: custom/run.log\n",
        encoding="utf-8",
    )
    monkeypatch.setenv("ANYONKIT_CONFIG", str(config))
    monkeypatch.setenv("ANYONKIT_MAX_ATTEMPTS", "9")
    settings = get_settings(reload=True)
    assert settings.max_attempts == 5
    assert settings.log_enabled is True
    assert settings.log_path == Path("custom/run.log")


def test_default_yaml_location(tmp_path):
    (tmp_path / "config").mkdir()
    (tmp_path / "config" / "anyonkit.yaml").write_text("anyonkit:\n  eager_fill_level: 2\n", encoding="utf-8")
    assert get_settings(reload=True).eager_fill_level == 2


def test_run_logger_appends_json_lines(tmp_path):
    path = tmp_path / "logs" / "events.log"
    logger = RunLogger(path)
    logger.log("first")
    logger.log("second", extra={"shots": 3})
    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert [line["event"] for line in lines] == ["first", "second"]
    assert lines[1]["shots"] == 3
    assert "timestamp" in lines[0]


def test_disabled_logger_writes_nothing(tmp_path):
    path = tmp_path / "events.log"
    RunLogger(path, enabled=False).log("ignored")
    RunLogger.disabled().log("ignored")
    assert not path.exists()


def test_logger_from_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("ANYONKIT_LOG", "1")
    get_settings(reload=True)
    RunLogger.from_settings().log("hello")
    assert (tmp_path / "run.log").exists()


def test_shot_streams_are_independent_of_shot_count():
    first = shot_stream(42, 3).random(4)
    again = shot_stream(42, 3).random(4)
    other = shot_stream(42, 4).random(4)
    purpose = shot_stream(42, 3, purpose=1).random(4)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert not np.array_equal(first, purpose)
