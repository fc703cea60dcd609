from __future__ import annotations

import numpy as np
import pytest

from models import TheorySpec
from services.anyon_model import build_model
from utils.config import get_settings


@pytest.fixture(autouse=True)
def _quiet_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("ANYONKIT_LOG", "0")
    monkeypatch.setenv("ANYONKIT_LOG_PATH", str(tmp_path / "run.log"))
    monkeypatch.setenv("ANYONKIT_CONFIG", str(tmp_path / "missing.yaml"))
    monkeypatch.chdir(tmp_path)
    get_settings(reload=True)
    yield
    get_settings(reload=True)


@pytest.fixture
def jk4():
    return build_model(TheorySpec.jk(4))


@pytest.fixture
def su2_4():
    return build_model(TheorySpec.su2(4))


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
