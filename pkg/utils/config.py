"""Runtime settings loaded from the environment and optional YAML."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

try:  # Optional dependency loaded lazily to keep startup cheap.
    import yaml
except ImportError:  # pragma: no cover - fallback when PyYAML is absent.
    yaml = None


def _bool_env(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        return default


def _float_env(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None:
        return default
    try:
        return float(value)
    except ValueError:
        return default


def _coalesce_bool(value: Any, default: bool) -> bool:
    if value is None:
        return default
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        return value.strip().lower() in {"1", "true", "yes", "on"}
    return bool(value)


def _coalesce_int(value: Any, default: int) -> int:
    if value is None:
        return default
    try:
        return int(value)
    except (TypeError, ValueError):
        return default


def _coalesce_float(value: Any, default: float) -> float:
    if value is None:
        return default
    try:
        return float(value)
    except (TypeError, ValueError):
        return default


@dataclass
class AnyonkitSettings:
    """Environment-driven runtime settings shared by the services and CLI."""

    tol: float = 1e-9
    max_attempts: int = 64
    eager_fill_level: int = 6
    closure_tol: float = 1e-8
    closure_cap: int = 10_000
    branch_floor: float = 1e-9
    log_enabled: bool = True
    log_path: Path = Path("logs/anyonkit.log")
    threads: int = 1

    @classmethod
    def load(cls) -> "AnyonkitSettings":
        settings = cls(
            tol=_float_env("ANYONKIT_TOL", 1e-9),
            max_attempts=max(_int_env("ANYONKIT_MAX_ATTEMPTS", 64), 1),
            eager_fill_level=max(_int_env("ANYONKIT_EAGER_LEVEL", 6), 0),
            closure_tol=_float_env("ANYONKIT_CLOSURE_TOL", 1e-8),
            closure_cap=max(_int_env("ANYONKIT_CLOSURE_CAP", 10_000), 1),
            branch_floor=max(_float_env("ANYONKIT_BRANCH_FLOOR", 1e-9), 0.0),
            log_enabled=_bool_env("ANYONKIT_LOG", True),
            log_path=Path(os.getenv("ANYONKIT_LOG_PATH", "logs/anyonkit.log")).expanduser(),
            threads=max(_int_env("ANYONKIT_THREADS", 1), 1),
        )
        section = _load_yaml_section("anyonkit")
        if section:
            settings.apply_overrides(section)
        return settings

    def apply_overrides(self, section: Dict[str, Any]) -> None:
        # keys present in the YAML section replace values read from the environment
        self.tol = _coalesce_float(section.get("tol"), self.tol)
        self.max_attempts = max(
            _coalesce_int(section.get("max_attempts"), self.max_attempts), 1
        )
        self.eager_fill_level = max(
            _coalesce_int(section.get("eager_fill_level"), self.eager_fill_level), 0
        )
        self.closure_tol = _coalesce_float(section.get("closure_tol"), self.closure_tol)
        self.closure_cap = max(_coalesce_int(section.get("closure_cap"), self.closure_cap), 1)
        self.branch_floor = max(_coalesce_float(section.get("branch_floor"), self.branch_floor), 0.0)
        self.log_enabled = _coalesce_bool(section.get("log_enabled"), self.log_enabled)
        log_path = section.get("log_path")
        if isinstance(log_path, str) and log_path.strip():
            self.log_path = Path(log_path).expanduser()
        self.threads = max(_coalesce_int(section.get("threads"), self.threads), 1)


def _load_yaml_section(name: str) -> Optional[Dict[str, Any]]:
    """Return the first mapping found under ``name`` in the known YAML files."""

    yaml_paths: List[Path] = []
    explicit_path = os.getenv("ANYONKIT_CONFIG")
    if explicit_path:
        yaml_paths.append(Path(explicit_path).expanduser())
    yaml_paths.append(Path("config/anyonkit.yaml"))
    yaml_paths.append(Path("config.yaml"))

    for candidate in yaml_paths:
        if not candidate.exists():
            continue
        if yaml is None:
            break
        try:
            with candidate.open("r", encoding="utf-8") as handle:
                payload = yaml.safe_load(handle) or {}
        except Exception:  # pragma: no cover - malformed YAML edge cases
            continue

        section = payload.get(name) if isinstance(payload, dict) else None
        if isinstance(section, dict):
            return section
    return None


_SETTINGS: Optional[AnyonkitSettings] = None


def get_settings(*, reload: bool = False) -> AnyonkitSettings:
    """Return process-wide settings, loading them on first use."""

    global _SETTINGS
    if _SETTINGS is None or reload:
        _SETTINGS = AnyonkitSettings.load()
    return _SETTINGS
