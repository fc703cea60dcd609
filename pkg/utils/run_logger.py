"""Structured JSON-lines run log."""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from utils.config import get_settings


class RunLogger:
    """Structured logger that appends one JSON object per event."""

    def __init__(self, path: Optional[Path], *, enabled: bool = True) -> None:
        self.path = path
        self.enabled = enabled and path is not None
        self._lock = threading.Lock()
        if self.enabled and self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    @classmethod
    def from_settings(cls) -> "RunLogger":
        settings = get_settings()
        return cls(settings.log_path, enabled=settings.log_enabled)

    @classmethod
    def disabled(cls) -> "RunLogger":
        return cls(None, enabled=False)

    def log(self, event: str, *, extra: Optional[Dict[str, Any]] = None) -> None:
        if not self.enabled or self.path is None:
            return
        timestamp = datetime.now(timezone.utc).isoformat()
        payload: Dict[str, Any] = {"event": event}
        if extra:
            payload.update(extra)
        line = json.dumps({"timestamp": timestamp, **payload}, ensure_ascii=False, default=str)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")


_NULL_LOGGER = RunLogger.disabled()


def null_logger() -> RunLogger:
    return _NULL_LOGGER
