"""Helpers for reading and writing run artifacts."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence


def dumps_json(payload: Any) -> str:
    """Serialise a payload the same way every time (indent 2, trailing newline)."""

    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def write_text(path: Path, content: str) -> None:
    """Persist plain text to disk."""

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(content)


def dumps_csv(rows: Iterable[Dict[str, Any]], fieldnames: Optional[Sequence[str]] = None) -> str:
    """Render dictionaries as CSV text with a header row."""

    materialised: List[Dict[str, Any]] = list(rows)
    if fieldnames is None:
        seen: List[str] = []
        for row in materialised:
            for key in row:
                if key not in seen:
                    seen.append(key)
        fieldnames = seen
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in materialised:
        writer.writerow({key: row.get(key, "") for key in fieldnames})
    return buffer.getvalue()
