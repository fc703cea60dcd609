"""Plain-text table views over CLI payloads."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from jinja2 import Environment, FileSystemLoader, TemplateError, TemplateNotFound

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"


def _ljust(value: Any, width: int) -> str:
    try:
        width = int(width)
    except (TypeError, ValueError):
        width = 0
    return str(value).ljust(max(width, 0))


def _num(value: Any, digits: int = 6) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    try:
        return f"{float(value):.{digits}g}"
    except (TypeError, ValueError):
        return str(value)


def _cplx(value: Mapping[str, float], digits: int = 6) -> str:
    re, im = float(value.get("re", 0.0)), float(value.get("im", 0.0))
    if abs(im) < 10 ** (-digits):
        return _num(re, digits)
    sign = "-" if im < 0 else "+"
    return f"{_num(re, digits)}{sign}{_num(abs(im), digits)}i"


class ReportRenderError(RuntimeError):
    """Raised when a table view cannot be rendered."""


@dataclass(slots=True)
class ReportSettings:
    template_dir: Path = TEMPLATE_DIR
    digits: int = 6


class ReportRenderer:
    """Render ``<view>.txt.j2`` with the JSON payload as ``p``."""

    def __init__(self, settings: Optional[ReportSettings] = None) -> None:
        self.settings = settings or ReportSettings()
        self._env = Environment(
            loader=FileSystemLoader(str(self.settings.template_dir)),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self._env.filters.setdefault("ljust", _ljust)
        digits = self.settings.digits
        self._env.filters.setdefault("num", lambda value, places=digits: _num(value, places))
        self._env.filters.setdefault("cplx", lambda value, places=digits: _cplx(value, places))

    def render(self, view: str, payload: Mapping[str, Any]) -> str:
        try:
            template = self._env.get_template(f"{view}.txt.j2")
        except TemplateNotFound:
            template = self._env.get_template("payload.txt.j2")
        try:
            return template.render(p=dict(payload), view=view)
        except TemplateError as exc:
            raise ReportRenderError(f"Failed to render '{view}' view: {exc}") from exc


_RENDERER: Dict[Path, ReportRenderer] = {}


def render_table(view: str, payload: Mapping[str, Any]) -> str:
    renderer = _RENDERER.setdefault(TEMPLATE_DIR, ReportRenderer())
    return renderer.render(view, payload)
