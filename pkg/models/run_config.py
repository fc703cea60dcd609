"""Validated command-line run configuration."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

OutputFormat = Literal["json", "csv", "table"]


class RunConfig(BaseModel):
    """Subcommand plus the flags that determine its payload."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: str = Field(min_length=1)
    action: Optional[str] = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    shots: int = Field(default=1, ge=1)
    tol: Optional[float] = Field(default=None, gt=0)
    max_attempts: Optional[int] = Field(default=None, ge=1)
    threads: int = Field(default=1, ge=1)
    format: OutputFormat = "json"
    output: Optional[Path] = None
    options: Dict[str, str] = Field(default_factory=dict)

    @field_validator("command", "action")
    @classmethod
    def _strip(cls, value: Optional[str]) -> Optional[str]:
        return value.strip() if isinstance(value, str) else value

    def option(self, name: str, default: Optional[str] = None) -> Optional[str]:
        return self.options.get(name, default)
