"""Structured validation helpers built on Pydantic models."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Type

from pydantic import BaseModel, ValidationError

from models import (
    BqpPayload,
    BranchesPayload,
    ClosurePayload,
    DensityPayload,
    ErrorPayload,
    GatesDump,
    ModelDump,
    ModelTable,
    StateDump,
    SynthPayload,
    TracePayload,
    VerifyReport,
    WalkPayload,
)

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"

PAYLOAD_MODELS: Dict[str, Type[BaseModel]] = {
    "model-dump": ModelDump,
    "model-table": ModelTable,
    "model-verify": VerifyReport,
    "state": StateDump,
    "gates": GatesDump,
    "protocol-trace": TracePayload,
    "protocol-branches": BranchesPayload,
    "closure": ClosurePayload,
    "walk": WalkPayload,
    "bqp": BqpPayload,
    "density": DensityPayload,
    "synth": SynthPayload,
    "error": ErrorPayload,
}


class PayloadValidationError(ValueError):
    """Raised when a payload does not match its published schema."""

    def __init__(self, kind: str, messages: List[str]) -> None:
        super().__init__(f"{kind} payload is invalid: {'; '.join(messages)}")
        self.kind = kind
        self.messages = messages


def _model(kind: str) -> Type[BaseModel]:
    try:
        return PAYLOAD_MODELS[kind]
    except KeyError as exc:
        raise PayloadValidationError(kind, [f"unknown payload kind; choose from {sorted(PAYLOAD_MODELS)}"]) from exc


def validate_payload(kind: str, payload: Any) -> BaseModel:
    """Return the validated model for ``payload`` or raise ``PayloadValidationError``."""

    try:
        return _model(kind).model_validate(payload)
    except ValidationError as exc:
        raise PayloadValidationError(kind, format_validation_errors(exc)) from exc


def format_validation_errors(error: ValidationError) -> List[str]:
    """Convert a Pydantic ValidationError into concise bullet strings."""

    messages: List[str] = []
    for issue in error.errors():
        location = ".".join(str(part) for part in issue["loc"])
        if location:
            messages.append(f"{location}: {issue['msg']}")
        else:
            messages.append(issue["msg"])
    return messages


def schema_for(kind: str) -> Dict[str, Any]:
    return _model(kind).model_json_schema(by_alias=True)


def schema_path(kind: str, directory: Path = SCHEMA_DIR) -> Path:
    return directory / f"{kind}.schema.json"


def write_schemas(directory: Path = SCHEMA_DIR) -> List[Path]:
    """Regenerate every published schema file from its payload model."""

    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in PAYLOAD_MODELS:
        target = schema_path(kind, directory)
        target.write_text(json.dumps(schema_for(kind), indent=2) + "\n", encoding="utf-8")
        written.append(target)
    return written


def load_published_schema(kind: str, directory: Path = SCHEMA_DIR) -> Dict[str, Any]:
    with schema_path(kind, directory).open("r", encoding="utf-8") as handle:
        return json.load(handle)
