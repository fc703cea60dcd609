"""Pydantic models for theory specs, run configuration and CLI payloads."""

from .payloads import (
    BqpPayload,
    BqpRow,
    BranchLeafPayload,
    BranchStep,
    BranchesPayload,
    ClosurePayload,
    ComplexValue,
    DensityPayload,
    ErrorDetail,
    ErrorPayload,
    FSymbolEntry,
    GateEntry,
    GatesDump,
    ModelDump,
    ModelTable,
    ModelTableRow,
    RSymbolEntry,
    StateDump,
    StateTerm,
    SynthPayload,
    TracePayload,
    TraceRecord,
    VerifyReport,
    Violation,
    WalkPayload,
    complex_matrix,
    matrix_from_payload,
)
from .run_config import RunConfig
from .theory import Family, TheorySpec, label_to_spin, spin_to_label

__all__ = [
    "BqpPayload",
    "BqpRow",
    "BranchLeafPayload",
    "BranchStep",
    "BranchesPayload",
    "ClosurePayload",
    "ComplexValue",
    "DensityPayload",
    "ErrorDetail",
    "ErrorPayload",
    "FSymbolEntry",
    "GateEntry",
    "GatesDump",
    "ModelDump",
    "ModelTable",
    "ModelTableRow",
    "RSymbolEntry",
    "StateDump",
    "StateTerm",
    "SynthPayload",
    "TracePayload",
    "TraceRecord",
    "VerifyReport",
    "Violation",
    "WalkPayload",
    "complex_matrix",
    "matrix_from_payload",
    "RunConfig",
    "Family",
    "TheorySpec",
    "label_to_spin",
    "spin_to_label",
]
