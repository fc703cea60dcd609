"""JSON payloads emitted by the CLI, enforced via Pydantic."""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic.alias_generators import to_camel

from .theory import TheorySpec


class _Payload(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, alias_generator=to_camel)

    def to_json_dict(self) -> Dict[str, object]:
        return self.model_dump(mode="json", by_alias=True)


class ComplexValue(_Payload):
    re: float
    im: float

    @classmethod
    def of(cls, value: complex, *, digits: int = 15) -> "ComplexValue":
        value = complex(value)
        # drops sub-1e-15 noise and negative zero
        return cls(re=_clean(value.real, digits), im=_clean(value.imag, digits))

    def as_complex(self) -> complex:
        return complex(self.re, self.im)


def _clean(value: float, digits: int) -> float:
    rounded = round(float(value), digits)
    return 0.0 if rounded == 0 else rounded


ComplexMatrix = List[List[ComplexValue]]


def complex_matrix(matrix: np.ndarray) -> ComplexMatrix:
    return [[ComplexValue.of(entry) for entry in row] for row in np.atleast_2d(matrix)]


def matrix_from_payload(rows: Sequence[Sequence[ComplexValue]]) -> np.ndarray:
    return np.array([[entry.as_complex() for entry in row] for row in rows], dtype=complex)


class FSymbolEntry(_Payload):
    idx: List[int] = Field(min_length=6, max_length=6)
    re: float
    im: float


class RSymbolEntry(_Payload):
    idx: List[int] = Field(min_length=3, max_length=3)
    re: float
    im: float


class ModelDump(_Payload):
    """Complete algebraic data of one theory."""

    spec: TheorySpec
    charges: List[int]
    fusion: List[List[int]]
    f_symbols: List[FSymbolEntry]
    r_symbols: List[RSymbolEntry]
    qdims: List[float]
    total_dim: float = Field(gt=0)
    twists: List[ComplexValue]
    s_matrix: ComplexMatrix
    frob_schur: List[int]

    @field_validator("frob_schur")
    @classmethod
    def _signs_only(cls, value: List[int]) -> List[int]:
        if any(item not in (-1, 1) for item in value):
            raise ValueError("Frobenius-Schur indicators must be +1 or -1")
        return value


class ModelTableRow(_Payload):
    charge: int
    spin: str
    qdim: float
    twist: ComplexValue
    frob_schur: int


class ModelTable(_Payload):
    theory: str
    total_dim: float
    rows: List[ModelTableRow]
    s_matrix: ComplexMatrix


class StateTerm(_Payload):
    internals: List[int]
    re: float
    im: float


class StateDump(_Payload):
    """Chain-basis state: externals, total charge and its nonzero terms."""

    externals: List[int]
    total: int
    terms: List[StateTerm]


class Violation(_Payload):
    name: str
    residual: float
    indices: List[List[int]] = Field(default_factory=list)


class VerifyReport(_Payload):
    theory: str
    tol: float
    passed: bool
    residuals: Dict[str, float]
    violations: List[Violation] = Field(default_factory=list)
    semion_gluing: Optional[bool] = None


class GateEntry(_Payload):
    name: str
    exact: ComplexMatrix
    canonical: ComplexMatrix
    unitary: bool


class GatesDump(_Payload):
    theory: str
    encoding: str
    gates: List[GateEntry]


class TraceRecord(_Payload):
    shot: int = Field(ge=0)
    step: str
    outcome: int
    prob: float = Field(gt=0, le=1.0 + 1e-9)


class TracePayload(_Payload):
    """Seeded stochastic run of one protocol."""

    protocol: str
    seed: int
    shots: int = Field(ge=1)
    params: Dict[str, float] = Field(default_factory=dict)
    records: List[TraceRecord]
    aggregate: Dict[str, float]
    successes: int = Field(ge=0)


class BranchStep(_Payload):
    step: str
    outcome: int


class BranchLeafPayload(_Payload):
    path: List[BranchStep]
    probability: float = Field(ge=0)
    success: bool
    label: str
    map: Optional[ComplexMatrix] = None


class BranchesPayload(_Payload):
    """Exhaustive branch tree of one protocol."""

    protocol: str
    params: Dict[str, float] = Field(default_factory=dict)
    total_probability: float
    leaves: List[BranchLeafPayload]


class ClosurePayload(_Payload):
    generator_set: str
    generators: List[str]
    size: int
    finite: bool
    cap: int


class WalkPayload(_Payload):
    n: int
    m: int
    never_positive: float
    closed_form: Optional[str] = None
    gamma_form: float
    asymptotic: float
    monte_carlo: Optional[float] = None
    trials: Optional[int] = None
    path_counts: Optional[Dict[str, int]] = None


class BqpRow(_Payload):
    k: int
    steps: int
    p_fail: float
    success: float


class BqpPayload(_Payload):
    rows: List[BqpRow]
    limit: float


class DensityPayload(_Payload):
    commutator_distance: float
    self_commutator_distance: float
    b_k_commute: bool
    exp_i_alpha: ComplexValue
    cos_alpha: float
    continued_fraction: List[int]


class SynthPayload(_Payload):
    target: str
    eps: float
    max_len: int
    found: bool
    word: List[str] = Field(default_factory=list)
    length: Optional[int] = None
    k_count: Optional[int] = None
    distance: Optional[float] = None


class ErrorDetail(_Payload):
    type: str
    message: str
    details: Dict[str, Any] = Field(default_factory=dict)


class ErrorPayload(_Payload):
    error: ErrorDetail
