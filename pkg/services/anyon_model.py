"""Closed-form algebraic data for SU(2)_k and Jones-Kauffman JK_k anyons.

Charges are integers ``0..k`` in both families; an SU(2) spin ``j`` is
stored as ``2j``. F-symbols come from the q-deformed 6j symbols (SU(2)) or
from the Temperley-Lieb tetrahedron evaluation (JK), R-symbols, dimensions,
twists and the S-matrix from their closed forms. Conjugate families carry the
complex conjugate of every phase.
"""

from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from models import (
    ComplexValue,
    Family,
    FSymbolEntry,
    ModelDump,
    ModelTable,
    ModelTableRow,
    RSymbolEntry,
    TheorySpec,
    complex_matrix,
    label_to_spin,
)
from utils.config import get_settings

FIndex = Tuple[int, int, int, int, int, int]


class AnyonModelError(ValueError):
    """Raised for invalid charge labels or inadmissible vertices."""


class ConsistencyError(RuntimeError):
    """Raised when generated data violates an identity beyond tolerance."""

    def __init__(
        self,
        message: str,
        violations: Optional[List[Dict[str, object]]] = None,
        *,
        report: Optional[object] = None,
    ) -> None:
        super().__init__(message)
        self.violations = violations or []
        self.report = report


def _admissible(a: int, b: int, c: int, level: int) -> bool:
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= min(a + b, 2 * level - a - b)


def _check_labels(spec: TheorySpec, *labels: int) -> None:
    for label in labels:
        try:
            spec.validate_charge(label)
        except ValueError as exc:
            raise AnyonModelError(str(exc)) from exc


def _is_jk(spec: TheorySpec) -> bool:
    return spec.family.base is Family.JK


def q_integer(n: int, spec: TheorySpec) -> float:
    """Return the quantum integer ``[n]`` of the family, as a sine ratio.

    SU(2): ``sin(n pi / (k+2)) / sin(pi / (k+2))``. JK uses ``A^2`` in place of
    ``q`` which flips the sign of every even quantum integer.
    """

    if n < 0:
        raise AnyonModelError(f"Quantum integer needs n >= 0, got {n}")
    r = spec.r
    if n % r == 0:
        return 0.0
    value = math.sin(n * math.pi / r) / math.sin(math.pi / r)
    if _is_jk(spec) and n % 2 == 0:
        value = -value
    return value


@lru_cache(maxsize=128)
def _factorials(spec: TheorySpec) -> Tuple[float, ...]:
    values = [1.0]
    for n in range(1, 2 * spec.level + 4):
        values.append(values[-1] * q_integer(n, spec))
    return tuple(values)


def q_factorial(n: int, spec: TheorySpec) -> float:
    table = _factorials(spec)
    if n < 0 or n >= len(table):
        raise AnyonModelError(f"Quantum factorial argument {n} out of range")
    return table[n]


def fusion_multiplicity(a: int, b: int, c: int, spec: TheorySpec) -> int:
    """Return ``N_ab^c`` (0 or 1)."""

    _check_labels(spec, a, b, c)
    return int(_admissible(a, b, c, spec.level))


def fusion_channels(a: int, b: int, spec: TheorySpec) -> List[int]:
    _check_labels(spec, a, b)
    upper = min(a + b, 2 * spec.level - a - b)
    return list(range(abs(a - b), upper + 1, 2))


def quantum_dimension(a: int, spec: TheorySpec) -> float:
    r = spec.r
    return math.sin((a + 1) * math.pi / r) / math.sin(math.pi / r)


def _theta_net(a: int, b: int, c: int, fact: Tuple[float, ...]) -> float:
    half = (a + b + c) // 2
    sign = -1.0 if half % 2 else 1.0
    numerator = fact[half + 1] * fact[(-a + b + c) // 2] * fact[(a - b + c) // 2] * fact[(a + b - c) // 2]
    return sign * numerator / (fact[a] * fact[b] * fact[c])


def _delta(a: int, b: int, c: int, fact: Tuple[float, ...]) -> float:
    numerator = fact[(-a + b + c) // 2] * fact[(a - b + c) // 2] * fact[(a + b - c) // 2]
    return math.sqrt(numerator / fact[(a + b + c) // 2 + 1])


def _z_sum(
    tri: Tuple[int, int, int, int], quad: Tuple[int, int, int], fact: Tuple[float, ...]
) -> float:
    z_min = max(tri)
    z_max = min(quad)
    assert z_min <= z_max, f"empty z-window {tri} / {quad}"
    total = 0.0
    for z in range(z_min, z_max + 1):
        denominator = 1.0
        for t in tri:
            denominator *= fact[z - t]
        for s in quad:
            denominator *= fact[s - z]
        term = fact[z + 1] / denominator
        total += -term if z % 2 else term
    return total


def compute_f_symbol(a: int, b: int, c: int, d: int, e: int, f: int, spec: TheorySpec) -> complex:
    """Return ``[F^{abc}_d]_{ef}``; zero when either fusion path is inadmissible."""

    _check_labels(spec, a, b, c, d, e, f)
    k = spec.level
    if not (
        _admissible(a, b, e, k)
        and _admissible(e, c, d, k)
        and _admissible(b, c, f, k)
        and _admissible(a, f, d, k)
    ):
        return 0j

    fact = _factorials(spec)
    tri = ((a + b + e) // 2, (c + d + e) // 2, (b + c + f) // 2, (a + d + f) // 2)
    quad = ((a + b + c + d) // 2, (a + c + e + f) // 2, (b + d + e + f) // 2)
    total = _z_sum(tri, quad, fact)

    if _is_jk(spec):
        edges = 1.0
        for label in (a, b, c, d, e, f):
            edges *= fact[label]
        internal = 1.0
        for s in quad:
            for t in tri:
                internal *= fact[s - t]
        tet = internal / edges * total
        thetas = (
            _theta_net(a, b, e, fact)
            * _theta_net(c, d, e, fact)
            * _theta_net(b, c, f, fact)
            * _theta_net(a, d, f, fact)
        )
        weight = math.sqrt(quantum_dimension(e, spec) * quantum_dimension(f, spec))
        value = weight / math.sqrt(thetas) * tet
    else:
        deltas = (
            _delta(a, b, e, fact)
            * _delta(e, c, d, fact)
            * _delta(b, c, f, fact)
            * _delta(a, f, d, fact)
        )
        sign = -1.0 if ((a + b + c + d) // 2) % 2 else 1.0
        weight = math.sqrt(q_integer(e + 1, spec) * q_integer(f + 1, spec))
        value = sign * weight * deltas * total
    return complex(value)


def compute_r_symbol(a: int, b: int, c: int, spec: TheorySpec) -> complex:
    """Return ``R^{ab}_c`` for an admissible vertex."""

    _check_labels(spec, a, b, c)
    if not _admissible(a, b, c, spec.level):
        raise AnyonModelError(f"No vertex for {a} x {b} -> {c} at level {spec.level}")
    r = spec.r
    sign = -1.0 if ((a + b - c) // 2) % 2 else 1.0
    shift = c * (c + 2) - a * (a + 2) - b * (b + 2)
    if _is_jk(spec):
        phase = (math.pi / 2 - math.pi / (2 * r)) * (shift // 2)
    else:
        phase = 2 * math.pi * shift / (8 * r)
    value = sign * cmath.exp(1j * phase)
    return value.conjugate() if spec.family.is_conjugate else value


def _closed_twist(a: int, spec: TheorySpec) -> complex:
    r = spec.r
    if _is_jk(spec):
        sign = -1.0 if a % 2 else 1.0
        value = sign * cmath.exp(1j * (math.pi / 2 - math.pi / (2 * r)) * a * (a + 2))
    else:
        value = cmath.exp(2j * math.pi * a * (a + 2) / (4 * r))
    return value.conjugate() if spec.family.is_conjugate else value


def _closed_s(a: int, b: int, spec: TheorySpec) -> complex:
    r = spec.r
    value = math.sqrt(2 / r) * math.sin((a + 1) * (b + 1) * math.pi / r)
    if _is_jk(spec) and (a * b) % 2:
        value = -value
    return complex(value)


@dataclass(frozen=True)
class DerivedInvariants:
    """Dimensions, twists, S-matrix and indicators with their cross-check residuals."""

    qdims: np.ndarray
    total_dim: float
    twists: np.ndarray
    s_matrix: np.ndarray
    frob_schur: np.ndarray
    residuals: Dict[str, float]


class AnyonModelData:
    """Complete data of one theory.

    The fusion tensor, R-symbols and closed-form invariants are computed at
    construction. F-symbols are memoized; for ``k`` up to the configured eager
    bound the whole table is filled at construction so reads never write.
    """

    def __init__(
        self,
        spec: TheorySpec,
        *,
        eager: Optional[bool] = None,
        f_overrides: Optional[Dict[FIndex, complex]] = None,
    ) -> None:
        self.spec = spec
        k = spec.level
        self.level = k
        self.charges: Tuple[int, ...] = tuple(range(k + 1))
        size = k + 1

        self.fusion = np.zeros((size, size, size), dtype=np.int8)
        for a in self.charges:
            for b in self.charges:
                for c in fusion_channels(a, b, spec):
                    self.fusion[a, b, c] = 1

        self.r_tensor = np.zeros((size, size, size), dtype=complex)
        for a, b, c in zip(*np.nonzero(self.fusion)):
            self.r_tensor[a, b, c] = compute_r_symbol(int(a), int(b), int(c), spec)

        self.qdims = np.array([quantum_dimension(a, spec) for a in self.charges])
        self.total_dim = math.sqrt(spec.r / 2) / math.sin(math.pi / spec.r)
        self.twists = np.array([_closed_twist(a, spec) for a in self.charges])
        self.s_matrix = np.array(
            [[_closed_s(a, b, spec) for b in self.charges] for a in self.charges]
        )
        if _is_jk(spec):
            self.frob_schur = np.ones(size, dtype=int)
        else:
            self.frob_schur = np.array([-1 if a % 2 else 1 for a in self.charges])

        self._f_overrides: Dict[FIndex, complex] = dict(f_overrides or {})
        self._f_cache: Dict[FIndex, complex] = {}
        self._f_dense: Optional[np.ndarray] = None
        self._lock = threading.Lock()
        if eager is None:
            eager = k <= get_settings().eager_fill_level
        if eager:
            for index in self.admissible_f_indices():
                self._f_cache[index] = self._compute_f(index)

    # ------------------------------------------------------------------
    # Lookups
    # ------------------------------------------------------------------
    def N(self, a: int, b: int, c: int) -> int:
        return int(self.fusion[a, b, c])

    def channels(self, a: int, b: int) -> List[int]:
        return [int(c) for c in np.nonzero(self.fusion[a, b])[0]]

    def F(self, a: int, b: int, c: int, d: int, e: int, f: int) -> complex:
        index = (a, b, c, d, e, f)
        cached = self._f_cache.get(index)
        if cached is not None:
            return cached
        value = self._compute_f(index)
        with self._lock:
            self._f_cache[index] = value
        return value

    def R(self, a: int, b: int, c: int) -> complex:
        return complex(self.r_tensor[a, b, c])

    def twist(self, a: int) -> complex:
        return complex(self.twists[a])

    def dim(self, a: int) -> float:
        return float(self.qdims[a])

    def _compute_f(self, index: FIndex) -> complex:
        if index in self._f_overrides:
            return complex(self._f_overrides[index])
        return compute_f_symbol(*index, self.spec)

    def admissible_f_indices(self) -> Iterator[FIndex]:
        for a in self.charges:
            for b in self.charges:
                for e in self.channels(a, b):
                    for c in self.charges:
                        for d in self.channels(e, c):
                            for f in self.channels(b, c):
                                if self.fusion[a, f, d]:
                                    yield (a, b, c, d, e, f)

    def f_matrix(self, a: int, b: int, c: int, d: int) -> Tuple[List[int], List[int], np.ndarray]:
        """Return the block ``[F^{abc}_d]`` with its row (e) and column (f) labels."""

        rows = [e for e in self.channels(a, b) if self.fusion[e, c, d]]
        cols = [f for f in self.channels(b, c) if self.fusion[a, f, d]]
        block = np.array([[self.F(a, b, c, d, e, f) for f in cols] for e in rows], dtype=complex)
        return rows, cols, block.reshape(len(rows), len(cols))

    def f_tensor(self) -> np.ndarray:
        """Dense zero-extended ``F[a,b,c,d,e,f]`` array (size (k+1)^6)."""

        if self._f_dense is None:
            size = self.level + 1
            dense = np.zeros((size,) * 6, dtype=complex)
            for index in self.admissible_f_indices():
                dense[index] = self.F(*index)
            with self._lock:
                self._f_dense = dense
        return self._f_dense

    # ------------------------------------------------------------------
    # Variants
    # ------------------------------------------------------------------
    def with_f_override(self, index: FIndex, value: complex) -> "AnyonModelData":
        overrides = dict(self._f_overrides)
        overrides[tuple(index)] = complex(value)  # type: ignore[index]
        return AnyonModelData(self.spec, eager=True, f_overrides=overrides)

    def conjugate(self) -> "AnyonModelData":
        return build_model(self.spec.conjugate())

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------
    def to_payload(self) -> ModelDump:
        f_entries = []
        for index in self.admissible_f_indices():
            value = ComplexValue.of(self.F(*index))
            f_entries.append(FSymbolEntry(idx=list(index), re=value.re, im=value.im))
        r_entries = []
        fusion = []
        for a, b, c in zip(*np.nonzero(self.fusion)):
            triple = [int(a), int(b), int(c)]
            fusion.append(triple)
            value = ComplexValue.of(self.r_tensor[a, b, c])
            r_entries.append(RSymbolEntry(idx=triple, re=value.re, im=value.im))
        return ModelDump(
            spec=self.spec,
            charges=list(self.charges),
            fusion=fusion,
            f_symbols=f_entries,
            r_symbols=r_entries,
            qdims=[round(float(x), 15) for x in self.qdims],
            total_dim=round(self.total_dim, 15),
            twists=[ComplexValue.of(theta) for theta in self.twists],
            s_matrix=complex_matrix(self.s_matrix),
            frob_schur=[int(x) for x in self.frob_schur],
        )

    def table_payload(self) -> ModelTable:
        rows = []
        for a in self.charges:
            spin = label_to_spin(a)
            rows.append(
                ModelTableRow(
                    charge=a,
                    spin=str(spin) if spin.denominator != 1 else str(spin.numerator),
                    qdim=round(float(self.qdims[a]), 12),
                    twist=ComplexValue.of(self.twists[a], digits=12),
                    frob_schur=int(self.frob_schur[a]),
                )
            )
        return ModelTable(
            theory=self.spec.label,
            total_dim=round(self.total_dim, 12),
            rows=rows,
            s_matrix=complex_matrix(np.round(self.s_matrix, 12)),
        )


@lru_cache(maxsize=32)
def build_model(spec: TheorySpec) -> AnyonModelData:
    """Return the shared, fully constructed model for ``spec``."""

    return AnyonModelData(spec)


def derived_invariants(model: AnyonModelData, tol: Optional[float] = None) -> DerivedInvariants:
    """Closed-form invariants plus cross-checks against F and R data.

    Checks ``d_a = 1/|[F^{aaa}_a]_00|``, ``kappa_a = d_a [F^{aaa}_a]_00``, the
    twist recovered from ``sum_c d_c/d_a R^{aa}_c`` and the S-matrix rebuilt
    from twists and fusion.
    """

    tol = get_settings().tol if tol is None else tol
    charges = model.charges
    d = model.qdims
    theta = model.twists

    qdim_from_f = np.array([1.0 / abs(model.F(a, a, a, a, 0, 0)) for a in charges])
    kappa_from_f = np.array([d[a] * model.F(a, a, a, a, 0, 0).real for a in charges])
    twist_from_r = np.array(
        [sum(d[c] / d[a] * model.R(a, a, c) for c in model.channels(a, a)) for a in charges]
    )
    s_from_twists = np.zeros_like(model.s_matrix)
    for a in charges:
        for b in charges:
            acc = sum(model.N(a, b, c) * theta[c] / (theta[a] * theta[b]) * d[c] for c in charges)
            s_from_twists[a, b] = acc / model.total_dim
    if model.spec.family.is_conjugate:
        s_from_twists = s_from_twists.conj()

    residuals = {
        "qdim_from_f": float(np.max(np.abs(qdim_from_f - d))),
        "frob_schur_from_f": float(np.max(np.abs(kappa_from_f - model.frob_schur))),
        "twist_from_r": float(np.max(np.abs(twist_from_r - theta))),
        "s_from_twists": float(np.max(np.abs(s_from_twists - model.s_matrix))),
        "total_dim": abs(model.total_dim**2 - float(np.sum(d**2))),
    }
    failing = {name: value for name, value in residuals.items() if value > tol}
    if failing:
        violations = [{"name": name, "residual": value} for name, value in failing.items()]
        raise ConsistencyError(
            f"Derived invariants disagree for {model.spec.label}: {sorted(failing)}", violations
        )
    return DerivedInvariants(
        qdims=d.copy(),
        total_dim=model.total_dim,
        twists=theta.copy(),
        s_matrix=model.s_matrix.copy(),
        frob_schur=model.frob_schur.copy(),
        residuals=residuals,
    )
