"""Qubit encodings in JK_4 quasiparticles and the gates they support."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import product
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from models import GateEntry, GatesDump, TheorySpec, complex_matrix
from services.anyon_model import AnyonModelData, build_model
from services.fusion_state import (
    AnyonState,
    Chirality,
    Path,
    braid_word,
    concat,
    create_vacuum_pair,
    pair_branches,
)

CANONICAL_ZERO = 1e-10


class EncodingError(ValueError):
    """Raised when a register or bitstring does not fit the requested encoding."""


class LeakageError(RuntimeError):
    """Raised when a state has weight outside the logical subspace."""

    def __init__(self, message: str, leaked_mass: float) -> None:
        super().__init__(message)
        self.leaked_mass = leaked_mass


class EncodingKind(str, Enum):
    E1111 = "1111"
    E1221 = "1221"
    E122221 = "122221"
    E1221_PAIR = "1221x1221"

    @classmethod
    def parse(cls, value: str) -> "EncodingKind":
        token = value.strip().upper()
        for kind in cls:
            if token in (kind.value.upper(), kind.name, kind.name[1:]):
                return kind
        raise EncodingError(f"Unknown encoding '{value}'")


_BLOCKS: Dict[EncodingKind, Tuple[Tuple[int, ...], List[Tuple[str, Path]]]] = {
    EncodingKind.E1111: ((1, 1, 1, 1), [("0", (1, 0, 1, 0)), ("1", (1, 2, 1, 0))]),
    EncodingKind.E1221: ((1, 2, 2, 1), [("0", (1, 1, 1, 0)), ("1", (1, 3, 1, 0))]),
    EncodingKind.E122221: (
        (1, 2, 2, 2, 2, 1),
        [
            (f"{bit_a}{bit_b}", (1, a, 1, b, 1, 0))
            for (bit_a, a), (bit_b, b) in product((("0", 1), ("1", 3)), repeat=2)
        ],
    ),
}


def _elementary(kind: EncodingKind) -> Tuple[EncodingKind, ...]:
    if kind is EncodingKind.E1221_PAIR:
        return (EncodingKind.E1221, EncodingKind.E1221)
    return (kind,)


def block_externals(kind: EncodingKind) -> Tuple[int, ...]:
    out: Tuple[int, ...] = ()
    for block in _elementary(kind):
        out += _BLOCKS[block][0]
    return out


def logical_bitstrings(kind: EncodingKind) -> List[str]:
    """Logical basis labels of an encoding in register order."""

    return [bits for bits, _ in _logical_map(_elementary(kind))]


def default_model() -> AnyonModelData:
    return build_model(TheorySpec.jk(4))


def _check_model(model: AnyonModelData) -> None:
    if model.level != 4:
        raise EncodingError(f"Encodings need a level-4 theory, got {model.spec.label}")


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """A 2x2 or 4x4 logical gate with exact phases retained."""

    entries: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        matrix = np.array(self.entries, dtype=complex)
        if matrix.shape not in ((2, 2), (4, 4)):
            raise EncodingError(f"Gate must be 2x2 or 4x4, got {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "entries", matrix)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def phase_canonical(self) -> np.ndarray:
        return phase_canonical(self.entries)

    def is_unitary(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.entries @ self.entries.conj().T - np.eye(self.dim))) < tol)

    def dagger(self) -> "GateMatrix":
        name = self.name[:-4] if self.name.endswith("_inv") else f"{self.name}_inv"
        return GateMatrix(self.entries.conj().T, name)

    def __matmul__(self, other: "GateMatrix") -> "GateMatrix":
        return GateMatrix(self.entries @ other.entries, f"{self.name}{other.name}")

    def distance(self, other: "GateMatrix") -> float:
        return float(np.max(np.abs(self.entries - other.entries)))

    def canonical_distance(self, other: "GateMatrix") -> float:
        return float(np.max(np.abs(self.phase_canonical - other.phase_canonical)))

    def to_entry(self) -> GateEntry:
        return GateEntry(
            name=self.name,
            exact=complex_matrix(self.entries),
            canonical=complex_matrix(self.phase_canonical),
            unitary=self.is_unitary(),
        )


def phase_canonical(matrix: np.ndarray, zero: float = CANONICAL_ZERO) -> np.ndarray:
    """Scale so the first nonzero entry in row-major order is positive real."""

    flat = np.asarray(matrix, dtype=complex).ravel()
    for value in flat:
        if abs(value) > zero:
            return np.asarray(matrix, dtype=complex) * (abs(value) / value)
    return np.asarray(matrix, dtype=complex).copy()


# ----------------------------------------------------------------------
# Standard logical gates
# ----------------------------------------------------------------------
EXP_I_ALPHA = complex(-1.0, 4.0 * math.sqrt(3.0)) / 7.0
ALPHA = cmath.phase(EXP_I_ALPHA)


def pauli_x() -> GateMatrix:
    return GateMatrix(np.array([[0, 1], [1, 0]]), "X")


def pauli_z() -> GateMatrix:
    return GateMatrix(np.diag([1, -1]), "Z")


def hadamard() -> GateMatrix:
    return GateMatrix(np.array([[1, 1], [1, -1]]) / math.sqrt(2), "H")


def phase_gate(phi: float, name: str = "") -> GateMatrix:
    return GateMatrix(np.diag([1.0, cmath.exp(1j * phi)]), name or f"R({phi:.6g})")


def k_gate() -> GateMatrix:
    return GateMatrix(np.diag([1.0, EXP_I_ALPHA]), "K")


def controlled_z() -> GateMatrix:
    return GateMatrix(np.diag([1, 1, 1, -1]), "CZ")


def identity(dim: int = 2) -> GateMatrix:
    return GateMatrix(np.eye(dim), "I")


def approximate_hadamard(eps: float) -> GateMatrix:
    """``H`` followed by a real rotation by ``eps``; exact ``H`` at ``eps = 0``."""

    c, s = math.cos(eps), math.sin(eps)
    rotation = np.array([[c, -s], [s, c]])
    return GateMatrix(hadamard().entries @ rotation, "H" if eps == 0 else f"H~{eps:g}")


# ----------------------------------------------------------------------
# Registers
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class QubitRegister:
    """Consecutive total-charge-0 blocks, each encoding one or two qubits."""

    blocks: Tuple[EncodingKind, ...]
    state: AnyonState
    logical_map: Tuple[Tuple[str, Path], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        flat: List[EncodingKind] = []
        for kind in self.blocks:
            flat.extend(_elementary(kind))
        object.__setattr__(self, "blocks", tuple(flat))
        object.__setattr__(self, "logical_map", _logical_map(tuple(flat)))
        if self.state.externals != self.externals:
            raise EncodingError(
                f"State externals {self.state.externals} do not match encoding {self.externals}"
            )

    @property
    def externals(self) -> Tuple[int, ...]:
        out: Tuple[int, ...] = ()
        for kind in self.blocks:
            out += _BLOCKS[kind][0]
        return out

    @property
    def n_qubits(self) -> int:
        return sum(len(_BLOCKS[kind][1][0][0]) for kind in self.blocks)

    @property
    def kind(self) -> EncodingKind:
        if len(self.blocks) == 1:
            return self.blocks[0]
        if self.blocks == (EncodingKind.E1221, EncodingKind.E1221):
            return EncodingKind.E1221_PAIR
        raise EncodingError(f"Composite register {self.blocks} has no single kind")

    @property
    def model(self) -> AnyonModelData:
        return self.state.model

    def with_state(self, state: AnyonState) -> "QubitRegister":
        return QubitRegister(self.blocks, state)

    def block_start(self, block: int) -> int:
        """1-based index of the first quasiparticle of ``blocks[block]``."""

        if not 0 <= block < len(self.blocks):
            raise EncodingError(f"Block {block} outside register of {len(self.blocks)} blocks")
        return 1 + sum(len(_BLOCKS[kind][0]) for kind in self.blocks[:block])

    def block_qubit(self, block: int) -> int:
        if not 0 <= block < len(self.blocks):
            raise EncodingError(f"Block {block} outside register of {len(self.blocks)} blocks")
        return sum(len(_BLOCKS[kind][1][0][0]) for kind in self.blocks[:block])

    def replace_blocks(self, start: int, count: int, kinds: Sequence[EncodingKind], state: AnyonState) -> "QubitRegister":
        """Swap ``count`` blocks from ``start`` for ``kinds``; ``state`` must already match."""

        blocks = self.blocks[:start] + tuple(kinds) + self.blocks[start + count :]
        return QubitRegister(blocks, state)

    def qubit_offset(self, qubit: int) -> Tuple[int, int]:
        """Return (block index, first particle index, 1-based) holding ``qubit``."""

        seen = 0
        particle = 1
        for index, kind in enumerate(self.blocks):
            width = len(_BLOCKS[kind][1][0][0])
            if qubit < seen + width:
                return index, particle
            seen += width
            particle += len(_BLOCKS[kind][0])
        raise EncodingError(f"Qubit {qubit} outside register of {self.n_qubits} qubits")

    def logical_vector(self, *, tol: float = 1e-10) -> np.ndarray:
        amplitudes = decode(self, tol=tol)
        return np.array([amplitudes[bits] for bits, _ in self.logical_map], dtype=complex)

    def leaked_mass(self) -> float:
        inside = {path for _, path in self.logical_map}
        total = self.state.norm() ** 2
        if total == 0:
            return 0.0
        outside = sum(abs(v) ** 2 for p, v in self.state.amplitudes.items() if p not in inside)
        return outside / total


@lru_cache(maxsize=32)
def _logical_map(blocks: Tuple[EncodingKind, ...]) -> Tuple[Tuple[str, Path], ...]:
    entries: List[Tuple[str, Path]] = [("", ())]
    for kind in blocks:
        entries = [
            (bits + more_bits, path + more_path)
            for bits, path in entries
            for more_bits, more_path in _BLOCKS[kind][1]
        ]
    return tuple(entries)


def register_from_vector(
    blocks: Sequence[EncodingKind],
    vector: Sequence[complex],
    model: Optional[AnyonModelData] = None,
    *,
    normalize: bool = True,
) -> QubitRegister:
    model = model or default_model()
    _check_model(model)
    flat: List[EncodingKind] = []
    for kind in blocks:
        flat.extend(_elementary(kind))
    mapping = _logical_map(tuple(flat))
    values = np.asarray(vector, dtype=complex).ravel()
    if len(values) != len(mapping):
        raise EncodingError(f"Expected {len(mapping)} amplitudes, got {len(values)}")
    externals: Tuple[int, ...] = ()
    for kind in flat:
        externals += _BLOCKS[kind][0]
    state = AnyonState(model, externals, {path: v for (_, path), v in zip(mapping, values)})
    if normalize:
        state = state.normalize()
    return QubitRegister(tuple(flat), state)


def encode(bitstring: str, kind: EncodingKind, model: Optional[AnyonModelData] = None) -> QubitRegister:
    """Return the register holding the logical basis state ``bitstring``."""

    blocks = _elementary(kind)
    mapping = _logical_map(blocks)
    width = len(mapping[0][0])
    if len(bitstring) != width or set(bitstring) - {"0", "1"}:
        raise EncodingError(f"Bitstring '{bitstring}' does not fit {kind.value} ({width} qubits)")
    vector = [1.0 if bits == bitstring else 0.0 for bits, _ in mapping]
    return register_from_vector(blocks, vector, model)


def encode_state(
    amplitudes: Mapping[str, complex], kind: EncodingKind, model: Optional[AnyonModelData] = None
) -> QubitRegister:
    blocks = _elementary(kind)
    mapping = _logical_map(blocks)
    unknown = set(amplitudes) - {bits for bits, _ in mapping}
    if unknown:
        raise EncodingError(f"Bitstrings {sorted(unknown)} do not fit {kind.value}")
    return register_from_vector(blocks, [amplitudes.get(bits, 0j) for bits, _ in mapping], model)


def decode(register: QubitRegister, *, tol: float = 1e-10) -> Dict[str, complex]:
    """Logical amplitudes of a register; raises ``LeakageError`` on support outside the code."""

    leaked = register.leaked_mass()
    if leaked > tol:
        raise LeakageError(f"{leaked:.3g} of the weight lies outside the logical subspace", leaked)
    return {bits: register.state.amplitude(path) for bits, path in register.logical_map}


def tensor(first: QubitRegister, second: QubitRegister) -> QubitRegister:
    return QubitRegister(first.blocks + second.blocks, concat(first.state, second.state))


def insert_register(register: QubitRegister, block: int, other: QubitRegister) -> QubitRegister:
    """Place ``other`` directly after ``register.blocks[block]``.

    Every block boundary carries total charge 0, so bringing ``other`` into
    place along a common path leaves the data of both registers unchanged.
    """

    split = register.block_start(block) - 1 + len(_BLOCKS[register.blocks[block]][0])
    if any(path[split - 1] != 0 for path in register.state.amplitudes):
        raise EncodingError(f"Register has no vacuum boundary after block {block}")
    amplitudes = {
        path[:split] + other_path + path[split:]: value * other_value
        for path, value in register.state.amplitudes.items()
        for other_path, other_value in other.state.amplitudes.items()
    }
    blocks = register.blocks[: block + 1] + other.blocks + register.blocks[block + 1 :]
    externals = register.externals[:split] + other.externals + register.externals[split:]
    state = AnyonState(
        register.model,
        externals,
        amplitudes,
        normalized=register.state.normalized and other.state.normalized,
    )
    return QubitRegister(blocks, state)


def apply_logical_gate(register: QubitRegister, gate: GateMatrix, qubit: int = 0) -> QubitRegister:
    """Apply ``gate`` to logical qubit ``qubit`` (and ``qubit+1`` for 4x4 gates)."""

    n = register.n_qubits
    width = 1 if gate.dim == 2 else 2
    if qubit < 0 or qubit + width > n:
        raise EncodingError(f"Gate on qubit {qubit} does not fit {n} qubits")
    vector = register.logical_vector().reshape((2,) * n)
    tensor_gate = gate.entries.reshape((2,) * (2 * width))
    axes = list(range(qubit, qubit + width))
    moved = np.tensordot(tensor_gate, vector, axes=(list(range(width, 2 * width)), axes))
    result = np.moveaxis(moved, list(range(width)), axes).ravel()
    state = AnyonState(
        register.model,
        register.externals,
        {path: v for (_, path), v in zip(register.logical_map, result)},
        normalized=register.state.normalized,
    )
    return register.with_state(state)


def logical_operator(
    kind: EncodingKind,
    fn: Callable[[QubitRegister], QubitRegister],
    model: Optional[AnyonModelData] = None,
) -> np.ndarray:
    """Matrix of a register map on the logical basis; column ``k`` is the image of basis ``k``."""

    mapping = _logical_map(_elementary(kind))
    columns = []
    for bits, _ in mapping:
        image = fn(encode(bits, kind, model))
        columns.append(image.logical_vector())
    return np.array(columns).T


# ----------------------------------------------------------------------
# Braid gates
# ----------------------------------------------------------------------
def _exchange_matrix(
    model: AnyonModelData, left: int, a: int, b: int, outer: int, chirality: Chirality
) -> Tuple[List[int], np.ndarray]:
    """``[B^{x a b}_d] = F^T R F`` restricted to the channels ``c`` of ``x a``."""

    rows, cols, F = model.f_matrix(left, a, b, outer)
    if chirality is Chirality.CCW:
        phases = np.array([model.R(a, b, f) for f in cols])
    else:
        phases = np.array([model.R(b, a, f).conjugate() for f in cols])
    return rows, F.conj() @ np.diag(phases) @ F.T


def braid_gate_1111(
    which: str, model: Optional[AnyonModelData] = None, chirality: Chirality = Chirality.CCW
) -> GateMatrix:
    """``R`` exchanges quasiparticles 1,2 (diagonal ``R^{11}_a``); ``G`` exchanges 2,3."""

    model = model or default_model()
    _check_model(model)
    chirality = Chirality(chirality)
    if which == "R":
        phases = [model.R(1, 1, a) for a in (0, 2)]
        if chirality is Chirality.CW:
            phases = [p.conjugate() for p in phases]
        gate = GateMatrix(np.diag(phases), "R")
    elif which == "G":
        rows, matrix = _exchange_matrix(model, 1, 1, 1, 1, chirality)
        assert rows == [0, 2]
        gate = GateMatrix(matrix, "G")
    else:
        raise EncodingError(f"Unknown 1111 braid gate '{which}'")
    return gate if chirality is Chirality.CCW else GateMatrix(gate.entries, f"{gate.name}_inv")


def braid_gate_1221(
    which: str, model: Optional[AnyonModelData] = None, chirality: Chirality = Chirality.CCW
) -> GateMatrix:
    """``Z`` is the full exchange of quasiparticles 1,2; ``B`` exchanges the two charge-2 quasiparticles."""

    model = model or default_model()
    _check_model(model)
    chirality = Chirality(chirality)
    if which == "Z":
        phases = [model.R(1, 2, a) * model.R(2, 1, a) for a in (1, 3)]
        if chirality is Chirality.CW:
            phases = [p.conjugate() for p in phases]
        gate = GateMatrix(np.diag(phases), "Z")
    elif which == "B":
        rows, matrix = _exchange_matrix(model, 1, 2, 2, 1, chirality)
        assert rows == [1, 3]
        gate = GateMatrix(matrix, "B")
    else:
        raise EncodingError(f"Unknown 1221 braid gate '{which}'")
    return gate if chirality is Chirality.CCW else GateMatrix(gate.entries, f"{gate.name}_inv")


BRAID_WORDS: Dict[Tuple[EncodingKind, str], List[Tuple[int, Chirality]]] = {
    (EncodingKind.E1111, "R"): [(1, Chirality.CCW)],
    (EncodingKind.E1111, "G"): [(2, Chirality.CCW)],
    (EncodingKind.E1221, "Z"): [(1, Chirality.CCW), (1, Chirality.CCW)],
    (EncodingKind.E1221, "B"): [(2, Chirality.CCW)],
}


def apply_braid_gate(register: QubitRegister, name: str, *, inverse: bool = False, qubit: int = 0) -> QubitRegister:
    """Apply a named braid gate to the block holding ``qubit`` as a braid word on the state."""

    block, first = register.qubit_offset(qubit)
    kind = register.blocks[block]
    word = BRAID_WORDS.get((kind, name))
    if word is None:
        raise EncodingError(f"No braid gate '{name}' for encoding {kind.value}")
    if inverse:
        word = [(i, c.inverse()) for i, c in reversed(word)]
    shifted = [(first - 1 + i, c) for i, c in word]
    return register.with_state(braid_word(register.state, shifted))


def apply_x_via_fusion(register: QubitRegister, qubit: int = 0) -> QubitRegister:
    """Logical NOT on a 1221 qubit from a charge-4 pair and two deterministic fusions."""

    block, first = register.qubit_offset(qubit)
    if register.blocks[block] is not EncodingKind.E1221:
        raise EncodingError("Fusion-based NOT needs a 1221 qubit")
    state = create_vacuum_pair(register.state, 4, first + 1)
    for position in (first + 1, first + 2):
        branches = pair_branches(state, position)
        assert list(branches) == [2], f"fusion with charge 4 must be deterministic, got {list(branches)}"
        state = branches[2]
    return register.with_state(
        AnyonState(state.model, state.externals, state.amplitudes, normalized=register.state.normalized)
    )


def gate_set(kind: EncodingKind, model: Optional[AnyonModelData] = None) -> List[GateMatrix]:
    model = model or default_model()
    if kind is EncodingKind.E1111:
        names = ("R", "G")
        builder = braid_gate_1111
    elif kind is EncodingKind.E1221:
        names = ("Z", "B")
        builder = braid_gate_1221
    else:
        raise EncodingError(f"No braid gate set for encoding {kind.value}")
    gates = [builder(name, model) for name in names]
    gates += [builder(name, model, Chirality.CW) for name in names]
    if kind is EncodingKind.E1221:
        x_matrix = logical_operator(kind, apply_x_via_fusion, model)
        gates.append(GateMatrix(x_matrix, "X"))
    return gates


def gates_dump(kind: EncodingKind, model: Optional[AnyonModelData] = None) -> GatesDump:
    model = model or default_model()
    return GatesDump(
        theory=model.spec.label,
        encoding=kind.value,
        gates=[gate.to_entry() for gate in gate_set(kind, model)],
    )
