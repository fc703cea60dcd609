"""Fusion, measurement and braiding protocols on JK_4 qubit registers.

Every protocol is written once against a ``ProtocolContext``. The context's
chooser decides each measurement outcome: ``StochasticChooser`` samples the
Born rule from a seeded generator and renormalizes, ``ScriptedChooser``
replays a fixed outcome sequence and keeps the path weight in log space so
the branch enumerator can walk every path and read off exact linear maps.
"""

from __future__ import annotations

import cmath
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np

from services.anyon_model import AnyonModelData
from services.fusion_state import (
    DEGENERATE,
    AnyonState,
    Chirality,
    apply_braid,
    charge_branches,
    create_vacuum_pair,
    pair_branches,
    probabilities,
    remove_ancilla_pair,
    sample_branch,
    transport_block,
)
from services.qubit_encodings import (
    ALPHA,
    EXP_I_ALPHA,
    EncodingError,
    EncodingKind,
    GateMatrix,
    LeakageError,
    QubitRegister,
    apply_braid_gate,
    apply_logical_gate,
    apply_x_via_fusion,
    default_model,
    encode,
    hadamard,
    insert_register,
    phase_gate,
    register_from_vector,
    tensor,
)
from utils.config import get_settings
from utils.run_logger import RunLogger, null_logger

ANCILLA_TOL = 1e-10
BRANCH_FLOOR = 1e-20
DEFAULT_WALK_STEPS = 7

_SQRT_HALF = math.sqrt(0.5)
_PHI_WEIGHT = math.sqrt(3.0 / 10.0)
_PHI_TILT = 2.0 * math.sqrt(3.0) / 3.0


class ForcedMeasurementTimeout(RuntimeError):
    """Raised when a repeat-until-success loop exhausts its attempts.

    ``register`` holds the state after the last attempt; passing it back to
    the same protocol resumes the loop.
    """

    def __init__(self, message: str, register: QubitRegister, *, loop: str, attempts: int) -> None:
        super().__init__(message)
        self.register = register
        self.loop = loop
        self.attempts = attempts


class AncillaRejectedError(ValueError):
    """Raised when an ancilla is not in the form a protocol consumes."""


class UnexploredBranch(Exception):
    """Raised by a scripted chooser that has run out of outcomes."""

    def __init__(self, step: str, options: Dict[int, float]) -> None:
        super().__init__(step)
        self.step = step
        self.options = options


class VanishingBranch(Exception):
    """Raised when a scripted outcome has no weight for the current input."""

    def __init__(self, step: str, outcome: int) -> None:
        super().__init__(f"{step}={outcome}")
        self.step = step
        self.outcome = outcome


# ----------------------------------------------------------------------
# Choosers and run context
# ----------------------------------------------------------------------
class Chooser(Protocol):
    def choose(
        self, step: str, branches: Mapping[int, AnyonState]
    ) -> Tuple[int, float, AnyonState]: ...


class StochasticChooser:
    """Born-rule sampling; the chosen branch is renormalized."""

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng

    def choose(self, step: str, branches: Mapping[int, AnyonState]) -> Tuple[int, float, AnyonState]:
        return sample_branch(branches, self.rng)


class ScriptedChooser:
    """Replay ``script`` in order.

    The chosen branch is renormalized and its squared norm is folded into
    ``log_weight``, so ``exp(log_weight)`` is the probability the input
    state follows the script. Deep retry paths keep a unit state while the
    weight underflows only in log space.
    """

    def __init__(self, script: Sequence[int], *, floor: float = BRANCH_FLOOR) -> None:
        self.script = tuple(script)
        self.floor = floor
        self.position = 0
        self.log_weight = 0.0

    def choose(self, step: str, branches: Mapping[int, AnyonState]) -> Tuple[int, float, AnyonState]:
        probs = probabilities(branches)
        if self.position == len(self.script):
            raise UnexploredBranch(step, {g: p for g, p in probs.items() if p > self.floor})
        outcome = self.script[self.position]
        self.position += 1
        if probs.get(outcome, 0.0) <= self.floor:
            raise VanishingBranch(step, outcome)
        chosen = branches[outcome]
        self.log_weight += 2.0 * math.log(chosen.norm())
        return outcome, probs[outcome], chosen.normalize()


@dataclass(frozen=True)
class MeasurementRecord:
    step: str
    outcome: int
    probability: float


@dataclass
class ProtocolOutcome:
    """Result of one protocol run along one branch."""

    protocol: str
    success: bool
    label: str
    result: Optional[QubitRegister] = None
    gate: Optional[GateMatrix] = None
    records: List[MeasurementRecord] = field(default_factory=list)
    attempts: Dict[str, int] = field(default_factory=dict)
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def probability(self) -> float:
        return float(np.prod([record.probability for record in self.records]))


class ProtocolContext:
    """Outcome source, measurement record and attempt counters of one run."""

    def __init__(
        self,
        chooser: Chooser,
        *,
        max_attempts: Optional[int] = None,
        logger: Optional[RunLogger] = None,
        shot: int = 0,
    ) -> None:
        self.chooser = chooser
        self.max_attempts = max_attempts or get_settings().max_attempts
        self.logger = logger or null_logger()
        self.shot = shot
        self.records: List[MeasurementRecord] = []
        self.attempts: Dict[str, int] = {}
        self._scope: List[str] = []

    def step_id(self, name: str) -> str:
        return "/".join(self._scope + [name])

    @contextmanager
    def scoped(self, name: str) -> Iterator[None]:
        self._scope.append(name)
        try:
            yield
        finally:
            self._scope.pop()

    def measure(self, name: str, state: AnyonState, i: int, j: int) -> Tuple[int, AnyonState]:
        """Collective charge of quasiparticles ``i..j``."""

        return self._choose(name, charge_branches(state, i, j))

    def fuse(self, name: str, state: AnyonState, i: int) -> Tuple[int, AnyonState]:
        """Fuse quasiparticles ``i, i+1`` into one."""

        return self._choose(name, pair_branches(state, i))

    def _choose(self, name: str, branches: Mapping[int, AnyonState]) -> Tuple[int, AnyonState]:
        step = self.step_id(name)
        outcome, probability, chosen = self.chooser.choose(step, branches)
        self.records.append(MeasurementRecord(step, outcome, probability))
        self.logger.log(
            "protocol_step",
            extra={"shot": self.shot, "step": step, "outcome": outcome, "prob": probability},
        )
        return outcome, chosen

    def attempts_for(self, loop: str) -> Iterator[int]:
        key = self.step_id(loop)
        for attempt in range(1, self.max_attempts + 1):
            self.attempts[key] = attempt
            yield attempt

    def timeout(self, loop: str, register: QubitRegister) -> ForcedMeasurementTimeout:
        key = self.step_id(loop)
        self.logger.log(
            "forced_measurement_timeout",
            extra={"shot": self.shot, "loop": key, "attempts": self.max_attempts},
        )
        return ForcedMeasurementTimeout(
            f"{key} did not succeed within {self.max_attempts} attempts",
            register,
            loop=key,
            attempts=self.max_attempts,
        )

    def finish(
        self,
        protocol: str,
        *,
        success: bool,
        label: str,
        result: Optional[QubitRegister] = None,
        gate: Optional[GateMatrix] = None,
        details: Optional[Mapping[str, float]] = None,
    ) -> ProtocolOutcome:
        return ProtocolOutcome(
            protocol=protocol,
            success=success,
            label=label,
            result=result,
            gate=gate,
            records=list(self.records),
            attempts=dict(self.attempts),
            details=dict(details or {}),
        )


# ----------------------------------------------------------------------
# Ancillas
# ----------------------------------------------------------------------
def _normalized_logical(register: QubitRegister, *, tol: float) -> np.ndarray:
    try:
        vector = register.logical_vector(tol=tol)
    except LeakageError as exc:
        raise AncillaRejectedError(f"Ancilla leaks out of the code space: {exc}") from exc
    norm = float(np.linalg.norm(vector))
    if norm <= DEGENERATE:
        raise AncillaRejectedError("Ancilla is the zero state")
    return vector / norm


def phase_distance(vector: np.ndarray, target: np.ndarray) -> float:
    """``min_theta |v - e^{i theta} t|`` for unit vectors."""

    overlap = np.vdot(target, vector)
    phase = overlap / abs(overlap) if abs(overlap) > DEGENERATE else 1.0
    return float(np.linalg.norm(vector - phase * target))


def r_state_vector(phi: float) -> np.ndarray:
    return np.array([cmath.exp(-0.5j * phi), cmath.exp(0.5j * phi)]) * _SQRT_HALF


_TARGETS: Dict[str, Tuple[EncodingKind, np.ndarray]] = {
    "state2": (EncodingKind.E1111, np.array([0.0, 1.0], dtype=complex)),
    "phi_plus_1_1": (EncodingKind.E1221, _PHI_WEIGHT * np.array([1 - 1j * _PHI_TILT, 1.0])),
    "phi_minus_1_3": (EncodingKind.E1221, _PHI_WEIGHT * np.array([1.0, 1 + 1j * _PHI_TILT])),
    "k": (EncodingKind.E1221, r_state_vector(ALPHA)),
    "plus": (EncodingKind.E1221, np.array([1.0, 1.0], dtype=complex) * _SQRT_HALF),
    "bell": (EncodingKind.E1221_PAIR, np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) * _SQRT_HALF),
    "phi_h": (EncodingKind.E1221_PAIR, np.array([1.0, 1.0, 1.0, -1.0], dtype=complex) / 2.0),
}


class AncillaLibrary:
    """Named ancilla registers, each checked against its closed form when stored.

    ``r_phi`` is parametric: ``(e^{-i phi/2}|1> + e^{i phi/2}|3>)/sqrt(2)``.
    """

    def __init__(self, model: Optional[AnyonModelData] = None, *, tol: float = ANCILLA_TOL) -> None:
        self.model = model or default_model()
        self.tol = tol
        self._entries: Dict[str, QubitRegister] = {}

    @staticmethod
    def target(name: str, *, phi: float = 0.0) -> Tuple[EncodingKind, np.ndarray]:
        if name == "r_phi":
            return EncodingKind.E1221, r_state_vector(phi)
        try:
            return _TARGETS[name]
        except KeyError as exc:
            raise AncillaRejectedError(f"Unknown ancilla '{name}'") from exc

    @staticmethod
    def names() -> List[str]:
        return sorted(_TARGETS) + ["r_phi"]

    def closed_form(self, name: str, *, phi: float = 0.0) -> QubitRegister:
        kind, vector = self.target(name, phi=phi)
        return register_from_vector([kind], vector, self.model)

    def store(self, name: str, register: QubitRegister, *, phi: float = 0.0) -> QubitRegister:
        kind, target = self.target(name, phi=phi)
        if register.kind is not kind:
            raise AncillaRejectedError(f"Ancilla '{name}' needs encoding {kind.value}")
        distance = phase_distance(_normalized_logical(register, tol=self.tol), target)
        if distance > self.tol:
            raise AncillaRejectedError(
                f"Ancilla '{name}' is {distance:.3g} away from its closed form"
            )
        self._entries[name] = register
        return register

    def get(self, name: str, *, phi: float = 0.0) -> QubitRegister:
        if name != "r_phi" and name in self._entries:
            return self._entries[name]
        return self.closed_form(name, phi=phi)

    def __contains__(self, name: str) -> bool:
        return name in self._entries


def ancilla_phase(
    ancilla: QubitRegister, *, phi: Optional[float] = None, tol: float = ANCILLA_TOL
) -> float:
    """Return ``phi`` of a balanced ancilla ``|R_{phi/2}>``; reject anything else."""

    if ancilla.blocks != (EncodingKind.E1221,):
        raise AncillaRejectedError("Phase-gate ancilla must be a single 1221 qubit")
    vector = _normalized_logical(ancilla, tol=tol)
    if float(np.max(np.abs(np.abs(vector) - _SQRT_HALF))) > tol:
        raise AncillaRejectedError(f"Ancilla amplitudes {np.abs(vector)} are not balanced")
    ratio = vector[1] / vector[0]
    measured = cmath.phase(ratio)
    if phi is not None and abs(ratio - cmath.exp(1j * phi)) > tol:
        raise AncillaRejectedError(f"Ancilla phase {measured:.12g} differs from requested {phi:.12g}")
    return measured


# ----------------------------------------------------------------------
# Budgets for the K random walk
# ----------------------------------------------------------------------
class Budget(Protocol):
    """Step cutoff for the walk implementing the ``index``-th K gate of a computation."""

    def steps(self, index: int = 0) -> int: ...


@dataclass(frozen=True)
class FixedBudget:
    n: int = DEFAULT_WALK_STEPS

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("Walk budget must be at least one step")

    def steps(self, index: int = 0) -> int:
        return self.n


@dataclass(frozen=True)
class SquaredBudget:
    """``k`` K gates in the computation: each walk gets the largest odd ``n <= k^2``."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("Gate count must be at least one")

    def steps(self, index: int = 0) -> int:
        n = self.k * self.k
        return n if n % 2 else n - 1


@dataclass(frozen=True)
class SlidingBudget:
    """Per-gate cutoffs; gates past the end of ``schedule`` reuse its last entry."""

    schedule: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.schedule or min(self.schedule) < 1:
            raise ValueError("Sliding schedule needs positive cutoffs")

    def steps(self, index: int = 0) -> int:
        return self.schedule[min(index, len(self.schedule) - 1)]


# ----------------------------------------------------------------------
# Encoding changes
# ----------------------------------------------------------------------
def _require_block(register: QubitRegister, block: int, kind: EncodingKind) -> int:
    if not 0 <= block < len(register.blocks) or register.blocks[block] is not kind:
        raise EncodingError(f"Block {block} of {register.blocks} is not a {kind.value} block")
    return register.block_start(block)


def _fuse_deterministic(state: AnyonState, i: int, expected: int) -> AnyonState:
    branches = pair_branches(state, i)
    assert list(branches) == [expected], f"fusion at {i} must give {expected}, got {list(branches)}"
    return branches[expected]


def switch_encoding_1111_to_1221(
    ctx: ProtocolContext, register: QubitRegister, *, block: int = 0
) -> ProtocolOutcome:
    """Convert a 1111 qubit into a 1221 qubit with the map ``P^(x)``.

    A charge-2 pair enters after quasiparticle 3; quasiparticles 3,4 fuse to
    ``x`` and then 2,3 fuse to ``y``. Only ``y = 2`` leaves a 1221 qubit;
    other outcomes are reported as failures for the caller to discard.
    """

    first = _require_block(register, block, EncodingKind.E1111)
    state = create_vacuum_pair(register.state, 2, first + 2)
    x, state = ctx.fuse("x", state, first + 2)
    y, state = ctx.fuse("y", state, first + 1)
    details = {"x": x, "y": y}
    if y != 2:
        return ctx.finish("switch-encoding", success=False, label=f"x={x},y={y}", details=details)
    switched = register.replace_blocks(block, 1, [EncodingKind.E1221], state)
    return ctx.finish(
        "switch-encoding", success=True, label=f"x={x},y=2", result=switched, details=details
    )


def merge_to_122221(ctx: ProtocolContext, register: QubitRegister, *, block: int = 0) -> ProtocolOutcome:
    """Forced measurement joining two adjacent 1221 qubits into one 122221 block."""

    first = _require_block(register, block, EncodingKind.E1221)
    _require_block(register, block + 1, EncodingKind.E1221)
    p = first + 3
    state = register.state
    for attempt in ctx.attempts_for("merge"):
        x, state = ctx.measure(f"x{attempt}", state, p, p + 1)
        if x == 0:
            break
        _, state = ctx.measure(f"y{attempt}", state, p + 1, p + 4)
    else:
        raise ctx.timeout("merge", register.with_state(state))
    state = remove_ancilla_pair(state, p)
    merged = register.replace_blocks(block, 2, [EncodingKind.E122221], state)
    return ctx.finish(
        "merge", success=True, label=f"attempts={attempt}", result=merged, details={"attempts": attempt}
    )


def split_to_1221_pair(ctx: ProtocolContext, register: QubitRegister, *, block: int = 0) -> ProtocolOutcome:
    """Inverse of ``merge_to_122221``: a charge-1 pair enters and is forced into the vacuum channel."""

    first = _require_block(register, block, EncodingKind.E122221)
    state = create_vacuum_pair(register.state, 1, first + 2)
    for attempt in ctx.attempts_for("split"):
        y, state = ctx.measure(f"y{attempt}", state, first + 4, first + 7)
        if y == 0:
            break
        _, state = ctx.measure(f"x{attempt}", state, first + 3, first + 4)
    else:
        raise ctx.timeout(
            "split", register.replace_blocks(block, 1, [EncodingKind.E1221, EncodingKind.E1221], state)
        )
    split = register.replace_blocks(block, 1, [EncodingKind.E1221, EncodingKind.E1221], state)
    return ctx.finish(
        "split", success=True, label=f"attempts={attempt}", result=split, details={"attempts": attempt}
    )


def tqf(ctx: ProtocolContext, register: QubitRegister, *, block: int = 0) -> ProtocolOutcome:
    """Topological qubit fusion of a 122221 block into a single 1221 qubit.

    ``z = 2`` leaves the encoded state untouched and is undone by measuring
    quasiparticles 4..6; ``z = 0`` applies ``Q^(0)`` and ``z = 4`` applies
    ``Q^(4)`` after a charge-4 pair turns the measured pair into vacuum.
    """

    first = _require_block(register, block, EncodingKind.E122221)
    state = register.state
    for attempt in ctx.attempts_for("tqf"):
        z, state = ctx.measure(f"z{attempt}", state, first + 2, first + 3)
        if z != 2:
            break
        _, state = ctx.measure(f"v{attempt}", state, first + 3, first + 5)
    else:
        raise ctx.timeout("tqf", register.with_state(state))
    if z == 4:
        state = create_vacuum_pair(state, 4, first + 3)
        state = _fuse_deterministic(state, first + 3, 2)
        state = _fuse_deterministic(state, first + 4, 2)
    state = remove_ancilla_pair(state, first + 2)
    fused = register.replace_blocks(block, 1, [EncodingKind.E1221], state)
    return ctx.finish(
        "tqf", success=True, label=f"z={z}", result=fused, details={"z": z, "attempts": attempt}
    )


# ----------------------------------------------------------------------
# Phase gates from ancillas
# ----------------------------------------------------------------------
def convert_state_to_phase_gate(
    ctx: ProtocolContext,
    register: QubitRegister,
    ancilla: QubitRegister,
    *,
    qubit: int = 0,
    phi: Optional[float] = None,
    tol: float = ANCILLA_TOL,
) -> ProtocolOutcome:
    """Consume ``|R_{phi/2}>`` to apply ``R_{+phi/2}`` (z=0) or ``R_{-phi/2}`` (z=4) to ``qubit``."""

    measured = ancilla_phase(ancilla, phi=phi, tol=tol)
    block, _ = register.qubit_offset(qubit)
    _require_block(register, block, EncodingKind.E1221)
    combined = insert_register(register, block, ancilla)
    merged = merge_to_122221(ctx, combined, block=block)
    fused = tqf(ctx, merged.result, block=block)
    z = int(fused.details["z"])
    sign = 1 if z == 0 else -1
    gate = phase_gate(sign * measured, f"R({'+' if sign > 0 else '-'}{measured:.6g}/2)")
    return ctx.finish(
        "phase-gate",
        success=True,
        label=f"z={z}",
        result=fused.result,
        gate=gate,
        details={"z": z, "sign": sign, "phi": measured},
    )


def prepare_state2(ctx: ProtocolContext, *, method: str = "measure", model: Optional[AnyonModelData] = None) -> ProtocolOutcome:
    """Force a fresh 1111 qubit into ``|2>``.

    Each attempt disturbs quasiparticles 2,3 (a charge measurement, or a
    braid with ``method="braid"``) and then measures quasiparticles 1,2
    until they show charge 2.
    """

    if method not in ("measure", "braid"):
        raise ValueError(f"Unknown |2> preparation method '{method}'")
    register = encode("0", EncodingKind.E1111, model)
    state = register.state
    for attempt in ctx.attempts_for("state2"):
        if method == "measure":
            _, state = ctx.measure(f"q23.{attempt}", state, 2, 3)
        else:
            state = apply_braid(state, 2, Chirality.CCW)
        a, state = ctx.measure(f"q12.{attempt}", state, 1, 2)
        if a == 2:
            break
    else:
        raise ctx.timeout("state2", register.with_state(state))
    return ctx.finish(
        "prepare-state2",
        success=True,
        label=f"attempts={attempt}",
        result=register.with_state(state),
        details={"attempts": attempt},
    )


def prepare_phi(
    ctx: ProtocolContext, s: int = 1, *, method: str = "measure", model: Optional[AnyonModelData] = None
) -> ProtocolOutcome:
    """Prepare ``|Phi_{+1,1}>`` (``s=+1``) or ``|Phi_{-1,3}>`` (``s=-1``) in a 1221 qubit."""

    if s not in (1, -1):
        raise ValueError("s must be +1 or -1")
    prepared = prepare_state2(ctx, method=method, model=model)
    register = apply_braid_gate(prepared.result, "G", inverse=s < 0)
    switched = switch_encoding_1111_to_1221(ctx, register)
    x = int(switched.details["x"])
    if not switched.success:
        return ctx.finish(
            "prepare-phi", success=False, label=switched.label, details={"s": s, **switched.details}
        )
    target = 1 if s > 0 else 3
    result = switched.result
    if x != target:
        result = apply_x_via_fusion(result)
    return ctx.finish(
        "prepare-phi",
        success=True,
        label=f"x={x}",
        result=result,
        details={"s": s, "x": x, "corrected": int(x != target)},
    )


def prepare_k(ctx: ProtocolContext, library: Optional[AncillaLibrary] = None) -> ProtocolOutcome:
    """Merge ``|Phi_{+1,1}>`` with ``|Phi_{-1,3}>`` and fuse; ``z = 0`` yields ``|K>``."""

    library = library or AncillaLibrary()
    register = tensor(library.get("phi_plus_1_1"), library.get("phi_minus_1_3"))
    merged = merge_to_122221(ctx, register)
    fused = tqf(ctx, merged.result)
    z = int(fused.details["z"])
    return ctx.finish(
        "prepare-k", success=z == 0, label=f"z={z}", result=fused.result, details={"z": z}
    )


def k_gate_random_walk(
    ctx: ProtocolContext,
    register: QubitRegister,
    budget: Optional[Budget] = None,
    *,
    qubit: int = 0,
    library: Optional[AncillaLibrary] = None,
    gate_index: int = 0,
) -> ProtocolOutcome:
    """Convert fresh ``|K>`` ancillas until the net gate is ``K`` or the budget runs out.

    The exponent of the accumulated ``K^x`` performs a symmetric walk from 0;
    the walk stops on first reaching ``x = 1``.
    """

    budget = budget or FixedBudget()
    library = library or AncillaLibrary(register.model)
    limit = budget.steps(gate_index)
    position = 0
    steps = 0
    current = register
    for steps in range(1, limit + 1):
        with ctx.scoped(f"k{steps}"):
            converted = convert_state_to_phase_gate(
                ctx, current, library.get("k"), qubit=qubit, phi=ALPHA
            )
        current = converted.result
        position += int(converted.details["sign"])
        if position == 1:
            break
    success = position == 1
    ctx.logger.log(
        "k_walk",
        extra={"shot": ctx.shot, "steps": steps, "position": position, "limit": limit, "success": success},
    )
    gate = GateMatrix(np.diag([1.0, EXP_I_ALPHA**position]), f"K^{position}")
    return ctx.finish(
        "k-walk",
        success=success,
        label="K" if success else "exhausted",
        result=current,
        gate=gate,
        details={"steps": steps, "position": position, "limit": limit},
    )


# ----------------------------------------------------------------------
# Entanglement resources and controlled-Z
# ----------------------------------------------------------------------
def prepare_plus(
    ctx: ProtocolContext, register: Optional[QubitRegister] = None, *, block: int = 0
) -> ProtocolOutcome:
    """Measure the charge-2 pair of a 1221 qubit; outcome 2 is corrected with ``Z``."""

    register = register or encode("0", EncodingKind.E1221)
    first = _require_block(register, block, EncodingKind.E1221)
    b, state = ctx.measure("b", register.state, first + 1, first + 2)
    prepared = register.with_state(state)
    if b == 2:
        prepared = apply_braid_gate(prepared, "Z", qubit=register.block_qubit(block))
    return ctx.finish("prepare-plus", success=True, label=f"b={b}", result=prepared, details={"b": b})


def prepare_bell_then_phi_h(
    ctx: ProtocolContext,
    h_gate: Optional[GateMatrix] = None,
    *,
    model: Optional[AnyonModelData] = None,
) -> ProtocolOutcome:
    """Prepare two 1221 qubits in ``(1 x h_gate)|Phi+>``.

    Fresh ``|+>|+>`` pairs are drawn until quasiparticles 3..6 carry total
    charge 0; opposite-chirality exchanges of (3,4) and (5,6) and moving
    quasiparticles 7,8 in front of 3..6 then leave ``|Phi+>``.
    """

    h_gate = h_gate or hadamard()
    for attempt in ctx.attempts_for("bell"):
        with ctx.scoped(f"init{attempt}"):
            with ctx.scoped("left"):
                left = prepare_plus(ctx, encode("0", EncodingKind.E1221, model)).result
            with ctx.scoped("right"):
                right = prepare_plus(ctx, encode("0", EncodingKind.E1221, model)).result
        register = tensor(left, right)
        r, state = ctx.measure(f"r{attempt}", register.state, 3, 6)
        if r == 0:
            break
    else:
        raise ctx.timeout("bell", register.with_state(state))
    state = apply_braid(state, 3, Chirality.CCW)
    state = apply_braid(state, 5, Chirality.CW)
    state = transport_block(state, 7, 2, 3, Chirality.CCW)
    bell = QubitRegister((EncodingKind.E1221, EncodingKind.E1221), state)
    result = apply_logical_gate(bell, h_gate, qubit=1)
    return ctx.finish(
        "bell", success=True, label=f"attempts={attempt}", result=result, details={"attempts": attempt}
    )


def _cz_layout(register: QubitRegister, ancilla: QubitRegister) -> QubitRegister:
    # order A, ancilla 1, B, ancilla 2; every block has total charge 0
    psi = register.logical_vector().reshape(2, 2)
    phi = _normalized_logical(ancilla, tol=ANCILLA_TOL).reshape(2, 2)
    combined = np.einsum("ab,ij->aibj", psi, phi).ravel()
    return register_from_vector([EncodingKind.E1221] * 4, combined, register.model, normalize=False)


def apply_cz(
    ctx: ProtocolContext,
    register: QubitRegister,
    ancilla: QubitRegister,
    *,
    tol: float = ANCILLA_TOL,
) -> ProtocolOutcome:
    """Consume ``|Phi_H>`` to apply ``C(Z)`` to two 1221 qubits A, B.

    TQF of A with ancilla 1 gives ``z_A1`` and TQF of B with ancilla 2 gives
    ``z_B2``; ``z_A1 = 4`` is corrected by ``Z`` on B and ``z_B2 = 4`` by
    ``Z`` on A.
    """

    pair = (EncodingKind.E1221, EncodingKind.E1221)
    if register.blocks != pair:
        raise EncodingError("C(Z) acts on exactly two 1221 qubits")
    if ancilla.blocks != pair:
        raise AncillaRejectedError("C(Z) ancilla must be a pair of 1221 qubits")
    distance = phase_distance(_normalized_logical(ancilla, tol=ANCILLA_TOL), _TARGETS["phi_h"][1])
    if distance > tol:
        raise AncillaRejectedError(f"Ancilla pair is {distance:.3g} away from |Phi_H>")
    layout = _cz_layout(register, ancilla)
    with ctx.scoped("A1"):
        merged = merge_to_122221(ctx, layout, block=0)
        fused = tqf(ctx, merged.result, block=0)
    z_a = int(fused.details["z"])
    with ctx.scoped("B2"):
        merged = merge_to_122221(ctx, fused.result, block=1)
        fused = tqf(ctx, merged.result, block=1)
    z_b = int(fused.details["z"])
    result = fused.result
    if z_a == 4:
        result = apply_braid_gate(result, "Z", qubit=1)
    if z_b == 4:
        result = apply_braid_gate(result, "Z", qubit=0)
    return ctx.finish(
        "cz",
        success=True,
        label=f"zA1={z_a},zB2={z_b}",
        result=result,
        details={"zA1": z_a, "zB2": z_b},
    )
