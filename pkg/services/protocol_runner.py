"""Protocol registry, exhaustive branch enumeration and seeded shot runs."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from models import BranchLeafPayload, BranchesPayload, BranchStep, TracePayload, TraceRecord, complex_matrix
from services.anyon_model import AnyonModelData
from services.fusion_state import DegenerateStateError
from services.protocols import (
    AncillaLibrary,
    FixedBudget,
    ForcedMeasurementTimeout,
    MeasurementRecord,
    ProtocolContext,
    ProtocolOutcome,
    ScriptedChooser,
    StochasticChooser,
    UnexploredBranch,
    VanishingBranch,
    apply_cz,
    convert_state_to_phase_gate,
    k_gate_random_walk,
    merge_to_122221,
    prepare_bell_then_phi_h,
    prepare_k,
    prepare_phi,
    prepare_plus,
    prepare_state2,
    split_to_1221_pair,
    switch_encoding_1111_to_1221,
    tqf,
)
from services.qubit_encodings import (
    EncodingKind,
    LeakageError,
    QubitRegister,
    approximate_hadamard,
    default_model,
    encode,
    logical_bitstrings,
    register_from_vector,
)
from utils.config import get_settings
from utils.rng import shot_stream
from utils.run_logger import RunLogger, null_logger

Params = Dict[str, float]
Body = Callable[[ProtocolContext, Optional[QubitRegister], Params], ProtocolOutcome]

DEFAULT_TREE_ATTEMPTS = 4


class UnknownProtocolError(KeyError):
    """Raised for a protocol name missing from the registry."""


@dataclass(frozen=True)
class ProtocolDefinition:
    """How to run one protocol from the CLI or the branch enumerator.

    ``input_kind`` is None for preparations that start from fresh
    quasiparticles. ``reference_input`` is either a logical bitstring or
    ``"generic"``, a fixed input with distinct nonzero amplitudes that
    reaches every branch a basis input can reach.
    """

    name: str
    body: Body
    input_kind: Optional[EncodingKind] = None
    reference_input: str = "generic"
    defaults: Mapping[str, float] = field(default_factory=dict)

    def resolve(self, params: Optional[Mapping[str, float]] = None) -> Params:
        resolved = dict(self.defaults)
        for key, value in (params or {}).items():
            if key not in self.defaults:
                raise ValueError(f"Protocol '{self.name}' takes no parameter '{key}'")
            resolved[key] = float(value)
        return resolved

    def reference(self, model: Optional[AnyonModelData] = None) -> Optional[QubitRegister]:
        if self.input_kind is None:
            return None
        if self.reference_input != "generic":
            return encode(self.reference_input, self.input_kind, model)
        dim = len(logical_bitstrings(self.input_kind))
        return register_from_vector([self.input_kind], _generic_vector(dim), model)

    def basis_inputs(self, model: Optional[AnyonModelData] = None) -> List[Optional[QubitRegister]]:
        if self.input_kind is None:
            return [None]
        return [encode(bits, self.input_kind, model) for bits in logical_bitstrings(self.input_kind)]


def _generic_vector(dim: int) -> np.ndarray:
    index = np.arange(dim)
    vector = (1.0 + 0.25 * index) * np.exp(0.9j * index)
    return vector / np.linalg.norm(vector)


def _input(register: Optional[QubitRegister]) -> QubitRegister:
    assert register is not None, "protocol needs an input register"
    return register


def _model_of(register: Optional[QubitRegister]) -> AnyonModelData:
    return register.model if register is not None else default_model()


def _phase_gate(ctx: ProtocolContext, register: Optional[QubitRegister], params: Params) -> ProtocolOutcome:
    register = _input(register)
    library = AncillaLibrary(register.model)
    ancilla = library.closed_form("r_phi", phi=params["phi"])
    return convert_state_to_phase_gate(ctx, register, ancilla, phi=params["phi"])


def _k_walk(ctx: ProtocolContext, register: Optional[QubitRegister], params: Params) -> ProtocolOutcome:
    register = _input(register)
    return k_gate_random_walk(ctx, register, FixedBudget(int(params["n"])), library=AncillaLibrary(register.model))


def _cz(ctx: ProtocolContext, register: Optional[QubitRegister], params: Params) -> ProtocolOutcome:
    register = _input(register)
    eps = params["eps"]
    bell = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
    resource = np.kron(np.eye(2), approximate_hadamard(eps).entries) @ bell
    ancilla = register_from_vector([EncodingKind.E1221_PAIR], resource, register.model)
    return apply_cz(ctx, register, ancilla, tol=max(1e-10, 4.0 * eps))


PROTOCOLS: Dict[str, ProtocolDefinition] = {
    definition.name: definition
    for definition in (
        ProtocolDefinition(
            "switch-encoding",
            lambda ctx, reg, _: switch_encoding_1111_to_1221(ctx, _input(reg)),
            EncodingKind.E1111,
        ),
        ProtocolDefinition("merge", lambda ctx, reg, _: merge_to_122221(ctx, _input(reg)), EncodingKind.E1221_PAIR),
        ProtocolDefinition("split", lambda ctx, reg, _: split_to_1221_pair(ctx, _input(reg)), EncodingKind.E122221),
        ProtocolDefinition("tqf", lambda ctx, reg, _: tqf(ctx, _input(reg)), EncodingKind.E122221),
        ProtocolDefinition("phase-gate", _phase_gate, EncodingKind.E1221, defaults={"phi": np.pi / 3}),
        ProtocolDefinition(
            "prepare-state2",
            lambda ctx, reg, p: prepare_state2(ctx, method="braid" if p["braid"] else "measure"),
            defaults={"braid": 0.0},
        ),
        ProtocolDefinition(
            "prepare-phi",
            lambda ctx, reg, p: prepare_phi(ctx, 1 if p["s"] > 0 else -1),
            defaults={"s": 1.0},
        ),
        ProtocolDefinition("prepare-k", lambda ctx, reg, _: prepare_k(ctx, AncillaLibrary())),
        ProtocolDefinition("k-walk", _k_walk, EncodingKind.E1221, defaults={"n": 1.0}),
        ProtocolDefinition(
            "prepare-plus",
            lambda ctx, reg, _: prepare_plus(ctx, _input(reg)),
            EncodingKind.E1221,
            reference_input="0",
        ),
        ProtocolDefinition(
            "bell",
            lambda ctx, reg, p: prepare_bell_then_phi_h(ctx, approximate_hadamard(p["eps"])),
            defaults={"eps": 0.0},
        ),
        ProtocolDefinition("cz", _cz, EncodingKind.E1221_PAIR, defaults={"eps": 0.0}),
    )
}


def get_protocol(name: str) -> ProtocolDefinition:
    try:
        return PROTOCOLS[name]
    except KeyError as exc:
        raise UnknownProtocolError(f"Unknown protocol '{name}'; choose from {sorted(PROTOCOLS)}") from exc


# ----------------------------------------------------------------------
# Exhaustive enumeration
# ----------------------------------------------------------------------
Path = Tuple[Tuple[str, int], ...]


@dataclass(frozen=True)
class BranchLeaf:
    """One complete outcome sequence with its probability and logical map."""

    path: Path
    probability: float
    success: bool
    label: str
    map: Optional[np.ndarray] = None

    @property
    def outcomes(self) -> Tuple[int, ...]:
        return tuple(outcome for _, outcome in self.path)


@dataclass
class BranchTree:
    protocol: str
    params: Params
    leaves: List[BranchLeaf]

    @property
    def total_probability(self) -> float:
        return float(sum(leaf.probability for leaf in self.leaves))

    def by_label(self) -> Dict[str, float]:
        totals: Dict[str, float] = {}
        for leaf in self.leaves:
            totals[leaf.label] = totals.get(leaf.label, 0.0) + leaf.probability
        return dict(sorted(totals.items()))

    def nodes(self) -> Dict[Path, float]:
        """Probability of reaching every prefix of every leaf path."""

        reached: Dict[Path, float] = {}
        for leaf in self.leaves:
            for depth in range(len(leaf.path) + 1):
                prefix = leaf.path[:depth]
                reached[prefix] = reached.get(prefix, 0.0) + leaf.probability
        return reached

    def find(self, **outcomes: int) -> List[BranchLeaf]:
        """Leaves whose path has every ``step=outcome`` pair given."""

        return [leaf for leaf in self.leaves if all((step, value) in leaf.path for step, value in outcomes.items())]

    def to_payload(self) -> BranchesPayload:
        return BranchesPayload(
            protocol=self.protocol,
            params=self.params,
            total_probability=self.total_probability,
            leaves=[
                BranchLeafPayload(
                    path=[BranchStep(step=step, outcome=outcome) for step, outcome in leaf.path],
                    probability=leaf.probability,
                    success=leaf.success,
                    label=leaf.label,
                    map=None if leaf.map is None else complex_matrix(leaf.map),
                )
                for leaf in self.leaves
            ],
        )


def _path(records: List[MeasurementRecord]) -> Path:
    return tuple((record.step, record.outcome) for record in records)


def _leaf_map(
    definition: ProtocolDefinition,
    script: Tuple[int, ...],
    params: Params,
    max_attempts: int,
    model: Optional[AnyonModelData],
) -> Optional[np.ndarray]:
    columns: List[Optional[np.ndarray]] = []
    for register in definition.basis_inputs(model):
        chooser = ScriptedChooser(script)
        ctx = ProtocolContext(chooser, max_attempts=max_attempts)
        try:
            outcome = definition.body(ctx, register, params)
        except (VanishingBranch, DegenerateStateError):
            columns.append(None)
            continue
        if outcome.result is None:
            return None
        try:
            columns.append(outcome.result.logical_vector() * math.exp(0.5 * chooser.log_weight))
        except LeakageError:
            return None
    width = next((len(column) for column in columns if column is not None), None)
    if width is None:
        return None
    return np.column_stack([np.zeros(width, dtype=complex) if c is None else c for c in columns])


def build_branch_tree(
    definition: ProtocolDefinition,
    params: Optional[Mapping[str, float]] = None,
    *,
    max_attempts: int = DEFAULT_TREE_ATTEMPTS,
    floor: Optional[float] = None,
    model: Optional[AnyonModelData] = None,
    with_maps: bool = True,
    logger: Optional[RunLogger] = None,
) -> BranchTree:
    """Enumerate every outcome sequence of ``definition`` on its reference input.

    Leaf probabilities are products of the exact conditional Born
    probabilities. Loops still failing after ``max_attempts`` end in leaves
    labelled ``timeout``. A branch whose probability of being reached falls
    below ``floor`` (default: the ``branch_floor`` setting) is not explored
    and ends in a ``truncated`` leaf carrying that probability, so the
    leaves always sum to one. Each successful leaf carries the linear map it
    applies to the logical basis inputs (unnormalized, so maps of all leaves
    compose to an isometry).
    """

    cutoff = get_settings().branch_floor if floor is None else floor
    resolved = definition.resolve(params)
    reference = definition.reference(model)
    leaves: List[BranchLeaf] = []
    stack: List[Tuple[int, ...]] = [()]
    while stack:
        script = stack.pop()
        ctx = ProtocolContext(ScriptedChooser(script), max_attempts=max_attempts)
        try:
            outcome = definition.body(ctx, reference, resolved)
        except UnexploredBranch as branch:
            reached = float(np.prod([record.probability for record in ctx.records]))
            for g in sorted(branch.options, reverse=True):
                probability = reached * branch.options[g]
                if probability < cutoff:
                    path = _path(ctx.records) + ((branch.step, g),)
                    leaves.append(BranchLeaf(path, probability, False, "truncated"))
                else:
                    stack.append(script + (g,))
            continue
        except ForcedMeasurementTimeout:
            probability = float(np.prod([record.probability for record in ctx.records]))
            leaves.append(BranchLeaf(_path(ctx.records), probability, False, "timeout"))
            continue
        leaf_map = _leaf_map(definition, script, resolved, max_attempts, model) if with_maps else None
        leaves.append(
            BranchLeaf(_path(outcome.records), outcome.probability, outcome.success, outcome.label, leaf_map)
        )
    tree = BranchTree(definition.name, resolved, leaves)
    (logger or null_logger()).log(
        "branch_tree",
        extra={"protocol": definition.name, "leaves": len(leaves), "total": tree.total_probability},
    )
    return tree


# ----------------------------------------------------------------------
# Seeded shots
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ShotResult:
    shot: int
    records: List[MeasurementRecord]
    label: str
    success: bool


def run_shot(
    definition: ProtocolDefinition,
    params: Params,
    *,
    seed: int,
    shot: int,
    max_attempts: int,
    logger: RunLogger,
    reference: Optional[QubitRegister],
) -> ShotResult:
    ctx = ProtocolContext(
        StochasticChooser(shot_stream(seed, shot)), max_attempts=max_attempts, logger=logger, shot=shot
    )
    try:
        outcome = definition.body(ctx, reference, params)
    except ForcedMeasurementTimeout:
        return ShotResult(shot, list(ctx.records), "timeout", False)
    return ShotResult(shot, list(outcome.records), outcome.label, outcome.success)


def run_shots(
    definition: ProtocolDefinition,
    params: Optional[Mapping[str, float]] = None,
    *,
    seed: int = 0,
    shots: int = 1,
    threads: int = 1,
    max_attempts: Optional[int] = None,
    model: Optional[AnyonModelData] = None,
    logger: Optional[RunLogger] = None,
) -> TracePayload:
    """Run ``shots`` independent seeded executions and aggregate their labels.

    Shot ``i`` draws from its own stream, so the payload is identical for
    any thread count.
    """

    resolved = definition.resolve(params)
    attempts = max_attempts or get_settings().max_attempts
    logger = logger or null_logger()
    reference = definition.reference(model)
    logger.log("protocol_run", extra={"protocol": definition.name, "seed": seed, "shots": shots, "threads": threads})

    def one(shot: int) -> ShotResult:
        return run_shot(
            definition,
            resolved,
            seed=seed,
            shot=shot,
            max_attempts=attempts,
            logger=logger,
            reference=reference,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(shots)))
    else:
        results = [one(shot) for shot in range(shots)]

    counts: Dict[str, int] = {}
    for result in results:
        counts[result.label] = counts.get(result.label, 0) + 1
    successes = sum(result.success for result in results)
    logger.log("protocol_run_complete", extra={"protocol": definition.name, "successes": successes})
    return TracePayload(
        protocol=definition.name,
        seed=seed,
        shots=shots,
        params=resolved,
        records=[
            TraceRecord(shot=result.shot, step=record.step, outcome=record.outcome, prob=record.probability)
            for result in results
            for record in result.records
        ],
        aggregate={label: count / shots for label, count in sorted(counts.items())},
        successes=successes,
    )
