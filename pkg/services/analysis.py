"""Gate-group closure, density evidence, random-walk statistics and word search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln

from models import (
    BqpPayload,
    BqpRow,
    ClosurePayload,
    ComplexValue,
    DensityPayload,
    SynthPayload,
    WalkPayload,
)
from services.anyon_model import AnyonModelData
from services.protocols import SquaredBudget
from services.qubit_encodings import (
    ALPHA,
    EXP_I_ALPHA,
    EncodingKind,
    GateMatrix,
    braid_gate_1111,
    braid_gate_1221,
    default_model,
    gate_set,
    hadamard,
    identity,
    k_gate,
    pauli_x,
    pauli_z,
)
from utils.config import get_settings

EXACT_WALK_LIMIT = 32
BQP_LIMIT = math.exp(-math.sqrt(2.0 / math.pi))


class WalkDomainError(ValueError):
    """Raised for walk lengths outside the odd positive integers."""


class UnknownGateError(KeyError):
    """Raised for a generator or target name with no gate behind it."""


# ----------------------------------------------------------------------
# Distances and keys
# ----------------------------------------------------------------------
def projective_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_theta |a - e^{i theta} b|_F / sqrt(dim)`` for unitaries."""

    overlap = np.trace(b.conj().T @ a)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-15 else 1.0
    return float(np.linalg.norm(a - phase * b) / math.sqrt(a.shape[0]))


def _canonical_key(matrix: np.ndarray, tol: float) -> Tuple[int, ...]:
    flat = GateMatrix(matrix).phase_canonical.ravel()
    scaled = np.round(np.concatenate([flat.real, flat.imag]) / tol).astype(np.int64)
    return tuple(int(v) for v in scaled)


_PAULIS = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def rotation_coordinates(matrices: np.ndarray) -> np.ndarray:
    """Bloch-sphere rotations of a stack of 2x2 unitaries, flattened to 9 columns.

    Blind to global phase and continuous in the unitary.
    """

    stack = np.asarray(matrices, dtype=complex).reshape(-1, 2, 2)
    rotations = 0.5 * np.einsum("iab,nbc,jcd,nad->nij", _PAULIS, stack, _PAULIS, stack.conj()).real
    return rotations.reshape(len(stack), 9)


# ----------------------------------------------------------------------
# Generator sets
# ----------------------------------------------------------------------
def _x_from_fusion(model: AnyonModelData) -> GateMatrix:
    return next(gate for gate in gate_set(EncodingKind.E1221, model) if gate.name == "X")


def generator_set(name: str, model: Optional[AnyonModelData] = None) -> List[GateMatrix]:
    model = model or default_model()
    sets = {
        "braid1111": lambda: [braid_gate_1111("R", model), braid_gate_1111("G", model)],
        "braid1221": lambda: [braid_gate_1221("Z", model), braid_gate_1221("B", model)],
        "xzb": lambda: [_x_from_fusion(model), braid_gate_1221("Z", model), braid_gate_1221("B", model)],
        "zbk": lambda: [braid_gate_1221("Z", model), braid_gate_1221("B", model), k_gate()],
    }
    try:
        return sets[name]()
    except KeyError as exc:
        raise UnknownGateError(f"Unknown generator set '{name}'; choose from {sorted(sets)}") from exc


GENERATOR_SETS = ("braid1111", "braid1221", "xzb", "zbk")


# ----------------------------------------------------------------------
# Group closure
# ----------------------------------------------------------------------
@dataclass
class ClosureResult:
    generators: List[GateMatrix]
    elements: List[GateMatrix]
    finite: bool
    cap: int
    name: str = ""

    @property
    def size(self) -> int:
        return len(self.elements)

    def to_payload(self) -> ClosurePayload:
        return ClosurePayload(
            generator_set=self.name,
            generators=[gate.name for gate in self.generators],
            size=self.size,
            finite=self.finite,
            cap=self.cap,
        )


def _closure_coordinates(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Real coordinates of ``U (x) conj(U)``, blind to global phase in any dimension."""

    stack = np.asarray(matrices, dtype=complex)
    outer = np.einsum("nij,nkl->nijkl", stack, stack.conj()).reshape(len(stack), -1)
    return np.concatenate([outer.real, outer.imag], axis=1)


def close_group(
    generators: Sequence[GateMatrix],
    *,
    tol: Optional[float] = None,
    cap: Optional[int] = None,
    name: str = "",
) -> ClosureResult:
    """Breadth-first closure of ``generators`` under multiplication, modulo global phase.

    Each layer of products is matched against the elements found so far with
    a k-d tree over phase-blind coordinates; products within ``tol`` of a
    known element, or of an earlier product in the same layer, are the same
    element. Stops with ``finite=False`` once more than ``cap`` distinct
    elements turn up.
    """

    if not 1 <= len(generators) <= 4:
        raise ValueError("close_group takes between one and four generators")
    settings = get_settings()
    tol = tol or settings.closure_tol
    cap = cap or settings.closure_cap
    elements = [identity(generators[0].dim)]
    known = cKDTree(_closure_coordinates([elements[0].entries]))
    frontier = list(elements)
    while frontier:
        products = [
            GateMatrix(current.entries @ generator.entries, f"{current.name}{generator.name}")
            for current in frontier
            for generator in generators
        ]
        coords = _closure_coordinates([product.entries for product in products])
        distances, _ = known.query(coords, distance_upper_bound=tol)
        fresh = [index for index in range(len(products)) if not np.isfinite(distances[index])]
        layer = cKDTree(coords[fresh]) if fresh else None
        kept: List[int] = []
        taken = set()
        for position, index in enumerate(fresh):
            if any(other in taken for other in layer.query_ball_point(coords[index], tol)):
                continue
            taken.add(position)
            kept.append(index)
        frontier = [products[index] for index in kept]
        if len(elements) + len(frontier) > cap:
            elements.extend(frontier[: cap + 1 - len(elements)])
            return ClosureResult(list(generators), elements, False, cap, name)
        elements.extend(frontier)
        known = cKDTree(_closure_coordinates([element.entries for element in elements]))
    return ClosureResult(list(generators), elements, True, cap, name)


def is_closed(elements: Sequence[GateMatrix], *, tol: Optional[float] = None) -> bool:
    tol = tol or get_settings().closure_tol
    tree = cKDTree(_closure_coordinates([element.entries for element in elements]))
    products = _closure_coordinates([a.entries @ b.entries for a in elements for b in elements])
    distances, _ = tree.query(products, distance_upper_bound=tol)
    return bool(np.all(np.isfinite(distances)))


# ----------------------------------------------------------------------
# Density evidence
# ----------------------------------------------------------------------
def group_commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``[a, b] = a^-1 b^-1 a b`` for unitaries."""

    return a.conj().T @ b.conj().T @ a @ b


def continued_fraction(value: float, *, depth: int = 12, floor: float = 1e-12) -> List[int]:
    terms: List[int] = []
    x = value
    for _ in range(depth):
        whole = math.floor(x)
        terms.append(int(whole))
        remainder = x - whole
        if remainder < floor:
            break
        x = 1.0 / remainder
    return terms


def density_witness(model: Optional[AnyonModelData] = None) -> DensityPayload:
    """Numerical evidence that ``<Z, B, K>`` is dense in the projective unitaries."""

    B = braid_gate_1221("B", model or default_model()).entries
    K = k_gate().entries
    K_inv = K.conj().T
    nested = group_commutator(group_commutator(B, K_inv), group_commutator(B, K))
    eye = np.eye(2)
    return DensityPayload(
        commutator_distance=float(np.linalg.norm(nested - eye, ord=2)),
        self_commutator_distance=float(np.linalg.norm(group_commutator(B, B) - eye, ord=2)),
        b_k_commute=projective_distance(B @ K, K @ B) < 1e-10,
        exp_i_alpha=ComplexValue.of(EXP_I_ALPHA),
        cos_alpha=math.cos(ALPHA),
        continued_fraction=continued_fraction(ALPHA / (2.0 * math.pi)),
    )


# ----------------------------------------------------------------------
# Random walk
# ----------------------------------------------------------------------
@dataclass
class WalkStats:
    """Chance that a symmetric walk from 0 stays at or below 0 for ``n`` steps."""

    n: int
    m: int
    never_positive: float
    gamma_form: float
    asymptotic: float
    exact: Optional[Fraction] = None
    path_counts: Dict[int, int] = field(default_factory=dict)
    total_paths: Optional[int] = None

    @property
    def paths_positive(self) -> Optional[int]:
        return sum(self.path_counts.values()) if self.path_counts else None

    def to_payload(self, monte_carlo: Optional[float] = None, trials: Optional[int] = None) -> WalkPayload:
        return WalkPayload(
            n=self.n,
            m=self.m,
            never_positive=self.never_positive,
            closed_form=None if self.exact is None else f"{self.exact.numerator}/{self.exact.denominator}",
            gamma_form=self.gamma_form,
            asymptotic=self.asymptotic,
            monte_carlo=monte_carlo,
            trials=trials,
            path_counts={str(x): count for x, count in sorted(self.path_counts.items())} or None,
        )


def path_counts(m: int) -> Dict[int, int]:
    """``N_x`` for ``n = 2m - 1``: paths ending at ``x > 0`` that never go negative."""

    counts = {1: 1}
    for _ in range(m - 1):
        nxt: Dict[int, int] = {}
        for x in range(1, max(counts) + 3, 2):
            total = 2 * counts.get(x, 0) + counts.get(x + 2, 0)
            if x > 1:
                total += counts.get(x - 2, 0)
            if total:
                nxt[x] = total
        counts = nxt
    return counts


def _double_factorial_ratio(m: int) -> Fraction:
    """``(2m-1)!! / (2m)!!``."""

    value = Fraction(1)
    for p in range(1, m + 1):
        value *= Fraction(2 * p - 1, 2 * p)
    return value


def log_never_positive(n: int) -> float:
    m = _half_steps(n)
    return float(gammaln(2 * m + 1) - m * math.log(4.0) - 2.0 * gammaln(m + 1))


def _half_steps(n: int) -> int:
    if n < 1 or n % 2 == 0:
        raise WalkDomainError(f"Walk length must be an odd positive integer, got {n}")
    return (n + 1) // 2


def walk_exact(n: int) -> WalkStats:
    """Exact never-positive probability for an odd walk length ``n``.

    Up to ``EXACT_WALK_LIMIT`` half-steps the value comes from integer path
    counts and is checked against the double-factorial ratio; beyond it the
    iterative product is compared with the log-space closed form.
    """

    m = _half_steps(n)
    gamma_form = math.exp(gammaln(m + 0.5) - 0.5 * math.log(math.pi) - gammaln(m + 1))
    asymptotic = math.sqrt(2.0 / (math.pi * n))
    if m <= EXACT_WALK_LIMIT:
        counts = path_counts(m)
        total = 2 ** (2 * m - 1)
        exact = Fraction(sum(counts.values()), total)
        closed = _double_factorial_ratio(m)
        assert exact == closed, f"path counts {exact} disagree with closed form {closed}"
        return WalkStats(n, m, float(exact), gamma_form, asymptotic, exact, counts, total)
    iterative = 1.0
    for p in range(1, m + 1):
        iterative *= 1.0 - 1.0 / (2 * p)
    closed = math.exp(log_never_positive(n))
    assert abs(iterative - closed) <= 1e-10 * closed, f"iterative {iterative} vs closed {closed}"
    return WalkStats(n, m, closed, gamma_form, asymptotic)


def walk_monte_carlo(
    n: int, trials: int, rng: np.random.Generator, *, chunk: int = 1_000_000
) -> float:
    """Fraction of ``trials`` symmetric walks that never go positive within ``n`` steps."""

    if n < 1 or trials < 1:
        raise WalkDomainError("Walk length and trial count must be positive")
    rows = max(1, chunk // n)
    hits = 0
    done = 0
    while done < trials:
        size = min(rows, trials - done)
        steps = rng.choice(np.array([-1, 1], dtype=np.int8), size=(size, n))
        positions = np.cumsum(steps, axis=1, dtype=np.int32)
        hits += int(np.count_nonzero(positions.max(axis=1) <= 0))
        done += size
    return hits / trials


def bqp_limit(k_values: Iterable[int]) -> BqpPayload:
    """Success chance ``(1 - p_fail)^k`` when each of ``k`` K gates gets ``k^2`` walk steps."""

    rows = []
    for k in k_values:
        steps = SquaredBudget(int(k)).steps()
        p_fail = math.exp(log_never_positive(steps))
        success = math.exp(k * math.log1p(-p_fail))
        rows.append(BqpRow(k=int(k), steps=steps, p_fail=p_fail, success=success))
    return BqpPayload(rows=rows, limit=BQP_LIMIT)


# ----------------------------------------------------------------------
# Word synthesis
# ----------------------------------------------------------------------
def letter_gates(model: Optional[AnyonModelData] = None) -> Dict[str, GateMatrix]:
    model = model or default_model()
    B = braid_gate_1221("B", model)
    K = k_gate()
    return {
        "Z": braid_gate_1221("Z", model),
        "B": B,
        "B^-1": GateMatrix(B.entries.conj().T, "B^-1"),
        "K": K,
        "K^-1": GateMatrix(K.entries.conj().T, "K^-1"),
    }


def named_target(name: str, model: Optional[AnyonModelData] = None) -> GateMatrix:
    targets = {"H": hadamard(), "X": pauli_x(), "Z": pauli_z(), "I": identity()}
    targets.update(letter_gates(model))
    try:
        return targets[name]
    except KeyError as exc:
        raise UnknownGateError(f"Unknown target '{name}'; choose from {sorted(targets)}") from exc


@dataclass(frozen=True)
class GateWord:
    letters: Tuple[str, ...]
    value: GateMatrix

    @property
    def canonical(self) -> np.ndarray:
        return self.value.phase_canonical

    @property
    def length(self) -> int:
        return len(self.letters)

    @property
    def k_count(self) -> int:
        return sum(letter.startswith("K") for letter in self.letters)

    @classmethod
    def evaluate(cls, letters: Sequence[str], alphabet: Mapping[str, GateMatrix]) -> "GateWord":
        value = np.eye(2, dtype=complex)
        for letter in letters:
            value = value @ alphabet[letter].entries
        return cls(tuple(letters), GateMatrix(value, "".join(letters)))


def _half_words(alphabet: Mapping[str, GateMatrix], depth: int) -> List[GateWord]:
    """Shortest representative of every distinct element reachable in ``depth`` letters."""

    start = GateWord((), GateMatrix(np.eye(2), "I"))
    seen = {_canonical_key(start.value.entries, 1e-9)}
    layer = [start]
    words = [start]
    for _ in range(depth):
        nxt = []
        for word in layer:
            for letter, gate in alphabet.items():
                value = word.value.entries @ gate.entries
                key = _canonical_key(value, 1e-9)
                if key in seen:
                    continue
                seen.add(key)
                nxt.append(GateWord(word.letters + (letter,), GateMatrix(value, "")))
        words.extend(nxt)
        layer = nxt
    return words


@dataclass
class SynthesisResult:
    target: GateMatrix
    eps: float
    max_len: int
    word: Optional[GateWord]
    distance: Optional[float]

    def to_payload(self, target_name: str) -> SynthPayload:
        return SynthPayload(
            target=target_name,
            eps=self.eps,
            max_len=self.max_len,
            found=self.word is not None,
            word=list(self.word.letters) if self.word else [],
            length=self.word.length if self.word else None,
            k_count=self.word.k_count if self.word else None,
            distance=self.distance,
        )


def synthesize_word(
    target: GateMatrix,
    *,
    alphabet: Sequence[str] = ("Z", "B", "K", "K^-1"),
    max_len: int = 12,
    eps: float = 0.05,
    k_weight: float = 0.0,
    neighbours: int = 8,
    model: Optional[AnyonModelData] = None,
) -> SynthesisResult:
    """Meet-in-the-middle search for a word within ``eps`` of ``target`` up to phase.

    Every word is split into a left and right half of at most
    ``ceil(max_len / 2)`` letters. Right halves sit in a k-d tree over their
    rotation coordinates; each left half queries the halves closest to
    ``left^-1 target``. Among the candidates within ``eps`` the one with the
    least ``length + k_weight * k_count`` wins.
    """

    if not 0 <= max_len <= 24:
        raise ValueError("max_len must lie in 0..24")
    letters = letter_gates(model)
    unknown = set(alphabet) - set(letters)
    if unknown:
        raise UnknownGateError(f"Letters {sorted(unknown)} are outside {sorted(letters)}")
    chosen = {letter: letters[letter] for letter in alphabet}
    halves = _half_words(chosen, (max_len + 1) // 2)
    values = np.array([word.value.entries for word in halves])
    tree = cKDTree(rotation_coordinates(values))
    queries = rotation_coordinates(np.conj(np.swapaxes(values, 1, 2)) @ target.entries)
    _, indices = tree.query(queries, k=min(neighbours, len(halves)))
    indices = np.asarray(indices).reshape(len(halves), -1)

    best: Optional[Tuple[float, int, Tuple[str, ...], float]] = None
    for left, row in zip(halves, indices):
        for index in row:
            right = halves[int(index)]
            length = left.length + right.length
            if length > max_len:
                continue
            distance = projective_distance(left.value.entries @ right.value.entries, target.entries)
            if distance >= eps:
                continue
            letters_used = left.letters + right.letters
            k_count = sum(letter.startswith("K") for letter in letters_used)
            candidate = (length + k_weight * k_count, length, letters_used, distance)
            if best is None or candidate[:2] < best[:2]:
                best = candidate
    if best is None:
        return SynthesisResult(target, eps, max_len, None, None)
    word = GateWord.evaluate(best[2], chosen)
    return SynthesisResult(target, eps, max_len, word, projective_distance(word.value.entries, target.entries))
