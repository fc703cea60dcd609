"""States of n quasiparticles on the left-nested fusion-chain basis.

A basis label is the path ``(c_1, ..., c_n)`` with ``c_1 = a_1`` and
``c_n`` the total charge; ``c_m`` is the collective charge of the first ``m``
quasiparticles. Positions are 1-based to match braid generators ``sigma_i``.
Every operation returns a new state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import (
    Callable,
    Dict,
    Iterable,
    List,
    Literal,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from models import StateDump, StateTerm
from services.anyon_model import AnyonModelData

Path = Tuple[int, ...]
Direction = Literal["forward", "backward"]

PRUNE = 1e-14
DEGENERATE = 1e-14


class StateShapeError(ValueError):
    """Raised when states or operations disagree on their charge layout."""


class DegenerateStateError(RuntimeError):
    """Raised when every measurement outcome has vanishing probability."""


class EntanglementError(RuntimeError):
    """Raised when a pair is not in a definite vacuum channel."""

    def __init__(self, message: str, weight: float) -> None:
        super().__init__(message)
        self.weight = weight


class Chirality(str, Enum):
    CCW = "ccw"
    CW = "cw"

    def inverse(self) -> "Chirality":
        return Chirality.CW if self is Chirality.CCW else Chirality.CCW


def _path_admissible(model: AnyonModelData, externals: Sequence[int], path: Path) -> bool:
    if len(path) != len(externals) or not path or path[0] != externals[0]:
        return False
    return all(model.N(path[m - 1], externals[m], path[m]) for m in range(1, len(path)))


def _c(path: Path, m: int) -> int:
    """Collective charge of the first ``m`` quasiparticles (``c_0`` is the vacuum)."""

    return 0 if m == 0 else path[m - 1]


def basis_paths(
    model: AnyonModelData, externals: Sequence[int], total: Optional[int] = None
) -> List[Path]:
    """Enumerate every admissible chain label, sorted."""

    if not externals:
        return []
    paths: List[Path] = [(externals[0],)]
    for a in externals[1:]:
        paths = [p + (c,) for p in paths for c in model.channels(p[-1], a)]
    if total is not None:
        paths = [p for p in paths if p[-1] == total]
    return sorted(paths)


class AnyonState:
    """Sparse amplitude map over chain labels for a fixed list of external charges.

    ``paired`` records a forward F-move at that position: the label at
    ``c_paired`` then holds the channel of the pair ``(a_i, a_{i+1})``.
    """

    __slots__ = ("model", "externals", "amplitudes", "normalized", "paired")

    def __init__(
        self,
        model: AnyonModelData,
        externals: Sequence[int],
        amplitudes: Mapping[Path, complex],
        *,
        normalized: bool = True,
        paired: Optional[int] = None,
    ) -> None:
        self.model = model
        self.externals: Tuple[int, ...] = tuple(int(a) for a in externals)
        self.amplitudes: Dict[Path, complex] = {
            tuple(path): complex(value)
            for path, value in amplitudes.items()
            if abs(value) > PRUNE
        }
        self.normalized = normalized
        self.paired = paired

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------
    @classmethod
    def basis(cls, model: AnyonModelData, externals: Sequence[int], path: Path) -> "AnyonState":
        if not _path_admissible(model, externals, tuple(path)):
            raise StateShapeError(f"Path {tuple(path)} is not admissible for {tuple(externals)}")
        return cls(model, externals, {tuple(path): 1.0})

    # ------------------------------------------------------------------
    # Basic properties
    # ------------------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.externals)

    @property
    def total(self) -> int:
        totals = {path[-1] for path in self.amplitudes}
        if len(totals) != 1:
            raise StateShapeError(f"State has no single total charge: {sorted(totals)}")
        return totals.pop()

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(v) ** 2 for v in self.amplitudes.values())))

    def normalize(self) -> "AnyonState":
        norm = self.norm()
        if norm <= DEGENERATE:
            raise DegenerateStateError("Cannot normalize a zero state")
        return self._replace(
            {p: v / norm for p, v in self.amplitudes.items()}, normalized=True, paired=self.paired
        )

    def scaled(self, factor: complex) -> "AnyonState":
        return self._replace(
            {p: v * factor for p, v in self.amplitudes.items()}, normalized=False, paired=self.paired
        )

    def amplitude(self, path: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(path), 0j)

    def vector(self, paths: Sequence[Path]) -> np.ndarray:
        return np.array([self.amplitude(p) for p in paths], dtype=complex)

    def distance(self, other: "AnyonState") -> float:
        _require_same_shape(self, other)
        keys = set(self.amplitudes) | set(other.amplitudes)
        return float(np.sqrt(sum(abs(self.amplitude(k) - other.amplitude(k)) ** 2 for k in keys)))

    def _replace(
        self,
        amplitudes: Mapping[Path, complex],
        *,
        externals: Optional[Sequence[int]] = None,
        normalized: Optional[bool] = None,
        paired: Optional[int] = None,
    ) -> "AnyonState":
        return AnyonState(
            self.model,
            self.externals if externals is None else externals,
            amplitudes,
            normalized=self.normalized if normalized is None else normalized,
            paired=paired,
        )

    def _require_chain(self) -> None:
        if self.paired is not None:
            raise StateShapeError(
                f"State is in the pair basis at position {self.paired}; apply the backward move first"
            )

    def _check_position(self, i: int) -> None:
        if not 1 <= i < self.n:
            raise IndexError(f"Position {i} outside 1..{self.n - 1}")

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------
    def to_payload(self) -> StateDump:
        terms = []
        for path in sorted(self.amplitudes):
            value = self.amplitudes[path]
            terms.append(
                StateTerm(
                    internals=list(path[1:-1]),
                    re=round(value.real, 15) + 0.0,
                    im=round(value.imag, 15) + 0.0,
                )
            )
        return StateDump(externals=list(self.externals), total=self.total, terms=terms)

    @classmethod
    def from_payload(cls, model: AnyonModelData, payload: StateDump) -> "AnyonState":
        externals = payload.externals
        amplitudes: Dict[Path, complex] = {}
        for term in payload.terms:
            if len(externals) == 1:
                path: Path = (payload.total,)
            else:
                path = (externals[0], *term.internals, payload.total)
            if not _path_admissible(model, externals, path):
                raise StateShapeError(f"Term {path} is not admissible for {externals}")
            amplitudes[path] = complex(term.re, term.im)
        return cls(model, externals, amplitudes)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"AnyonState(externals={self.externals}, terms={len(self.amplitudes)})"


def _require_same_shape(x: AnyonState, y: AnyonState) -> None:
    if x.externals != y.externals or x.paired != y.paired:
        raise StateShapeError(
            f"External charges differ: {x.externals} vs {y.externals}"
        )


def inner_product(x: AnyonState, y: AnyonState) -> complex:
    """Hermitian inner product ``<x|y>`` over matching chain labels."""

    _require_same_shape(x, y)
    return complex(sum(v.conjugate() * y.amplitude(p) for p, v in x.amplitudes.items()))


def apply_f_move(state: AnyonState, position: int, direction: Direction = "forward") -> AnyonState:
    """Re-associate ``(c_{i-1} a_i) a_{i+1}`` into ``c_{i-1} (a_i a_{i+1})`` or back."""

    state._check_position(position)
    i = position
    model = state.model
    a, b = state.externals[i - 1], state.externals[i]
    out: Dict[Path, complex] = {}
    if direction == "forward":
        state._require_chain()
        for path, amp in state.amplitudes.items():
            x, c, d = _c(path, i - 1), path[i - 1], path[i]
            for f in model.channels(a, b):
                coeff = model.F(x, a, b, d, c, f)
                if coeff:
                    new = path[: i - 1] + (f,) + path[i:]
                    out[new] = out.get(new, 0j) + coeff * amp
        return state._replace(out, paired=i)
    if direction == "backward":
        if state.paired != i:
            raise StateShapeError(f"State is not in the pair basis at position {i}")
        for path, amp in state.amplitudes.items():
            x, f, d = _c(path, i - 1), path[i - 1], path[i]
            for c in model.channels(x, a):
                coeff = model.F(x, a, b, d, c, f)
                if coeff:
                    new = path[: i - 1] + (c,) + path[i:]
                    out[new] = out.get(new, 0j) + coeff.conjugate() * amp
        return state._replace(out, paired=None)
    raise ValueError(f"Unknown direction '{direction}'")


def apply_braid(state: AnyonState, i: int, chirality: Union[Chirality, str] = Chirality.CCW) -> AnyonState:
    """Exchange quasiparticles ``i`` and ``i+1``; ``cw`` is the exact inverse of ``ccw``."""

    state._require_chain()
    state._check_position(i)
    chirality = Chirality(chirality)
    model = state.model
    a, b = state.externals[i - 1], state.externals[i]
    externals = list(state.externals)
    externals[i - 1], externals[i] = b, a
    out: Dict[Path, complex] = {}
    for path, amp in state.amplitudes.items():
        x, c, d = _c(path, i - 1), path[i - 1], path[i]
        for f in model.channels(a, b):
            into = model.F(x, a, b, d, c, f)
            if not into:
                continue
            if chirality is Chirality.CCW:
                phase = model.R(a, b, f)
            else:
                phase = model.R(b, a, f).conjugate()
            for c_new in model.channels(x, b):
                back = model.F(x, b, a, d, c_new, f)
                if back:
                    new = path[: i - 1] + (c_new,) + path[i:]
                    out[new] = out.get(new, 0j) + back.conjugate() * phase * into * amp
    return state._replace(out, externals=externals)


BraidLetter = Tuple[int, Union[Chirality, str]]


def braid_word(state: AnyonState, word: Iterable[BraidLetter]) -> AnyonState:
    for i, chirality in word:
        state = apply_braid(state, i, chirality)
    return state


def transport(state: AnyonState, source: int, target: int, chirality: Union[Chirality, str]) -> AnyonState:
    """Carry one quasiparticle from ``source`` to ``target`` by adjacent exchanges."""

    if source > target:
        word = [(m, chirality) for m in range(source - 1, target - 1, -1)]
    else:
        word = [(m, chirality) for m in range(source, target)]
    return braid_word(state, word)


def transport_block(
    state: AnyonState, start: int, length: int, target: int, chirality: Union[Chirality, str]
) -> AnyonState:
    """Carry the block ``start..start+length-1`` so that it begins at ``target``."""

    if target < start:
        for offset in range(length):
            state = transport(state, start + offset, target + offset, chirality)
    else:
        for offset in reversed(range(length)):
            state = transport(state, start + offset, target + offset, chirality)
    return state


# ----------------------------------------------------------------------
# Collective charge of a contiguous range
# ----------------------------------------------------------------------
def _inner_sequences(
    model: AnyonModelData, left: int, externals: Sequence[int], end: int
) -> List[Tuple[int, ...]]:
    """Left-nested labels ``c_i..c_{j-1}`` between a fixed ``c_{i-1}`` and ``c_j``."""

    def last(seq: Tuple[int, ...]) -> int:
        return seq[-1] if seq else left

    seqs: List[Tuple[int, ...]] = [()]
    for a in externals[:-1]:
        seqs = [s + (c,) for s in seqs for c in model.channels(last(s), a)]
    return [s for s in seqs if model.N(last(s), externals[-1], end)]


def _block_sequences(
    model: AnyonModelData, left: int, externals: Sequence[int], end: int
) -> List[Tuple[int, ...]]:
    """Block-internal labels ``s_{i+1}..s_j`` with ``s_j`` fusing with ``c_{i-1}`` into ``c_j``."""

    seqs: List[Tuple[int, ...]] = [()]
    for a in externals[1:]:
        seqs = [s + (g,) for s in seqs for g in model.channels(s[-1] if s else externals[0], a)]
    return [s for s in seqs if model.N(left, s[-1], end)]


def _range_transform(
    model: AnyonModelData, left: int, externals: Sequence[int], end: int
) -> Tuple[List[Tuple[int, ...]], List[Tuple[int, ...]], np.ndarray]:
    inner = _inner_sequences(model, left, externals, end)
    block = _block_sequences(model, left, externals, end)
    U = np.zeros((len(inner), len(block)), dtype=complex)
    for r, cs in enumerate(inner):
        chain = cs + (end,)
        for col, ss in enumerate(block):
            sseq = (externals[0],) + ss
            value = 1.0 + 0j
            for m in range(len(externals) - 1):
                value *= model.F(left, sseq[m], externals[m + 1], chain[m + 1], chain[m], sseq[m + 1])
                if not value:
                    break
            U[r, col] = value
    return inner, block, U


def charge_branches(state: AnyonState, i: int, j: int) -> Dict[int, AnyonState]:
    """Split a state by the collective charge of quasiparticles ``i..j``.

    Returns the unnormalized projections ``Pi_g |psi>`` for every charge ``g``
    with nonzero weight.
    """

    state._require_chain()
    if not 1 <= i <= j <= state.n:
        raise IndexError(f"Range [{i}..{j}] outside 1..{state.n}")
    model = state.model
    if i == j:
        return {state.externals[i - 1]: state._replace(dict(state.amplitudes), normalized=False)}

    groups: Dict[Tuple[Path, Path], Dict[Tuple[int, ...], complex]] = {}
    for path, amp in state.amplitudes.items():
        key = (path[: i - 1], path[j - 1 :])
        groups.setdefault(key, {})[path[i - 1 : j - 1]] = amp

    block_externals = state.externals[i - 1 : j]
    out: Dict[int, Dict[Path, complex]] = {}
    for (prefix, suffix), amps in groups.items():
        left = prefix[-1] if prefix else 0
        inner, block, U = _range_transform(model, left, block_externals, suffix[0])
        psi = np.array([amps.get(cs, 0j) for cs in inner])
        phi = U.T @ psi
        for g in sorted({ss[-1] for ss in block}):
            mask = np.array([ss[-1] == g for ss in block])
            back = U.conj() @ np.where(mask, phi, 0)
            target = out.setdefault(g, {})
            for r, cs in enumerate(inner):
                if abs(back[r]) > PRUNE:
                    target[prefix + cs + suffix] = back[r]
    return {
        g: state._replace(amps, normalized=False)
        for g, amps in sorted(out.items())
        if amps
    }


def project_charge(state: AnyonState, i: int, j: int, charge: int) -> Tuple[float, AnyonState]:
    """Return ``(<psi|Pi_g|psi>/<psi|psi>, Pi_g|psi>)`` for the range ``i..j``."""

    branches = charge_branches(state, i, j)
    projected = branches.get(charge)
    if projected is None:
        return 0.0, state._replace({}, normalized=False)
    norm = state.norm()
    if norm <= DEGENERATE:
        raise DegenerateStateError("Cannot project a zero state")
    return projected.norm() ** 2 / norm**2, projected


def probabilities(branches: Mapping[int, AnyonState]) -> Dict[int, float]:
    weights = {g: s.norm() ** 2 for g, s in branches.items()}
    total = sum(weights.values())
    if total <= DEGENERATE:
        raise DegenerateStateError("All measurement outcomes have vanishing probability")
    return {g: w / total for g, w in weights.items()}


def sample_branch(
    branches: Mapping[int, AnyonState], rng: np.random.Generator
) -> Tuple[int, float, AnyonState]:
    """Draw one outcome with Born weights; outcomes are scanned in ascending order."""

    probs = probabilities(branches)
    u = rng.random()
    acc = 0.0
    outcomes = sorted(probs)
    chosen = outcomes[-1]
    for g in outcomes:
        acc += probs[g]
        if u < acc:
            chosen = g
            break
    return chosen, probs[chosen], branches[chosen].normalize()


def measure_charge(
    state: AnyonState, i: int, j: int, rng: np.random.Generator
) -> Tuple[int, float, AnyonState]:
    return sample_branch(charge_branches(state, i, j), rng)


# ----------------------------------------------------------------------
# Pair creation, fusion and removal
# ----------------------------------------------------------------------
def create_vacuum_pair(state: AnyonState, charge: int, position: int) -> AnyonState:
    """Insert two quasiparticles of ``charge`` in their vacuum channel after particle ``position``."""

    state._require_chain()
    if not 0 <= position <= state.n:
        raise IndexError(f"Insertion point {position} outside 0..{state.n}")
    model = state.model
    if not model.N(charge, charge, 0):
        raise StateShapeError(f"Charge {charge} is not self-dual")
    externals = state.externals[:position] + (charge, charge) + state.externals[position:]
    out: Dict[Path, complex] = {}
    for path, amp in state.amplitudes.items():
        left = _c(path, position)
        for x in model.channels(left, charge):
            coeff = model.F(left, charge, charge, left, x, 0)
            if coeff:
                new = path[:position] + (x, left) + path[position:]
                out[new] = out.get(new, 0j) + coeff.conjugate() * amp
    return state._replace(out, externals=externals)


def pair_branches(state: AnyonState, i: int) -> Dict[int, AnyonState]:
    """Split by the fusion channel of quasiparticles ``i, i+1`` and replace the pair by it."""

    paired = apply_f_move(state, i, "forward")
    grouped: Dict[int, Dict[Path, complex]] = {}
    for path, amp in paired.amplitudes.items():
        f = path[i - 1]
        reduced = path[: i - 1] + path[i:]
        grouped.setdefault(f, {})[reduced] = amp
    out: Dict[int, AnyonState] = {}
    for f, amps in sorted(grouped.items()):
        externals = state.externals[: i - 1] + (f,) + state.externals[i + 1 :]
        out[f] = AnyonState(state.model, externals, amps, normalized=False)
    return out


def fuse_quasiparticles(
    state: AnyonState, i: int, rng: np.random.Generator
) -> Tuple[int, float, AnyonState]:
    return sample_branch(pair_branches(state, i), rng)


def remove_ancilla_pair(state: AnyonState, i: int, *, tol: float = 1e-10) -> AnyonState:
    """Delete the pair ``i, i+1`` when it is in the vacuum channel with certainty."""

    branches = pair_branches(state, i)
    total = sum(s.norm() ** 2 for s in branches.values())
    if total <= DEGENERATE:
        raise DegenerateStateError("Cannot remove a pair from a zero state")
    leaked = sum(s.norm() ** 2 for g, s in branches.items() if g != 0) / total
    if leaked > tol or 0 not in branches:
        raise EntanglementError(
            f"Pair ({i}, {i + 1}) is not in a definite vacuum channel (weight {leaked:.3g} elsewhere)",
            leaked,
        )
    vacuum = branches[0]
    externals = state.externals[: i - 1] + state.externals[i + 1 :]
    amps: Dict[Path, complex] = {}
    for path, amp in vacuum.amplitudes.items():
        # path holds the pair as a vacuum line at index i-1; drop it
        reduced = path[: i - 1] + path[i:]
        amps[reduced] = amp
    return AnyonState(state.model, externals, amps, normalized=state.normalized)


# ----------------------------------------------------------------------
# Blocks
# ----------------------------------------------------------------------
def concat(left: AnyonState, right: AnyonState) -> AnyonState:
    """Place ``right`` after ``left``; ``left`` must have total charge 0."""

    left._require_chain()
    right._require_chain()
    if left.model is not right.model:
        raise StateShapeError("States belong to different models")
    if left.total != 0:
        raise StateShapeError("Only total-charge-0 blocks can be concatenated on the left")
    amps = {
        lp + rp: lv * rv
        for lp, lv in left.amplitudes.items()
        for rp, rv in right.amplitudes.items()
    }
    return AnyonState(
        left.model,
        left.externals + right.externals,
        amps,
        normalized=left.normalized and right.normalized,
    )


def split_off_block(state: AnyonState, size: int, *, tol: float = 1e-10) -> Tuple[AnyonState, AnyonState]:
    """Factor a product state into its first ``size`` quasiparticles and the rest.

    The left block must have definite total charge 0. The right factor is
    normalized with its largest amplitude real and positive; the left factor
    carries the remaining norm and phase.
    """

    state._require_chain()
    if not 1 <= size < state.n:
        raise IndexError(f"Block size {size} outside 1..{state.n - 1}")
    if any(path[size - 1] != 0 for path in state.amplitudes):
        raise EntanglementError(f"First {size} quasiparticles do not fuse to the vacuum", 1.0)
    lefts = sorted({p[:size] for p in state.amplitudes})
    rights = sorted({p[size:] for p in state.amplitudes})
    matrix = np.array([[state.amplitude(lp + rp) for rp in rights] for lp in lefts])
    u, s, vh = np.linalg.svd(matrix)
    if len(s) > 1 and s[1] > tol * max(s[0], 1.0):
        raise EntanglementError("Blocks are entangled", float(s[1] ** 2))
    right_vec = vh[0]
    pivot = int(np.argmax(np.abs(right_vec)))
    phase = right_vec[pivot] / abs(right_vec[pivot])
    right_vec = right_vec / phase
    left_vec = u[:, 0] * s[0] * phase
    left = AnyonState(state.model, state.externals[:size], dict(zip(lefts, left_vec)), normalized=state.normalized)
    right = AnyonState(state.model, state.externals[size:], dict(zip(rights, right_vec)))
    return left, right


# ----------------------------------------------------------------------
# Dense helpers
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ChainBasis:
    externals: Tuple[int, ...]
    paths: Tuple[Path, ...]

    @classmethod
    def of(cls, model: AnyonModelData, externals: Sequence[int], total: Optional[int] = None) -> "ChainBasis":
        return cls(tuple(externals), tuple(basis_paths(model, externals, total)))

    def __len__(self) -> int:
        return len(self.paths)


def operator_matrix(
    fn: Callable[[AnyonState], AnyonState],
    model: AnyonModelData,
    source: ChainBasis,
    target: Optional[ChainBasis] = None,
) -> np.ndarray:
    """Dense matrix of a linear state map, column ``k`` = image of basis path ``k``."""

    matrix_columns = []
    resolved_target = target
    for path in source.paths:
        image = fn(AnyonState(model, source.externals, {path: 1.0}))
        if resolved_target is None:
            resolved_target = ChainBasis.of(model, image.externals)
        if image.externals != resolved_target.externals and image.amplitudes:
            raise StateShapeError(
                f"Image externals {image.externals} differ from {resolved_target.externals}"
            )
        matrix_columns.append(image.vector(resolved_target.paths))
    return np.array(matrix_columns).T


def random_state(
    model: AnyonModelData,
    externals: Sequence[int],
    rng: np.random.Generator,
    total: Optional[int] = None,
) -> AnyonState:
    paths = basis_paths(model, externals, total)
    if not paths:
        raise StateShapeError(f"No chain labels for {tuple(externals)} with total {total}")
    values = rng.normal(size=len(paths)) + 1j * rng.normal(size=len(paths))
    return AnyonState(model, externals, dict(zip(paths, values)), normalized=False).normalize()
