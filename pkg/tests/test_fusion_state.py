from __future__ import annotations

import numpy as np
import pytest

from services.fusion_state import (
    AnyonState,
    ChainBasis,
    Chirality,
    DegenerateStateError,
    EntanglementError,
    StateShapeError,
    apply_braid,
    apply_f_move,
    basis_paths,
    braid_word,
    charge_branches,
    concat,
    create_vacuum_pair,
    fuse_quasiparticles,
    inner_product,
    measure_charge,
    operator_matrix,
    pair_branches,
    probabilities,
    project_charge,
    random_state,
    remove_ancilla_pair,
    sample_branch,
    split_off_block,
    transport_block,
)
from services.qubit_encodings import EncodingKind, encode, register_from_vector


def test_basis_paths_for_four_spin_halves(jk4):
    assert basis_paths(jk4, (1, 1, 1, 1), total=0) == [(1, 0, 1, 0), (1, 2, 1, 0)]
    assert len(ChainBasis.of(jk4, (1, 1, 1, 1))) == len(basis_paths(jk4, (1, 1, 1, 1)))


def test_basis_rejects_inadmissible_path(jk4):
    with pytest.raises(StateShapeError):
        AnyonState.basis(jk4, (1, 1), (1, 1))


def test_zero_state_cannot_be_normalized(jk4):
    with pytest.raises(DegenerateStateError):
        AnyonState(jk4, (1, 1), {}).normalize()


def test_braid_then_inverse_is_identity(jk4, rng):
    state = random_state(jk4, (1, 2, 3, 1), rng)
    back = apply_braid(apply_braid(state, 2, Chirality.CCW), 2, Chirality.CW)
    assert back.externals == state.externals
    assert back.distance(state) < 1e-12


def test_yang_baxter(jk4, rng):
    state = random_state(jk4, (1, 2, 3, 1), rng)
    lhs = braid_word(state, [(1, "ccw"), (2, "ccw"), (1, "ccw")])
    rhs = braid_word(state, [(2, "ccw"), (1, "ccw"), (2, "ccw")])
    assert lhs.externals == rhs.externals == (3, 2, 1, 1)
    assert lhs.distance(rhs) < 1e-12


def test_distant_generators_commute(su2_4, rng):
    state = random_state(su2_4, (1, 1, 2, 1, 1), rng)
    lhs = braid_word(state, [(1, "ccw"), (3, "cw")])
    rhs = braid_word(state, [(3, "cw"), (1, "ccw")])
    assert lhs.distance(rhs) < 1e-12


def test_braid_matrix_is_unitary(jk4):
    basis = ChainBasis.of(jk4, (1, 1, 1, 1), total=0)
    matrix = operator_matrix(lambda s: apply_braid(s, 2), jk4, basis)
    assert np.allclose(matrix @ matrix.conj().T, np.eye(len(basis)), atol=1e-12)


def test_f_move_round_trip(jk4, rng):
    state = random_state(jk4, (1, 2, 1, 1), rng)
    paired = apply_f_move(state, 2, "forward")
    assert paired.paired == 2
    with pytest.raises(StateShapeError):
        apply_braid(paired, 1)
    assert apply_f_move(paired, 2, "backward").distance(state) < 1e-12


def test_transport_block_undone_by_reverse_transport(jk4, rng):
    state = random_state(jk4, (1, 2, 1, 3), rng)
    moved = transport_block(state, 1, 2, 3, Chirality.CCW)
    assert moved.externals == (1, 3, 1, 2)
    back = transport_block(moved, 3, 2, 1, Chirality.CW)
    assert back.externals == state.externals
    assert back.distance(state) < 1e-12


def test_norm_preserved_under_random_braids(jk4):
    fuzz = np.random.default_rng(7)
    for _ in range(200):
        n = int(fuzz.integers(3, 6))
        externals = tuple(int(a) for a in fuzz.integers(1, 4, size=n))
        state = random_state(jk4, externals, fuzz)
        word = [
            (int(fuzz.integers(1, n)), "ccw" if fuzz.random() < 0.5 else "cw")
            for _ in range(int(fuzz.integers(1, 8)))
        ]
        assert braid_word(state, word).norm() == pytest.approx(1.0, abs=1e-10)


def test_charge_branches_complete_and_orthogonal(jk4, rng):
    state = random_state(jk4, (1, 1, 2, 1, 1), rng)
    branches = charge_branches(state, 2, 4)
    assert len(branches) > 1
    total = sum(b.norm() ** 2 for b in branches.values())
    assert total == pytest.approx(1.0, abs=1e-12)
    keys = sorted(branches)
    for x in keys:
        for y in keys:
            if x < y:
                assert abs(inner_product(branches[x], branches[y])) < 1e-12
    summed = {}
    for branch in branches.values():
        for path, amp in branch.amplitudes.items():
            summed[path] = summed.get(path, 0j) + amp
    assert AnyonState(jk4, state.externals, summed).distance(state) < 1e-12


def test_prefix_range_charge_reads_chain_label(jk4, rng):
    state = random_state(jk4, (1, 1, 1, 1), rng)
    for j in (2, 3):
        for charge, branch in charge_branches(state, 1, j).items():
            assert all(path[j - 1] == charge for path in branch.amplitudes)


def test_charge_branches_are_projectors(jk4, rng):
    state = random_state(jk4, (1, 2, 1, 1), rng)
    for charge, branch in charge_branches(state, 2, 3).items():
        again = charge_branches(branch, 2, 3)
        assert set(again) == {charge}
        assert again[charge].distance(branch) < 1e-12


def test_probabilities_and_sampling(jk4):
    state = AnyonState.basis(jk4, (1, 1, 1, 1), (1, 0, 1, 0))
    branches = charge_branches(state, 2, 3)
    probs = probabilities(branches)
    assert sum(probs.values()) == pytest.approx(1.0)
    # (1,1) fused to vacuum on the outer pair: middle pair is 0 w.p. 1/d^2
    assert probs[0] == pytest.approx(1.0 / 3.0)
    outcome, p, post = sample_branch(branches, np.random.default_rng(0))
    assert p == pytest.approx(probs[outcome])
    assert post.norm() == pytest.approx(1.0)


def test_vacuum_pair_create_and_remove(jk4, rng):
    state = random_state(jk4, (1, 2, 1), rng)
    with_pair = create_vacuum_pair(state, 2, 1)
    assert with_pair.externals == (1, 2, 2, 2, 1)
    assert with_pair.norm() == pytest.approx(1.0)
    restored = remove_ancilla_pair(with_pair, 2)
    assert restored.externals == state.externals
    assert restored.distance(state) < 1e-12


def test_remove_pair_outside_vacuum_raises(jk4):
    state = AnyonState.basis(jk4, (1, 1), (1, 2))
    with pytest.raises(EntanglementError):
        remove_ancilla_pair(state, 1)


def test_concat_then_split(jk4, rng):
    left = AnyonState.basis(jk4, (1, 1), (1, 0))
    right = random_state(jk4, (1, 1, 1), rng, total=1)
    joined = concat(left, right)
    assert joined.externals == (1, 1, 1, 1, 1)
    first, second = split_off_block(joined, 2)
    overlap = inner_product(second, right)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-12)
    assert first.norm() == pytest.approx(1.0)


def test_split_rejects_nonvacuum_block(jk4, rng):
    state = random_state(jk4, (1, 1, 1, 1), rng, total=0)
    with pytest.raises(EntanglementError):
        split_off_block(state, 2)


def test_payload_round_trip(jk4, rng):
    state = random_state(jk4, (1, 1, 2), rng, total=2)
    payload = state.to_payload()
    assert payload.total == 2
    assert AnyonState.from_payload(jk4, payload).distance(state) < 1e-12


# ----------------------------------------------------------------------
# Collective-charge projectors against a dense oracle
# ----------------------------------------------------------------------
def _dense_charge_projectors(model, externals, i, j):
    """Projectors onto the charge of ``i..j`` built by fusing the range pair by pair."""

    paths = basis_paths(model, externals)
    rows = {}
    for column, path in enumerate(paths):
        fused = {(): AnyonState(model, externals, {path: 1.0})}
        for _ in range(j - i):
            fused = {
                history + (f,): branch
                for history, state in fused.items()
                for f, branch in pair_branches(state, i).items()
            }
        for history, state in fused.items():
            for reduced, amp in state.amplitudes.items():
                key = (state.externals[i - 1], history, reduced)
                rows.setdefault(key, np.zeros(len(paths), dtype=complex))[column] += amp
    projectors = {}
    for (charge, _, _), row in rows.items():
        projectors[charge] = projectors.get(charge, 0) + np.outer(row.conj(), row)
    return paths, projectors


@pytest.mark.parametrize("case", range(200))
def test_charge_projectors_match_dense_oracle(case, jk4, su2_4):
    fuzz = np.random.default_rng(5000 + case)
    model = jk4 if case % 2 else su2_4
    n = int(fuzz.integers(2, 6))
    externals = tuple(int(a) for a in fuzz.integers(1, 5, size=n))
    i = int(fuzz.integers(1, n))
    j = int(fuzz.integers(i + 1, n + 1))
    paths, oracle = _dense_charge_projectors(model, externals, i, j)
    zero = np.zeros((len(paths), len(paths)))

    assert np.allclose(sum(oracle.values()), np.eye(len(paths)), atol=1e-10)
    for a, P in oracle.items():
        assert np.allclose(P @ P, P, atol=1e-10)
        assert np.allclose(P, P.conj().T, atol=1e-10)
        for b, Q in oracle.items():
            if a != b:
                assert np.allclose(P @ Q, zero, atol=1e-10)

    state = random_state(model, externals, fuzz)
    psi = state.vector(paths)
    branches = charge_branches(state, i, j)
    vectors = {a: branch.vector(paths) for a, branch in branches.items()}
    for a in set(vectors) | set(oracle):
        expected = oracle.get(a, zero) @ psi
        assert np.allclose(vectors.get(a, np.zeros(len(paths))), expected, atol=1e-10)
    assert np.allclose(sum(vectors.values()), psi, atol=1e-10)
    for a, branch in branches.items():
        again = charge_branches(branch, i, j)
        for b, projected in again.items():
            assert np.allclose(projected.vector(paths), vectors[a] if a == b else 0, atol=1e-10)
        for b in branches:
            if a < b:
                assert abs(inner_product(branch, branches[b])) < 1e-10


# ----------------------------------------------------------------------
# Single-outcome measurement and fusion
# ----------------------------------------------------------------------
def test_project_charge_on_1221_qubit():
    plus = register_from_vector([EncodingKind.E1221], np.array([1.0, 1.0]) / np.sqrt(2.0)).state
    one = encode("1", EncodingKind.E1221).state
    probability, projected = project_charge(plus, 2, 3, 0)
    assert probability == pytest.approx(1.0, abs=1e-12)
    assert projected.distance(plus) < 1e-12
    assert project_charge(one, 2, 3, 0)[0] == pytest.approx(0.5, abs=1e-12)
    assert project_charge(one, 2, 3, 2)[0] == pytest.approx(0.5, abs=1e-12)
    probability, projected = project_charge(one, 2, 3, 4)
    assert probability == 0.0
    assert projected.norm() == 0.0


def test_measure_charge_is_seeded(jk4, rng):
    state = random_state(jk4, (1, 2, 1, 1), rng)
    first = [measure_charge(state, 2, 3, np.random.default_rng(99))[0] for _ in range(3)]
    stream_a = np.random.default_rng(31)
    stream_b = np.random.default_rng(31)
    draws_a = [measure_charge(state, 2, 3, stream_a)[0] for _ in range(50)]
    draws_b = [measure_charge(state, 2, 3, stream_b)[0] for _ in range(50)]
    assert len(set(first)) == 1
    assert draws_a == draws_b


@pytest.mark.slow
def test_measure_charge_frequencies_follow_projector(jk4, rng):
    state = random_state(jk4, (1, 2, 1, 1), rng)
    expected = {g: project_charge(state, 2, 3, g)[0] for g in charge_branches(state, 2, 3)}
    shots = 100_000
    stream = np.random.default_rng(2024)
    counts = {g: 0 for g in expected}
    for _ in range(shots):
        outcome, probability, post = measure_charge(state, 2, 3, stream)
        counts[outcome] += 1
    assert probability == pytest.approx(expected[outcome])
    assert post.norm() == pytest.approx(1.0)
    for g, p in expected.items():
        sigma = np.sqrt(p * (1.0 - p) / shots)
        assert abs(counts[g] / shots - p) <= 4.0 * sigma + 1e-12


def test_fusing_charge_four_with_two_is_deterministic(jk4):
    fuzz = np.random.default_rng(12)
    for _ in range(10):
        state = random_state(jk4, (1, 4, 2, 1), fuzz)
        outcome, probability, fused = fuse_quasiparticles(state, 2, fuzz)
        assert outcome == 2
        assert probability == pytest.approx(1.0, abs=1e-12)
        assert fused.externals == (1, 2, 1)
        assert fused.norm() == pytest.approx(1.0)
