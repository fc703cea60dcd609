from __future__ import annotations

import math

import numpy as np
import pytest

from models import TheorySpec
from services.anyon_model import build_model
from services.fusion_state import AnyonState, Chirality
from services.qubit_encodings import (
    EXP_I_ALPHA,
    EncodingError,
    EncodingKind,
    LeakageError,
    QubitRegister,
    apply_braid_gate,
    apply_logical_gate,
    apply_x_via_fusion,
    approximate_hadamard,
    braid_gate_1111,
    braid_gate_1221,
    controlled_z,
    decode,
    encode,
    encode_state,
    gates_dump,
    hadamard,
    insert_register,
    logical_bitstrings,
    logical_operator,
    pauli_x,
    phase_canonical,
    tensor,
)


@pytest.mark.parametrize(
    "text,kind",
    [
        ("1111", EncodingKind.E1111),
        ("e1221", EncodingKind.E1221),
        ("122221", EncodingKind.E122221),
        ("1221x1221", EncodingKind.E1221_PAIR),
    ],
)
def test_parse_encoding(text, kind):
    assert EncodingKind.parse(text) is kind


def test_parse_unknown_encoding():
    with pytest.raises(EncodingError):
        EncodingKind.parse("1331")


def test_logical_paths():
    assert encode("1", EncodingKind.E1111).state.amplitudes == {(1, 2, 1, 0): 1.0}
    assert encode("0", EncodingKind.E1221).state.amplitudes == {(1, 1, 1, 0): 1.0}
    assert encode("10", EncodingKind.E122221).state.amplitudes == {(1, 3, 1, 1, 1, 0): 1.0}
    assert logical_bitstrings(EncodingKind.E1221_PAIR) == ["00", "01", "10", "11"]


def test_encode_rejects_bad_bitstrings():
    with pytest.raises(EncodingError):
        encode("2", EncodingKind.E1221)
    with pytest.raises(EncodingError):
        encode("0", EncodingKind.E122221)


def test_encode_needs_level_four():
    with pytest.raises(EncodingError):
        encode("0", EncodingKind.E1221, build_model(TheorySpec.jk(3)))


def test_encode_state_normalizes():
    register = encode_state({"0": 1.0, "1": 1.0}, EncodingKind.E1221)
    assert decode(register) == pytest.approx({"0": 1 / math.sqrt(2), "1": 1 / math.sqrt(2)})


def test_leaked_support_is_reported(jk4):
    state = AnyonState(jk4, (1, 2, 2, 2, 2, 1), {(1, 1, 3, 1, 1, 0): 1.0})
    register = QubitRegister((EncodingKind.E122221,), state)
    assert register.leaked_mass() == pytest.approx(1.0)
    with pytest.raises(LeakageError):
        decode(register)


@pytest.mark.parametrize(
    "kind,name,builder",
    [
        (EncodingKind.E1111, "R", braid_gate_1111),
        (EncodingKind.E1111, "G", braid_gate_1111),
        (EncodingKind.E1221, "Z", braid_gate_1221),
        (EncodingKind.E1221, "B", braid_gate_1221),
    ],
)
def test_braid_gate_matches_state_braid(kind, name, builder):
    on_states = logical_operator(kind, lambda r: apply_braid_gate(r, name))
    gate = builder(name)
    assert gate.is_unitary()
    assert np.allclose(on_states, gate.entries, atol=1e-12)
    inverse = logical_operator(kind, lambda r: apply_braid_gate(r, name, inverse=True))
    assert np.allclose(inverse, builder(name, chirality=Chirality.CW).entries, atol=1e-12)
    assert np.allclose(inverse @ on_states, np.eye(2), atol=1e-12)


def test_r_gate_is_diagonal_r_symbols(jk4):
    gate = braid_gate_1111("R", jk4)
    assert np.allclose(np.diag(gate.entries), [jk4.R(1, 1, 0), jk4.R(1, 1, 2)])


def test_x_via_fusion_is_pauli_x():
    matrix = logical_operator(EncodingKind.E1221, apply_x_via_fusion)
    assert np.allclose(phase_canonical(matrix), pauli_x().entries, atol=1e-12)


def test_x_via_fusion_rejects_1111():
    with pytest.raises(EncodingError):
        apply_x_via_fusion(encode("0", EncodingKind.E1111))


def test_logical_gate_on_single_and_pair_registers():
    register = apply_logical_gate(encode("0", EncodingKind.E1221), hadamard())
    assert register.logical_vector() == pytest.approx(np.array([1, 1]) / math.sqrt(2))

    pair = tensor(encode("1", EncodingKind.E1221), encode("1", EncodingKind.E1221))
    assert pair.kind is EncodingKind.E1221_PAIR
    flipped = apply_logical_gate(pair, controlled_z())
    assert decode(flipped)["11"] == pytest.approx(-1.0)

    second = apply_logical_gate(encode("00", EncodingKind.E1221_PAIR), pauli_x(), qubit=1)
    assert decode(second)["01"] == pytest.approx(1.0)


def test_insert_register_keeps_both_registers():
    outer = encode("10", EncodingKind.E1221_PAIR)
    inner = encode("1", EncodingKind.E1111)
    combined = insert_register(outer, 0, inner)
    assert combined.blocks == (EncodingKind.E1221, EncodingKind.E1111, EncodingKind.E1221)
    assert combined.n_qubits == 3
    assert decode(combined)["110"] == pytest.approx(1.0)


def test_k_gate_phase_is_unit():
    assert abs(EXP_I_ALPHA) == pytest.approx(1.0)


def test_approximate_hadamard_at_zero_is_exact():
    assert np.allclose(approximate_hadamard(0.0).entries, hadamard().entries)
    assert approximate_hadamard(0.1).canonical_distance(hadamard()) > 0


def test_gates_dump_lists_braids_and_fusion_x():
    dump = gates_dump(EncodingKind.E1221).to_json_dict()
    assert [gate["name"] for gate in dump["gates"]] == ["Z", "B", "Z_inv", "B_inv", "X"]
    assert all(gate["unitary"] for gate in dump["gates"])
    assert dump["theory"] == "JK_4"


def test_gates_dump_rejects_multi_qubit_encoding():
    with pytest.raises(EncodingError):
        gates_dump(EncodingKind.E122221)
