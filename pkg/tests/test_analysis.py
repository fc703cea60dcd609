from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from services.analysis import (
    BQP_LIMIT,
    GENERATOR_SETS,
    UnknownGateError,
    WalkDomainError,
    bqp_limit,
    close_group,
    continued_fraction,
    density_witness,
    generator_set,
    is_closed,
    letter_gates,
    named_target,
    path_counts,
    projective_distance,
    rotation_coordinates,
    synthesize_word,
    walk_exact,
    walk_monte_carlo,
)
from services.protocol_runner import get_protocol, run_shots
from services.qubit_encodings import GateMatrix, hadamard, identity, phase_canonical


@pytest.mark.parametrize("name,size", [("braid1111", 12), ("braid1221", 6), ("xzb", 12)])
def test_finite_closures(name, size):
    result = close_group(generator_set(name), name=name)
    assert result.finite
    assert result.size == size
    assert is_closed(result.elements)
    payload = result.to_payload().to_json_dict()
    assert payload["generatorSet"] == name
    assert payload["size"] == size


def test_k_gate_breaks_finiteness():
    result = close_group(generator_set("zbk"), cap=300, name="zbk")
    assert not result.finite
    assert result.size == 301


@pytest.mark.parametrize("shift", [1e-13, 3e-12, 7e-11, 2e-10])
def test_closure_merges_near_equal_elements(shift):
    Z = letter_gates()["Z"]
    nudged = GateMatrix(np.exp(0.7j) * Z.entries @ np.diag([1.0, np.exp(1j * shift)]), "Z'")
    result = close_group([Z, nudged])
    assert result.finite
    assert result.size == 2
    assert is_closed(result.elements)


def test_is_closed_detects_missing_product():
    S = GateMatrix(np.diag([1.0, 1j]), "S")
    assert not is_closed([identity(2), S])
    assert is_closed([identity(2), S, GateMatrix(np.diag([1.0, -1.0])), GateMatrix(np.diag([1.0, -1j]))])


def test_generator_set_names():
    assert set(GENERATOR_SETS) == {"braid1111", "braid1221", "xzb", "zbk"}
    with pytest.raises(UnknownGateError):
        generator_set("clifford")


def test_braid1221_relations_up_to_phase():
    gates = letter_gates()
    Z, B, B_inv = gates["Z"].entries, gates["B"].entries, gates["B^-1"].entries
    assert np.allclose(phase_canonical(Z @ Z), np.eye(2), atol=1e-10)
    assert np.allclose(phase_canonical(B @ B @ B), np.eye(2), atol=1e-10)
    assert np.allclose(phase_canonical(B @ Z), phase_canonical(Z @ B_inv), atol=1e-10)


def test_projective_distance_ignores_phase():
    H = hadamard().entries
    assert projective_distance(H, np.exp(0.4j) * H) < 1e-7
    assert projective_distance(H, np.eye(2)) > 0.5


def test_rotation_coordinates_are_phase_blind():
    H = hadamard().entries
    coords = rotation_coordinates(np.array([H, np.exp(1.3j) * H, np.eye(2)]))
    assert coords.shape == (3, 9)
    assert np.allclose(coords[0], coords[1])
    assert np.allclose(coords[2], np.eye(3).ravel())


def test_density_witness():
    payload = density_witness()
    assert payload.commutator_distance > 1e-6
    assert payload.self_commutator_distance < 1e-12
    assert payload.b_k_commute is False
    assert payload.cos_alpha == pytest.approx(-1.0 / 7.0)
    assert payload.exp_i_alpha.re == pytest.approx(-1.0 / 7.0)
    assert payload.continued_fraction[0] == 0


def test_continued_fraction_of_rational():
    assert continued_fraction(0.375) == [0, 2, 1, 2]


# ----------------------------------------------------------------------
# Random walk
# ----------------------------------------------------------------------
@pytest.mark.parametrize(
    "n,expected",
    [(1, Fraction(1, 2)), (3, Fraction(3, 8)), (5, Fraction(5, 16)), (7, Fraction(35, 128))],
)
def test_walk_exact_small(n, expected):
    stats = walk_exact(n)
    assert stats.exact == expected
    assert stats.never_positive == pytest.approx(float(expected))
    assert stats.gamma_form == pytest.approx(float(expected), rel=1e-12)


def test_walk_exact_matches_double_factorial_up_to_21():
    for n in range(1, 22, 2):
        numerator = math.prod(range(n, 0, -2))
        denominator = math.prod(range(n + 1, 0, -2))
        assert walk_exact(n).exact == Fraction(numerator, denominator)


def test_path_count_recurrence():
    for m in range(1, 21):
        counts = path_counts(m)
        assert (m + 1) * counts[1] == 2 * sum(counts.values())


def test_walk_asymptotic_ratio():
    stats = walk_exact(10001)
    assert stats.exact is None
    assert stats.never_positive / stats.asymptotic == pytest.approx(1.0, rel=0.02)


def test_walk_rejects_even_lengths():
    with pytest.raises(WalkDomainError):
        walk_exact(4)
    with pytest.raises(WalkDomainError):
        walk_exact(0)


@pytest.mark.parametrize("n", [1, 3, 5, 7])
def test_walk_monte_carlo_agrees(n):
    trials = 100_000
    p = float(walk_exact(n).exact)
    estimate = walk_monte_carlo(n, trials, np.random.default_rng(n))
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(estimate - p) < 4 * sigma + 1e-12


def test_walk_payload():
    payload = walk_exact(7).to_payload(monte_carlo=0.27, trials=10).to_json_dict()
    assert payload["closedForm"] == "35/128"
    assert payload["neverPositive"] == pytest.approx(0.2734375)
    assert payload["pathCounts"] == {"1": 14, "3": 14, "5": 6, "7": 1}


@pytest.mark.slow
def test_k_walk_protocol_matches_walk_law():
    trace = run_shots(get_protocol("k-walk"), {"n": 1}, seed=2, shots=120, threads=4)
    failure = trace.aggregate.get("exhausted", 0.0)
    sigma = math.sqrt(0.25 / 120)
    assert abs(failure - 0.5) < 4 * sigma


def test_bqp_limit():
    payload = bqp_limit([1, 2, 500])
    first, second, last = payload.rows
    assert first.steps == 1 and first.success == pytest.approx(0.5)
    assert second.steps == 3 and second.p_fail == pytest.approx(3 / 8)
    assert last.steps == 249_999
    assert last.success == pytest.approx(BQP_LIMIT, rel=0.02)
    assert payload.limit == pytest.approx(math.exp(-math.sqrt(2 / math.pi)))


# ----------------------------------------------------------------------
# Synthesis
# ----------------------------------------------------------------------
def test_synthesize_single_letter():
    result = synthesize_word(named_target("Z"), max_len=4)
    assert result.word is not None
    assert result.word.letters == ("Z",)
    assert result.distance < 1e-6


def test_synthesize_inverse_braid_from_positive_letters():
    result = synthesize_word(named_target("B^-1"), alphabet=("Z", "B"), max_len=4)
    assert result.word.letters == ("B", "B")


def test_synthesize_reports_failure():
    result = synthesize_word(hadamard(), alphabet=("Z", "B"), max_len=6, eps=0.05)
    assert result.word is None
    payload = result.to_payload("H").to_json_dict()
    assert payload["found"] is False
    assert payload["word"] == []


def test_synthesize_rejects_unknown_letters():
    with pytest.raises(UnknownGateError):
        synthesize_word(hadamard(), alphabet=("Z", "T"))
    with pytest.raises(UnknownGateError):
        named_target("T")


@pytest.mark.slow
def test_synthesize_hadamard():
    result = synthesize_word(hadamard(), max_len=16, eps=0.05)
    assert result.word is not None
    assert result.word.length <= 16
    value = np.eye(2, dtype=complex)
    gates = letter_gates()
    for letter in result.word.letters:
        value = value @ gates[letter].entries
    assert projective_distance(value, hadamard().entries) < 0.05
    assert result.to_payload("H").to_json_dict()["kCount"] == result.word.k_count
