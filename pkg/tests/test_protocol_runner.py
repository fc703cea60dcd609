from __future__ import annotations

import json
import math

import pytest

from services.protocol_runner import (
    PROTOCOLS,
    UnknownProtocolError,
    build_branch_tree,
    get_protocol,
    run_shots,
)
from utils.run_logger import RunLogger
from utils.validation import validate_payload


def test_registry_names():
    assert {
        "switch-encoding",
        "merge",
        "split",
        "tqf",
        "phase-gate",
        "prepare-k",
        "k-walk",
        "bell",
        "cz",
    } <= set(PROTOCOLS)


def test_unknown_protocol():
    with pytest.raises(UnknownProtocolError):
        get_protocol("teleport")


def test_unknown_parameter_rejected():
    with pytest.raises(ValueError):
        get_protocol("merge").resolve({"phi": 1.0})
    assert get_protocol("phase-gate").resolve({"phi": 0.5}) == {"phi": 0.5}


@pytest.mark.parametrize("name", ["switch-encoding", "tqf", "prepare-plus", "phase-gate"])
def test_branch_probabilities_sum_to_one(name):
    tree = build_branch_tree(get_protocol(name), max_attempts=2, with_maps=False)
    assert tree.total_probability == pytest.approx(1.0, abs=1e-12)
    nodes = tree.nodes()
    assert nodes[()] == pytest.approx(1.0, abs=1e-12)


def test_branch_payload_validates():
    tree = build_branch_tree(get_protocol("tqf"), max_attempts=1)
    payload = tree.to_payload().to_json_dict()
    assert payload["totalProbability"] == pytest.approx(1.0)
    assert any(leaf["map"] for leaf in payload["leaves"] if leaf["success"])
    validate_payload("protocol-branches", payload)


def test_run_shots_is_deterministic_across_threads():
    definition = get_protocol("switch-encoding")
    single = run_shots(definition, seed=11, shots=24, threads=1)
    pooled = run_shots(definition, seed=11, shots=24, threads=4)
    assert single.to_json_dict() == pooled.to_json_dict()


def test_run_shots_prefix_stable_when_adding_shots():
    definition = get_protocol("tqf")
    short = run_shots(definition, seed=5, shots=5)
    longer = run_shots(definition, seed=5, shots=9)
    first = [r for r in longer.records if r.shot < 5]
    assert [(r.shot, r.step, r.outcome) for r in first] == [
        (r.shot, r.step, r.outcome) for r in short.records
    ]


def test_run_shots_aggregate_and_timeouts():
    trace = run_shots(get_protocol("merge"), seed=3, shots=30, max_attempts=1)
    assert sum(trace.aggregate.values()) == pytest.approx(1.0)
    assert set(trace.aggregate) <= {"attempts=1", "timeout"}
    assert trace.successes == round(trace.aggregate.get("attempts=1", 0.0) * 30)
    validate_payload("protocol-trace", trace.to_json_dict())


def test_run_shots_logs_events(tmp_path):
    path = tmp_path / "run.log"
    run_shots(get_protocol("prepare-plus"), seed=1, shots=2, logger=RunLogger(path))
    events = [json.loads(line)["event"] for line in path.read_text(encoding="utf-8").splitlines()]
    assert events[0] == "protocol_run"
    assert events[-1] == "protocol_run_complete"
    assert events.count("protocol_step") == 2


@pytest.mark.slow
@pytest.mark.parametrize("name,attempts", [("merge", 3), ("switch-encoding", 1)])
def test_shot_frequencies_match_branch_tree(name, attempts):
    definition = get_protocol(name)
    expected = build_branch_tree(definition, max_attempts=attempts, with_maps=False).by_label()
    shots = 10_000
    trace = run_shots(definition, seed=29, shots=shots, threads=4, max_attempts=attempts)
    assert set(trace.aggregate) <= set(expected)
    for label, p in expected.items():
        sigma = math.sqrt(p * (1.0 - p) / shots)
        assert abs(trace.aggregate.get(label, 0.0) - p) <= 4.0 * sigma + 1e-12
