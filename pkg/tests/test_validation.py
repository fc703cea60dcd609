from __future__ import annotations

import json

import pytest

from utils.validation import (
    PAYLOAD_MODELS,
    PayloadValidationError,
    load_published_schema,
    schema_for,
    validate_payload,
    write_schemas,
)


def _walk_payload():
    return {"n": 3, "m": 1, "neverPositive": 0.375, "gammaForm": 0.375, "asymptotic": 0.46}


def test_validate_accepts_camel_case_payload():
    model = validate_payload("walk", _walk_payload())
    assert model.never_positive == pytest.approx(0.375)


def test_validate_reports_field_locations():
    bad = _walk_payload()
    bad["extra"] = 1
    del bad["m"]
    with pytest.raises(PayloadValidationError) as excinfo:
        validate_payload("walk", bad)
    messages = excinfo.value.messages
    assert any(message.startswith("m:") for message in messages)
    assert any(message.startswith("extra:") for message in messages)


def test_trace_record_probability_bounds():
    payload = {
        "protocol": "merge",
        "seed": 0,
        "shots": 1,
        "records": [{"shot": 0, "step": "x1", "outcome": 0, "prob": 0.0}],
        "aggregate": {},
        "successes": 0,
    }
    with pytest.raises(PayloadValidationError):
        validate_payload("protocol-trace", payload)


def test_frobenius_schur_signs_enforced():
    with pytest.raises(PayloadValidationError):
        validate_payload(
            "model-dump",
            {
                "spec": {"family": "JK", "level": 1},
                "charges": [0, 1],
                "fusion": [[0]],
                "fSymbols": [],
                "rSymbols": [],
                "qdims": [1.0, 1.0],
                "totalDim": 1.4,
                "twists": [],
                "sMatrix": [],
                "frobSchur": [1, 0],
            },
        )


def test_unknown_kind():
    with pytest.raises(PayloadValidationError) as excinfo:
        validate_payload("teleport", {})
    assert excinfo.value.kind == "teleport"


@pytest.mark.parametrize("kind", sorted(PAYLOAD_MODELS))
def test_published_schema_matches_model(kind):
    published = load_published_schema(kind)
    generated = schema_for(kind)
    assert published["title"] == generated["title"]
    assert set(published["properties"]) == set(generated["properties"])
    assert set(published.get("required", [])) == set(generated.get("required", []))


def test_write_schemas(tmp_path):
    written = write_schemas(tmp_path)
    assert {path.name for path in written} == {f"{kind}.schema.json" for kind in PAYLOAD_MODELS}
    first = json.loads(written[0].read_text(encoding="utf-8"))
    assert first == schema_for(next(iter(PAYLOAD_MODELS)))
