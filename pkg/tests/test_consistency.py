from __future__ import annotations

import pytest

from models import Family, TheorySpec
from services.anyon_model import ConsistencyError, build_model, derived_invariants
from services.consistency import semion_gluing_check, verify_consistency
from utils.run_logger import RunLogger


@pytest.mark.parametrize("family", [Family.SU2, Family.JK, Family.JK_CONJUGATE])
@pytest.mark.parametrize("level", [1, 2, 3, 4, 5, 6])
def test_generated_data_is_consistent(family, level):
    report = verify_consistency(build_model(TheorySpec(family=family, level=level)))
    assert report.passed
    assert {"pentagon", "hexagon", "hexagon_inverse", "f_unitarity", "s_unitarity"} <= set(report.residuals)


def test_jk4_specific_checks_recorded(jk4):
    report = verify_consistency(jk4)
    assert "jk4_table" in report.residuals
    assert "jk_bending" in report.residuals
    assert report.residuals["pentagon"] < 1e-10


def test_semion_gluing_holds():
    assert semion_gluing_check() is True


def test_tampered_f_symbol_is_reported(jk4):
    broken = jk4.with_f_override((1, 1, 1, 1, 0, 2), 0.5)
    with pytest.raises(ConsistencyError) as excinfo:
        verify_consistency(broken)
    assert "pentagon" in str(excinfo.value)
    assert any(item["name"] == "pentagon" and item["indices"] for item in excinfo.value.violations)


def test_report_without_raising(jk4):
    broken = jk4.with_f_override((1, 2, 1, 2, 1, 1), 0.5)
    report = verify_consistency(broken, raise_on_failure=False)
    assert not report.passed
    payload = report.to_payload(semion_gluing=None).to_json_dict()
    assert payload["passed"] is False
    assert payload["violations"]


def test_derived_invariants_residuals_small(su2_4):
    invariants = derived_invariants(su2_4)
    assert max(invariants.residuals.values()) < 1e-10
    assert invariants.total_dim == pytest.approx(su2_4.total_dim)


def test_verify_logs_residuals(jk4, tmp_path):
    path = tmp_path / "verify.log"
    logger = RunLogger(path, enabled=True)
    verify_consistency(jk4, logger=logger)
    assert "verify_consistency" in path.read_text(encoding="utf-8")
