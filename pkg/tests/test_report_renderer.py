from __future__ import annotations

import pytest

from services.report_renderer import ReportRenderer, ReportRenderError, ReportSettings, render_table


def test_closure_view():
    text = render_table(
        "closure",
        {"generatorSet": "zbk", "generators": ["Z", "B", "K"], "size": 301, "finite": False, "cap": 300},
    )
    assert text.startswith("<Z, B, K> (zbk): more than 300 elements, possibly infinite")


def test_walk_view_formats_numbers():
    payload = {
        "n": 7,
        "m": 3,
        "neverPositive": 0.2734375,
        "closedForm": "35/128",
        "gammaForm": 0.2734375,
        "asymptotic": 0.2855,
        "monteCarlo": None,
        "trials": None,
    }
    text = render_table("walk", payload)
    assert "0.2734375 = 35/128" in text
    assert "monte carlo" not in text


def test_unknown_view_falls_back_to_key_listing():
    text = render_table("state", {"total": 0, "externals": [1, 1]})
    assert text.splitlines()[0] == "state"
    assert "externals" in text


def test_complex_entries_render_with_sign():
    text = render_table(
        "density",
        {
            "commutatorDistance": 0.5,
            "selfCommutatorDistance": 0.0,
            "bKCommute": False,
            "expIAlpha": {"re": -0.142857, "im": -0.98974},
            "cosAlpha": -0.142857,
            "continuedFraction": [0, 1, 2],
        },
    )
    assert "-0.142857-0.98974i" in text
    assert "[0; 1; 2]" in text


def test_template_errors_are_wrapped(tmp_path):
    (tmp_path / "broken.txt.j2").write_text("{{ p.missing.attribute }}", encoding="utf-8")
    renderer = ReportRenderer(ReportSettings(template_dir=tmp_path))
    with pytest.raises(ReportRenderError):
        renderer.render("broken", {"rows": []})
