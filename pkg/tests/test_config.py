import textwrap

import numpy as np
import pytest

from adiabatic_transparency.config import (
    build_scenario,
    parse_config,
    parse_text,
    scenario_tree,
    set_path,
    shipped,
    shipped_scenarios,
)
from adiabatic_transparency.dynamics import DEFAULT_STEP_FACTOR, max_frequency, scenario
from adiabatic_transparency.errors import ConfigError

LAMBDA = """\
scheme: lambda
transitions:
  - {peak: 5.0, center: 0.5, delta: 2.0}
  - {peak: 5.0, center: -0.5, delta: 2.0}
time: {start: -5, stop: 5}
"""


@pytest.mark.parametrize("name", ["fig2_m_stirap", "fig3_w_transfer", "w_return"])
def test_shipped_file_matches_in_code_scenario(name):
    assert parse_config(shipped(name)) == scenario_tree(scenario(name))


def test_every_shipped_scenario_validates():
    names = [p.stem for p in shipped_scenarios()]
    assert len(names) == 6
    for p in shipped_scenarios():
        tree = parse_config(p)
        assert tree["name"] == p.stem
        build_scenario(tree)


def test_minimal_lambda_defaults():
    tree = parse_text(LAMBDA)
    assert tree["levels"] == 3 and tree["initial_state"] == 1
    assert tree["transitions"][0]["shape"] == "gaussian"
    np.testing.assert_allclose(tree["multiphoton"], [0.0, 2.0, 0.0])
    sc = build_scenario(tree)
    assert sc.grid.step == pytest.approx(DEFAULT_STEP_FACTOR / max_frequency(sc.train))


def test_negative_peak_reports_line():
    text = LAMBDA.replace("peak: 5.0, center: -0.5", "peak: -5.0, center: -0.5")
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    assert info.value.line == 4
    assert "transitions[1].peak" in str(info.value)


def test_unknown_key_raises():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_text(LAMBDA + "colour: blue\n")
    with pytest.raises(ConfigError, match="transitions\\[0\\].phase"):
        parse_text(LAMBDA.replace("delta: 2.0}", "delta: 2.0, phase: 1}", 1))


@pytest.mark.parametrize("edit, fragment", [
    (("scheme: lambda", "scheme: M"), "needs 4 transitions"),
    (("stop: 5}", "stop: -6}"), "stop > start"),
])
def test_structural_errors(edit, fragment):
    text = LAMBDA.replace(*edit)
    with pytest.raises(ConfigError, match=fragment):
        parse_text(text)


def test_malformed_yaml_and_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="malformed"):
        parse_text("scheme: [M\n")
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.yaml")
    with pytest.raises(ConfigError, match="no shipped scenario"):
        shipped("nope")


def test_degenerate_transitions_must_share_pulse():
    text = textwrap.dedent("""\
        scheme: M
        degeneracy: [[1, 3]]
        transitions:
          - {peak: 5, center: 0.5}
          - {peak: 5, center: -0.5}
          - {peak: 6, center: 0.5}
          - {peak: 5, center: -0.5}
        time: {start: -5, stop: 5}
        """)
    with pytest.raises(ConfigError, match="must share its pulse"):
        parse_text(text)


def _with_propagation(block):
    return LAMBDA + textwrap.dedent(block)


@pytest.mark.parametrize("block, fragment", [
    ("propagation: {regime: lambda-dark}\n", "propagation.length"),
    ("propagation: {regime: lambda-dark, length: 1}\n", "propagation.dx"),
    ("propagation: {length: 1, dx: 0.1}\n", "propagation.regime"),
    ("propagation: {length: 1, dx: 0.1, regime: lambda-dark, q: [1, 2, 3]}\n", "need 2 couplings"),
    ("propagation: {method: m_transport, length: 1}\n", "needs the M scheme"),
    ("propagation: {method: warp, length: 1}\n", "unknown method"),
    ("propagation: {length: 1, dx: 0.1, regime: lambda-dark, entrance: w_sech}\n", "w_transport"),
])
def test_propagation_validation(block, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_text(_with_propagation(block))


def test_propagation_defaults():
    tree = parse_text(_with_propagation("propagation: {length: 2, dx: 0.5, regime: lambda-dark, q: 0.5}\n"))
    p = tree["propagation"]
    assert p["q"] == [0.5, 0.5] and p["tau"] == {"start": -5.0, "stop": 5.0}
    assert p["entrance"] == {"kind": "transitions"} and p["stop_on_shock"]


def test_set_path():
    raw = {"transitions": [{"peak": 1}, {"peak": 2}], "time": {"stop": 3}}
    out = set_path(raw, "transitions[*].peak", 7)
    assert [t["peak"] for t in out["transitions"]] == [7, 7]
    assert raw["transitions"][0]["peak"] == 1
    assert set_path(raw, "time.stop", 9)["time"]["stop"] == 9
    assert set_path(raw, "transitions[-1].peak", 5)["transitions"][1]["peak"] == 5
    assert set_path(raw, "propagation.q", 2.0)["propagation"] == {"q": 2.0}
    for bad in ("", "transitions[4].peak", "time[0]", "time.stop.x"):
        with pytest.raises(ConfigError):
            set_path(raw, bad, 1)
