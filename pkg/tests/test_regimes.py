import numpy as np
import pytest

from adiabatic_transparency.chain import build_hamiltonian
from adiabatic_transparency.errors import ContractViolation, RegimeMismatch
from adiabatic_transparency.regimes import (
    CATALOG,
    VARIANTS,
    adiabatic_state,
    closure_populations,
    get_regime,
    verify_regime,
)


def test_catalog_names():
    assert list(CATALOG) == ["lambda-dark", "lambda-delta1", "a", "b", "c", "d", "e", "f"]
    assert get_regime("Λ-dark") is CATALOG["lambda-dark"]
    with pytest.raises(ContractViolation):
        get_regime("z")


@pytest.mark.parametrize("name", list(CATALOG))
def test_samples_satisfy_constraints(name, rng):
    reg = get_regime(name)
    for _ in range(10):
        rabi, deltas = reg.sample(rng)
        assert reg.violations(rabi, deltas) == []


def test_lambda_dark_equal_fields():
    a = adiabatic_state(get_regime("lambda-dark"), [2.0, 2.0], [0, 3.0, 0]).amplitudes
    np.testing.assert_allclose(a, np.array([1, 0, -1]) / np.sqrt(2), atol=1e-15)


def test_regime_a_symmetric_fields():
    th = 0.37
    o1, o2 = np.sin(th), np.cos(th)
    a = adiabatic_state(get_regime("a"), [o1, o2, o1, o2], [0, 2.0, 0, -1.0, 0])
    r = np.sqrt(1 - np.sin(th) ** 2 * np.cos(th) ** 2)
    expected = np.array([np.cos(th) ** 2, 0, -np.sin(th) * np.cos(th), 0, np.sin(th) ** 2]) / r
    np.testing.assert_allclose(a.amplitudes, expected, atol=1e-14)
    assert a.normalizer_mismatch < 1e-14


@pytest.mark.parametrize("name", ["lambda-dark", "lambda-delta1", "a", "b", "c", "d"])
def test_closed_forms_are_eigenvectors(name, rng):
    reg = get_regime(name)
    for _ in range(20):
        rabi, deltas = reg.sample(rng)
        h = build_hamiltonian(reg.scheme(), rabi, deltas).matrix
        a = adiabatic_state(reg, rabi, deltas).amplitudes
        lam = reg.pinned_value(deltas)
        assert np.linalg.norm(h @ a - lam * a) < 1e-12 * np.linalg.norm(h, 2)


def test_closed_form_checks_constraints():
    with pytest.raises(RegimeMismatch):
        adiabatic_state(get_regime("a"), [1, 1, 1, 1], [0, 1, 0.5, 1, 0])


def test_closure_vectorised(rng):
    reg = get_regime("b")
    rabi = np.tile(np.array([[1.0], [1.0], [2.0], [0.5]]), (1, 3))
    deltas = np.tile(np.array([[0.0], [3.0], [6.0], [0.0], [3.0]]), (1, 3))
    p = closure_populations(reg, rabi, deltas)
    assert p.shape == (5, 3)
    np.testing.assert_allclose(p.sum(axis=0), 1.0)


def test_printed_regime_d_is_not_pinned():
    # lambda = 0 needs delta_4 = -delta_2; the equal-sign reading fails
    rep = verify_regime(VARIANTS["d-printed"], 20, seed=1)
    assert rep.eigen_hits == 0
    assert verify_regime("d", 20, seed=1).all_transparent


def test_regime_f_readings():
    assert verify_regime("f", 20, seed=1).eigen_hits == 0
    assert verify_regime("f-derived", 20, seed=1).all_pinned


def test_regime_e_pinned():
    assert verify_regime("e", 50, seed=4).all_pinned


def test_verify_is_deterministic_and_threaded():
    a = verify_regime("c", 30, seed=9).to_dict()
    b = verify_regime("c", 30, seed=9, threads=3).to_dict()
    assert a == b
    with pytest.raises(ContractViolation):
        verify_regime("c", 0)


def test_independent_fields_report_offenders():
    rep = verify_regime("lambda-delta1", 10, seed=2, degenerate=False)
    assert rep.eigen_hits == 10 and rep.transparent_count == 0
    assert all(t.verdict == "necessary-only" and t.offending_fields for t in rep.trials)
