import numpy as np
import pytest

from adiabatic_transparency.chain import LevelScheme, PulseEnvelope, PulseTrain, build_hamiltonian
from adiabatic_transparency.errors import ContractViolation
from adiabatic_transparency.quasienergy import (
    dipole_moments,
    quasienergy_fan,
    rabi_gradient,
    track_eigenbranches,
    transition_dipoles,
)
from adiabatic_transparency.regimes import get_regime


def _train(scheme, peaks, centers, widths, one_photon):
    envs = tuple(PulseEnvelope("gaussian", p, c, w) for p, c, w in zip(peaks, centers, widths))
    return PulseTrain(scheme, envs, one_photon)


def test_field_off_branches_are_the_detunings():
    t = np.linspace(0, 1, 5)
    hs = np.array([build_hamiltonian(LevelScheme.ladder(3), [0, 0], [0, 2.0, -1.0]).matrix] * 5)
    fan = track_eigenbranches(t, hs)
    np.testing.assert_allclose(np.sort(fan.branches, axis=0), np.array([[-1.0] * 5, [0.0] * 5, [2.0] * 5]))
    assert sorted(fan.labels) == [-1.0, 0.0, 2.0]


def test_true_crossing_keeps_identity():
    # two uncoupled levels crossing linearly, a third one coupled to neither
    t = np.linspace(-1, 1, 201)
    hs = np.zeros((t.size, 3, 3))
    hs[:, 0, 0], hs[:, 1, 1], hs[:, 2, 2] = t, -t, 5.0
    fan = track_eigenbranches(t, hs)
    b = fan.branch_of_state([1, 0, 0], 0)
    np.testing.assert_allclose(fan.branches[b], t, atol=1e-12)
    assert any(ev.kind == "degenerate" for ev in fan.crossings)


def test_avoided_crossing_follows_adiabatic_branch():
    g = 0.3
    t = np.linspace(-3, 3, 601)
    hs = np.array([[[x, g], [g, -x]] for x in t])
    fan = track_eigenbranches(t, hs)
    exact = np.sqrt(t**2 + g**2)
    up = int(np.argmax(fan.branches[:, -1]))
    np.testing.assert_allclose(fan.branches[up], exact, atol=1e-12)
    # the upper branch starts on the lower bare level and ends on the upper one
    assert fan.label_levels[up] == 2 and fan.end_label_levels[up] == 1


def test_lambda_dark_branch_is_flat():
    train = _train(LevelScheme.lambda_system(), (5, 5), (0.6, -0.6), (1, 1), (4.0, 4.0))
    fan = quasienergy_fan(train, np.linspace(-6, 6, 601))
    b = fan.branches_labeled(0.0)
    assert any(fan.flatness(k) < 1e-9 for k in b)


def test_regime_c_pinned_branch_against_dense_eigensolve():
    scheme = LevelScheme.ladder(5, ((1, 2), (3, 4)))
    d = 10.0
    train = _train(scheme, (20, 20, 20, 20), (0, 0, 0, 0), (1, 1, 1, 1), (d, 0.0, 0.0, d))
    mp = train.detunings.multi_photon
    assert mp[1] == mp[2] == mp[3] == d and mp[4] == 2 * d
    times = np.linspace(-6, 6, 401)
    fan = quasienergy_fan(train, times)
    # oracle: wherever the fields are on, exactly one eigenvalue of H equals d
    on = np.abs(times) < 2.0
    dense = np.linalg.eigvalsh(train.hamiltonians(times[on]))
    hits = np.sum(np.abs(dense - d) < 1e-9, axis=1)
    assert np.all(hits == 1)
    labeled = fan.branches_labeled(d)
    assert len(labeled) == 3
    flat = [b for b in labeled if fan.flatness(b) < 1e-9]
    assert len(flat) == 1
    assert all(fan.flatness(b) > 1.0 for b in labeled if b not in flat)


def test_fan_rejects_fields_on_at_ends():
    train = _train(LevelScheme.lambda_system(), (5, 5), (0, 0), (1, 1), (0.0, 0.0))
    with pytest.raises(ContractViolation):
        quasienergy_fan(train, np.linspace(-1, 1, 11))


def test_dark_state_dipoles_vanish():
    h = build_hamiltonian(LevelScheme.lambda_system(), [2.0, 3.0], [0, 1.0, 0]).matrix
    w, v = np.linalg.eigh(h)
    k = int(np.argmin(np.abs(w)))
    np.testing.assert_allclose(dipole_moments(h, v[:, k]), 0, atol=1e-14)


def test_lambda_delta1_necessary_not_sufficient():
    o, d1 = 2.5, 3.0
    rabi, deltas = [o, o], [0, d1, 2 * d1]
    h = build_hamiltonian(LevelScheme.ladder(3), rabi, deltas).matrix
    w, v = np.linalg.eigh(h)
    k = int(np.argmin(np.abs(w - d1)))
    assert abs(w[k] - d1) < 1e-12
    summed = dipole_moments(h, v[:, k], LevelScheme.ladder(3, ((1, 2),)))
    single = dipole_moments(h, v[:, k])
    assert abs(summed[0]) < 1e-12
    assert np.all(np.abs(single) > 0.05)


def test_dipole_requires_eigenvector():
    h = build_hamiltonian(LevelScheme.ladder(3), [1, 1], [0, 0, 0]).matrix
    with pytest.raises(ContractViolation):
        dipole_moments(h, np.array([1, 0, 0]))


def test_hellmann_feynman_two_level():
    # lambda = -sqrt(d^2/4 + O^2) + d/2 for H = [[0, -O], [-O, d]]
    o, d = 1.3, 0.7
    w, v = np.linalg.eigh(build_hamiltonian(LevelScheme.ladder(2), [o], [0, d]).matrix)
    exact = -o / np.sqrt(d**2 / 4 + o**2)
    assert rabi_gradient(v[:, 0])[0] == pytest.approx(exact, rel=1e-12)
    assert transition_dipoles(v[:, 0]).shape == (1,)


def test_regime_b_summed_dipoles_vanish(rng):
    reg = get_regime("b")
    rabi, deltas = reg.sample(rng)
    h = build_hamiltonian(reg.scheme(), rabi, deltas).matrix
    w, v = np.linalg.eigh(h)
    k = int(np.argmin(np.abs(w - deltas[1])))
    np.testing.assert_allclose(dipole_moments(h, v[:, k], reg.scheme()), 0, atol=1e-10)
