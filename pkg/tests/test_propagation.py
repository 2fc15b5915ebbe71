import warnings

import numpy as np
import pytest

from adiabatic_transparency.chain import LevelScheme
from adiabatic_transparency.errors import ContractViolation
from adiabatic_transparency.propagation import (
    F_MAX,
    MediumParams,
    adiabaticity_lengths,
    breaking_length,
    characteristic_theta,
    contour_position,
    df_dtheta,
    energy_audit,
    f1_printed,
    f_theta,
    fit_slope,
    gaussian_pair_entrance,
    group_slowness_w,
    group_slowness_w_printed,
    m_system_transport,
    propagate_reduced,
    smooth_ramp,
    theta2_speed,
    w_one_photon,
    w_sech_entrance,
    w_system_transport,
)
from adiabatic_transparency.regimes import closure_populations, get_regime

M_SCHEME = LevelScheme.m_system(((1, 3), (2, 4)))


def _m_entrance(tau, omega0=10.0, delay=1.2):
    th0, rho = gaussian_pair_entrance(tau, omega0, delay, 1.0, "sech")
    return th0, rho, np.stack([rho * np.sin(th0) ** 2, rho * np.cos(th0) ** 2])


def test_f_theta_values_and_derivative():
    assert f_theta(0.0) == pytest.approx(1.0)
    assert f_theta(np.pi / 4) == pytest.approx(F_MAX)
    th = np.linspace(0.05, 1.5, 11)
    h = 1e-6
    np.testing.assert_allclose(df_dtheta(th), (f_theta(th + h) - f_theta(th - h)) / (2 * h), rtol=1e-6, atol=1e-8)


def test_f_theta_is_flux_derivative():
    # f(theta) = -d/dv [(1 - 2v) / (1 - v(1 - v))] at v = sin^2 theta
    th = np.linspace(0, np.pi / 2, 13)
    v = np.sin(th) ** 2
    g = lambda v: (1 - 2 * v) / (1 - v * (1 - v))  # noqa: E731
    h = 1e-7
    np.testing.assert_allclose(f_theta(th), -(g(v + h) - g(v - h)) / (2 * h), rtol=1e-6)


def test_w_slowness_from_adiabatic_populations():
    # the flux of Omega_1^2 is q |b_2|^2; its derivative in Omega_1^2 is the slowness
    q, d1 = 1.3, 8.0
    reg = get_regime("b")
    for o1sq, th2 in [(1.0, 0.2), (9.0, 0.9), (4.0, 1.3)]:
        def b2(w):
            o1 = np.sqrt(w)
            rabi = np.array([o1, o1, 5 * np.sin(th2), 5 * np.cos(th2)])
            return closure_populations(reg, rabi, np.array([0, d1, 2 * d1, 0, d1]))[1]

        h = 1e-6
        oracle = -q * (b2(o1sq + h) - b2(o1sq - h)) / (2 * h)
        assert group_slowness_w(q, d1, o1sq, th2) == pytest.approx(oracle, rel=1e-6)
        assert group_slowness_w_printed(q, d1, o1sq, th2) == pytest.approx(2 * oracle, rel=1e-6)


def test_theta2_speed_relation_to_printed_coefficient():
    th, phi = np.linspace(0.1, 1.4, 5), 0.7
    np.testing.assert_allclose(theta2_speed(1.0, 3.0, th, phi), 2 * f1_printed(th, phi) / (np.cos(th) * 3.0))


def test_adiabaticity_lengths():
    m = adiabaticity_lengths("M", 2.0, omega0=10.0)
    assert m["L_adiab_M"].value == pytest.approx(100 / 6)
    assert m["L_shock_M"].value == pytest.approx(100 / (2 * F_MAX))
    w = adiabaticity_lengths("W", 1.0, delta1=8.0, omega0=40.0, T1=8.0, omega1=3.0, W0=50.0)
    assert w["L_shock_W"].value == pytest.approx(64 * 8 / 36)
    assert w["L_disp_W"].value == 64 and w["L_mix_W"].value == 1600 * 8 and w["L_deplete"].value == 50
    with pytest.raises(ContractViolation):
        adiabaticity_lengths("M", 0.0, omega0=1.0)
    with pytest.raises(ContractViolation):
        adiabaticity_lengths("X", 1.0)


def test_medium_params():
    m = MediumParams.from_absorption(2.0, 0.5, 4)
    assert m.q == (1.0,) * 4
    with pytest.raises(ContractViolation):
        MediumParams((1.0, -1.0))
    with pytest.raises(ContractViolation):
        MediumParams((1.0,), alpha0=1.0)
    assert MediumParams.uniform(2.0, 2).scaled(0.5).q == (1.0, 1.0)


def test_contour_position_linear():
    tau = np.linspace(-1, 1, 5)
    assert contour_position(tau, 2 * tau + 0.5, 0.0) == pytest.approx(-0.25)
    assert np.isnan(contour_position(tau, np.ones(5), 0.0))


def test_breaking_length_matches_first_crossing():
    s = np.linspace(0, 100, 4001)
    th0 = smooth_ramp(s, 20, 60)
    xb = breaking_length(s, th0, 1.0)
    assert characteristic_theta(s, th0, 1.0, 0.97 * xb)[1]
    assert not characteristic_theta(s, th0, 1.0, 1.03 * xb)[1]


def test_zero_coupling_leaves_pulses_unchanged():
    tau = np.linspace(-6, 6, 401)
    _, _, w0 = _m_entrance(tau)
    g = propagate_reduced(M_SCHEME, tau, w0, (0, 0, 0, 0), MediumParams.uniform(0.0, 4), get_regime("a"), 5.0, 1.0)
    np.testing.assert_array_equal(g.omega_sq[:, -1], g.omega_sq[:, 0])
    # the x = 0 row went through the area grid and back (linear interpolation)
    np.testing.assert_allclose(g.omega_sq[:, 0], w0, rtol=0, atol=1e-3 * w0.max())


def test_reduced_m_agrees_with_transport():
    tau = np.linspace(-6, 6, 1201)
    th0, rho, w0 = _m_entrance(tau)
    length = 0.3 * 100 / F_MAX
    g = propagate_reduced(M_SCHEME, tau, w0, (0, 0, 0, 0), MediumParams.uniform(1.0, 4), get_regime("a"), length, 0.5,
                          n_store=3)
    m = m_system_transport(tau, th0, rho, 1.0, length, n_store=3)
    assert g.max_invariant_drift < 1e-12 and m.max_invariant_drift < 1e-12
    assert np.max(np.abs(g.theta[-1] - m.theta[-1])) < 3e-3
    # energy moves from the trailing pump pair into the leading Stokes pair
    e = g.energies()
    s1, _ = fit_slope(g.x, e[0])
    s2, _ = fit_slope(g.x, e[1])
    assert s1 < 0 and s2 == pytest.approx(-s1, rel=1e-9)


def test_reduced_contracts():
    tau = np.linspace(-3, 3, 101)
    _, _, w0 = _m_entrance(tau)
    args = ((0, 0, 0, 0), MediumParams.uniform(1.0, 4), get_regime("a"), 1.0, 0.5)
    with pytest.raises(ContractViolation):
        propagate_reduced(M_SCHEME, tau, w0[:1], *args)
    with pytest.raises(ContractViolation):
        propagate_reduced(M_SCHEME, tau, -w0, *args)
    with pytest.raises(ContractViolation):
        propagate_reduced(M_SCHEME, tau, w0, (0, 0, 0, 0), MediumParams.uniform(1.0, 3), get_regime("a"), 1.0, 0.5)
    with pytest.raises(ContractViolation):
        propagate_reduced(M_SCHEME, tau, w0, (0, 0, 0, 0), MediumParams.uniform(1.0, 4), get_regime("e"), 1.0, 0.5)


def test_transport_contracts():
    tau = np.linspace(-3, 3, 101)
    th0, rho, _ = _m_entrance(tau)
    with pytest.raises(ContractViolation):
        m_system_transport(tau, th0 + 2, rho, 1.0, 1.0)
    with pytest.raises(ContractViolation):
        m_system_transport(tau, th0, rho, 1.0, 1.0, dx=100.0)
    o1, th2, r0 = w_sech_entrance(np.linspace(-40, 40, 401), 3.0, 40.0)
    with pytest.raises(ContractViolation):
        w_system_transport(np.linspace(-40, 40, 401), o1, th2 + 0.1, r0, 8.0, 1.0, 1.0, 0.25)
    with pytest.raises(ContractViolation):
        w_sech_entrance(tau, 1.0, 1.0, width=1.0, ramp=3.0)


def test_w_one_photon_is_regime_b():
    d = w_one_photon(8.0, 1.5)
    deltas = np.concatenate([[0.0], np.cumsum(LevelScheme.w_system().signs * d)])
    assert get_regime("b").violations(np.ones(4), deltas) == []


def test_w_short_run_invariants_and_depletion():
    tau = np.linspace(-40, 40, 2001)
    o1, th2, r0 = w_sech_entrance(tau, 3.0, 40.0)
    g = w_system_transport(tau, o1, th2, r0, 8.0, 1.0, 2.0, 0.25)
    assert g.max_invariant_drift < 1e-10
    assert np.max(np.abs(g.delta - g.delta[:, :1])) == 0
    slope, _ = fit_slope(g.x, g.energies()[0])
    assert slope == pytest.approx(-1.0, rel=0.02)
    assert g.phi.shape == g.theta.shape


def test_energy_audit_warns_on_cut_pulses():
    tau = np.linspace(-1, 1, 101)
    _, _, w0 = _m_entrance(tau)
    g = propagate_reduced(M_SCHEME, tau, w0, (0, 0, 0, 0), MediumParams.uniform(0.0, 4), get_regime("a"), 0.0, 1.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        energy_audit(g)
    assert any("not negligible" in str(w.message) for w in caught)
