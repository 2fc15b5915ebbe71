"""Mixing-angle transport for the M and W systems.

M system (regime a, Omega_1 = Omega_3, Omega_2 = Omega_4): with
v = sin^2 theta = Omega_1^2 / Omega_0^2 and the pulse area s = integral of
Omega_0^2 d tau the intensity equations reduce to the scalar conservation law

    dv/dx = q d/ds g(v),  g = (1 - 2v) / (1 - v(1 - v)),

equivalent to d theta/dx + (q f(theta) / Omega_0^2) d theta/d tau = 0.  It is
solved with MacCormack's predictor-corrector scheme on a uniform s grid and,
independently, by characteristics: s(x) = s_0 + q x f(theta_0(s_0)).

W system (regime b): the coupled Omega_1^2 / theta_2 problem is run through
the reduced solver with the closed-form state of that regime; the
characteristic solution for theta_2 with the Omega_1 source neglected is
integrated alongside for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..chain import LevelScheme
from ..errors import ContractViolation, StepSizeFailure
from ..regimes import get_regime
from .medium import SHOCK_GROWTH, FieldGrid, MediumParams, df_dtheta, f_theta, theta2_speed
from .reduced import area_coordinate, propagate_reduced

CFL = 0.5
# MacCormack ripples near the kinked pulse tails stay far below this; beyond
# it the scheme is going unstable (shock or dx too large)
OVERSHOOT = 1e-4


def _g(v):
    return (1 - 2 * v) / (1 - v * (1 - v))


def breaking_length(s, theta0, q: float) -> float:
    """First crossing of characteristics s_0 + q x f(theta_0(s_0)); inf if none."""
    slope = df_dtheta(theta0) * np.gradient(theta0, s)
    worst = np.max(-slope)
    return float(1.0 / (q * worst)) if worst > 0 else float("inf")


def characteristic_theta(s, theta0, q: float, x: float) -> tuple[np.ndarray, bool]:
    """theta(x, s) by characteristics; flag False once they have crossed."""
    moved = s + q * x * f_theta(theta0)
    ok = bool(np.all(np.diff(moved) > 0))
    return np.interp(s, moved, theta0, left=theta0[0], right=theta0[-1]), ok


@dataclass(frozen=True)
class _AreaGrid:
    tau: np.ndarray
    S: np.ndarray  # s(tau)
    s: np.ndarray  # uniform
    tau_s: np.ndarray
    rho_s: np.ndarray

    @classmethod
    def build(cls, tau, rho, n):
        S = area_coordinate(tau, rho)
        s = np.linspace(0, S[-1], n)
        tau_s = np.interp(s, S, tau)
        return cls(tau, S, s, tau_s, np.interp(tau_s, tau, rho))

    def to_tau(self, values):
        return np.interp(self.S, self.s, values)


def m_system_transport(
    tau,
    theta0,
    omega0_sq,
    q: float,
    length: float,
    dx: float | None = None,
    n_area: int | None = None,
    n_store: int = 21,
    stop_on_shock: bool = True,
    one_photon=None,
) -> FieldGrid:
    """Mixing angle theta(x, tau) of the M-system STIRAP chain.

    ``theta0`` is the entrance profile (in [0, pi/2]); ``omega0_sq`` the
    invariant Omega_1^2 + Omega_2^2, positive on the whole grid.  dx defaults
    to the stability limit 0.5 ds / (3 q).  The finite-difference solution
    goes to ``theta``, the characteristic one to ``theta_char``.
    """
    tau = np.asarray(tau, dtype=float)
    th0 = np.asarray(theta0, dtype=float)
    rho = np.asarray(omega0_sq, dtype=float)
    if th0.shape != tau.shape or rho.shape != tau.shape:
        raise ContractViolation("theta0 and omega0_sq must be sampled on tau")
    if np.any(th0 < -1e-12) or np.any(th0 > np.pi / 2 + 1e-12):
        raise ContractViolation("entrance mixing angle must lie in [0, pi/2]")
    if not np.all(rho > 0):
        raise ContractViolation("Omega_0^2 must be > 0 on the tau grid")
    if not (q >= 0 and length >= 0):
        raise ContractViolation("need q >= 0 and length >= 0")
    grid = _AreaGrid.build(tau, rho, n_area or tau.size)
    s = grid.s
    ds = s[1] - s[0]
    v = np.sin(np.interp(grid.tau_s, tau, np.clip(th0, 0, np.pi / 2))) ** 2
    th_s0 = np.arcsin(np.sqrt(v))
    max_dx = CFL * ds / (3 * q) if q > 0 else np.inf
    if dx is None:
        dx = max_dx if np.isfinite(max_dx) else max(length, 1.0)
    if dx > max_dx * (1 + 1e-12):
        raise ContractViolation(f"dx = {dx:.3g} exceeds the stability limit {max_dx:.3g}")
    n_steps = int(np.ceil(length / dx - 1e-9)) if length > 0 else 0
    h = length / n_steps if n_steps else 0.0
    lam = h / ds
    store_at = set(np.round(np.linspace(0, n_steps, min(n_store, n_steps + 1))).astype(int).tolist())
    support = grid.rho_s >= 1e-3 * rho.max()

    def angle(vv):
        return np.arcsin(np.sqrt(np.clip(vv, 0.0, 1.0)))

    def gradient(vv):
        return float(np.max(np.abs(np.gradient(angle(vv), s) * grid.rho_s)[support]))

    grad0 = gradient(v)
    xs, thetas, chars, grads = [], [], [], []
    crossed = False

    def record(k, vv):
        x = k * h
        xs.append(x)
        thetas.append(grid.to_tau(angle(vv)))
        tc, ok = characteristic_theta(s, th_s0, q, x)
        chars.append(grid.to_tau(tc))
        grads.append(gradient(vv))
        return ok

    record(0, v)
    shock, shock_x, prev = False, None, grad0
    for k in range(1, n_steps + 1):
        flux = -q * _g(v)
        pred = v.copy()
        pred[:-1] = v[:-1] - lam * (flux[1:] - flux[:-1])
        fp = -q * _g(pred)
        new = v.copy()
        new[1:] = 0.5 * (v[1:] + pred[1:] - lam * (fp[1:] - fp[:-1]))
        new[0] = v[0]  # inflow
        new[-1] = new[-2]  # outflow
        if np.any(new < -OVERSHOOT) or np.any(new > 1 + OVERSHOOT):
            raise StepSizeFailure(f"mixing angle left [0, pi/2] at x = {k * h:.4g}; shock or too large dx")
        v = new
        gnow = gradient(v)
        if not shock and gnow > SHOCK_GROWTH * grad0:
            shock = True
            frac = (SHOCK_GROWTH * grad0 - prev) / max(gnow - prev, 1e-300)
            shock_x = (k - 1 + min(max(frac, 0.0), 1.0)) * h
        prev = gnow
        if k in store_at or (shock and stop_on_shock):
            crossed |= not record(k, v)
        if shock and stop_on_shock:
            break

    theta = np.array(thetas)
    w1 = rho * np.sin(theta) ** 2
    w2 = rho * np.cos(theta) ** 2
    d = np.zeros(2) if one_photon is None else np.asarray(one_photon, dtype=float)[[0, 1]]
    delta = np.broadcast_to(d[:, None, None], (2,) + theta.shape).copy()
    x_break = breaking_length(s, th_s0, q) if q > 0 else float("inf")
    return FieldGrid(
        x=np.array(xs),
        tau=tau,
        omega_sq=np.stack([w1, w2]),
        delta=delta,
        fields=((1, 3), (2, 4)),
        theta=theta,
        theta_char=np.array(chars),
        invariant_fields=(0, 1),
        invariant_drift=np.array([float(np.max(np.abs(w1[i] + w2[i] - rho)) / rho.max()) for i in range(len(xs))]),
        max_dtheta=np.array(grads),
        shock=shock,
        shock_length=shock_x,
        truncated=bool(shock and stop_on_shock and xs[-1] < length),
        meta={
            "scheme": "M",
            "q": q,
            "dx": h,
            "length": length,
            "n_area": s.size,
            "breaking_length": x_break,
            "characteristics_crossed": crossed,
            "entrance_max_dtheta": grad0,
        },
    )


def gaussian_pair_entrance(tau, omega0: float, delay: float = 1.2, width: float = 1.0, shape: str = "gaussian"):
    """theta_0 and Omega_0^2 for counterintuitive pulses: Omega_2 (Stokes) at -delay/2, Omega_1 at +delay/2."""
    tau = np.asarray(tau, dtype=float)
    if shape == "gaussian":
        env = lambda c: np.exp(-(((tau - c) / width) ** 2))  # noqa: E731
    elif shape == "sech":
        env = lambda c: 1 / np.cosh((tau - c) / width)  # noqa: E731
    else:
        raise ContractViolation(f"unknown entrance shape {shape!r}")
    o1 = omega0 * env(0.5 * delay)
    o2 = omega0 * env(-0.5 * delay)
    return np.arctan2(o1, o2), o1**2 + o2**2


# ---------------------------------------------------------------------------


def w_one_photon(delta1: float, delta3: float = 0.0) -> tuple[float, float, float, float]:
    """One-photon detunings of the W scheme giving multiphoton (0, d1, 2 d1, d3, d1)."""
    return (-delta1, delta1, 2 * delta1 - delta3, delta1 - delta3)


def smooth_ramp(tau, start: float, stop: float, top: float = np.pi / 2):
    """0 before ``start``, ``top`` after ``stop``, sin^2 in between."""
    x = np.clip((np.asarray(tau, dtype=float) - start) / (stop - start), 0.0, 1.0)
    return top * np.sin(0.5 * np.pi * x) ** 2


def theta2_characteristics(tau, theta2, omega0_sq, phi, q: float, xs) -> np.ndarray:
    """theta_2(x, tau) along ds/dx = -2 q sin^2 Phi / D^2 (speed in the area of Omega_0^2), source neglected."""
    tau = np.asarray(tau, dtype=float)
    grid = _AreaGrid.build(tau, np.asarray(omega0_sq, dtype=float), tau.size)
    th_s = np.interp(grid.tau_s, tau, theta2)
    phi_s = np.interp(grid.tau_s, tau, phi)

    def rhs(_, y):
        ph = np.interp(y, grid.s, phi_s)
        return -theta2_speed(q, 1.0, th_s, ph)

    xs = np.asarray(xs, dtype=float)
    if xs.max() <= 0:
        return np.repeat(theta2[None], xs.size, axis=0)
    sol = solve_ivp(rhs, (0.0, float(xs.max())), grid.s.copy(), t_eval=xs, rtol=1e-10, atol=1e-12 * grid.s[-1])
    out = []
    for k in range(xs.size):
        pos = sol.y[:, k]
        order = np.argsort(pos, kind="stable")
        out.append(grid.to_tau(np.interp(grid.s, pos[order], th_s[order], left=th_s[0], right=th_s[-1])))
    return np.array(out)


def w_sech_entrance(tau, omega1: float, omega0: float, width: float = 8.0, ramp: float = 4.0):
    """Long sech pulses with a tanh mixing-angle ramp, returns (Omega_1, theta_2, Omega_0^2).

    Omega_4 leads and Omega_3 trails.  cos^2 theta_2 falls off faster than
    Omega_1^2 (for ramp < 2 width), so the atom ends in |5> and the
    transfer is complete.  theta_2 is shifted to start exactly at 0.
    """
    tau = np.asarray(tau, dtype=float)
    if not (omega1 > 0 and omega0 > 0 and width > 0 and 0 < ramp < 2 * width):
        raise ContractViolation("need positive amplitudes and 0 < ramp < 2 width")
    envelope = 1 / np.cosh(tau / width)
    theta2 = 0.25 * np.pi * (1 + np.tanh(tau / ramp))
    return omega1 * envelope, theta2 - theta2[0], (omega0 * envelope) ** 2


def w_system_transport(
    tau,
    omega1,
    theta2,
    omega0_sq,
    delta1: float,
    medium: MediumParams | float,
    length: float,
    dx: float,
    delta3: float = 0.0,
    n_store: int = 21,
    stop_on_shock: bool = True,
    area_floor: float = 0.05,
    stop_on_breakdown: bool = False,
) -> FieldGrid:
    """Joint Omega_1 / theta_2 propagation in the W system under regime (b).

    The pair Omega_3 = Omega_0 sin theta_2, Omega_4 = Omega_0 cos theta_2
    and one field Omega_1 on both transitions 1 and 2 enter the medium.
    """
    tau = np.asarray(tau, dtype=float)
    o1 = np.asarray(omega1, dtype=float)
    th = np.asarray(theta2, dtype=float)
    rho0 = np.asarray(omega0_sq, dtype=float)
    if not (o1.shape == th.shape == rho0.shape == tau.shape):
        raise ContractViolation("omega1, theta2 and omega0_sq must be sampled on tau")
    if np.any(o1 < 0):
        raise ContractViolation("Omega_1 must be >= 0")
    if abs(th[0]) > 1e-12:
        raise ContractViolation("theta_2 must start at 0 (counterintuitive order)")
    if not delta1 != 0:
        raise ContractViolation("delta_1 must be nonzero")
    if not isinstance(medium, MediumParams):
        medium = MediumParams.uniform(float(medium), 4)
    scheme = LevelScheme.w_system(degeneracy=((1, 2),))
    entrance = np.stack([o1**2, rho0 * np.sin(th) ** 2, rho0 * np.cos(th) ** 2])
    grid = propagate_reduced(
        scheme, tau, entrance, w_one_photon(delta1, delta3), medium, get_regime("b"), length, dx,
        n_store=n_store, stop_on_shock=stop_on_shock, theta_fields=(1, 2), area_floor=area_floor,
        stop_on_breakdown=stop_on_breakdown,
    )
    grid.phi = np.arctan2(np.sqrt(2 * grid.omega_sq[0]), delta1)
    phi0 = np.arctan2(np.sqrt(2.0) * o1, delta1)
    grid.theta_char = theta2_characteristics(tau, th, rho0, phi0, medium.q[2], grid.x)
    grid.meta.update({"delta1": delta1, "delta3": delta3})
    return grid


def contour_position(tau, profile, level: float) -> float:
    """First tau where a monotone-ish profile crosses ``level`` (linear interpolation)."""
    tau = np.asarray(tau, dtype=float)
    p = np.asarray(profile, dtype=float) - level
    idx = np.nonzero(np.sign(p[:-1]) != np.sign(p[1:]))[0]
    if idx.size == 0:
        return float("nan")
    i = idx[0]
    return float(tau[i] - p[i] * (tau[i + 1] - tau[i]) / (p[i + 1] - p[i]))
