"""Reduced propagation equations for squared Rabi frequencies and detunings.

For transition i with orientation sign s_i (+1 up, -1 down)

    d Omega_i^2 / dx = s_i q_i d/dtau (|b_1|^2 + ... + |b_i|^2)
    d Delta_i / dx   = -q_i d/dtau [b_i b_{i+1} / Omega_i]

in the retarded frame (x, tau).  Transitions driven by one field add their
right-hand sides.  Populations come from the adiabatic state evaluated on
the local fields (quasistatic closure).

Intensities are marched with backward Euler in x and one-sided differences
in the pulse-area coordinate, the side picked per field from the sign of its
self-coupling (the upwind side).  Each x step is a Newton solve with a
sparse Jacobian.  The scheme is unconditionally stable; sums of fields whose
right-hand sides cancel are conserved to Newton precision.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ..chain import LevelScheme, multiphoton_detunings
from ..errors import ContractViolation, StepSizeFailure
from ..regimes import RegimeSpec
from .medium import SHOCK_GROWTH, FieldGrid, MediumParams

Closure = Callable[[np.ndarray, np.ndarray], np.ndarray]


def regime_closure(regime: RegimeSpec) -> Closure:
    """Amplitudes (n, m) of the regime's closed-form state for rabi (n-1, m)."""
    if regime.closed_form is None:
        raise ContractViolation(f"regime {regime.name} has no closed-form state to close the equations")

    def closure(rabi, deltas):
        amp, *_ = regime.closed_form(rabi, deltas)
        return np.nan_to_num(np.real(amp))

    return closure


@dataclass(frozen=True)
class _System:
    scheme: LevelScheme
    q: np.ndarray
    closure: Closure
    deltas: np.ndarray  # multiphoton, (n,)

    @property
    def fields(self):
        return self.scheme.fields

    def rabi(self, w: np.ndarray) -> np.ndarray:
        """Per-transition Rabi frequencies from per-field intensities (G, m)."""
        r = np.empty((self.scheme.n_transitions, w.shape[1]))
        root = np.sqrt(np.maximum(w, 0.0))
        for g, tr in enumerate(self.fields):
            for i in tr:
                r[i - 1] = root[g]
        return r

    def amplitudes(self, w: np.ndarray) -> np.ndarray:
        return self.closure(self.rabi(w), self.deltas)

    def flux(self, w: np.ndarray, amp: np.ndarray | None = None) -> np.ndarray:
        """G_g = sum_{i in g} s_i q_i P_{<=i}; then dw_g/dx = dG_g/dtau."""
        if amp is None:
            amp = self.amplitudes(w)
        cum = np.cumsum(np.abs(amp) ** 2, axis=0)
        s = self.scheme.signs
        out = np.zeros_like(w)
        for g, tr in enumerate(self.fields):
            for i in tr:
                out[g] += s[i - 1] * self.q[i - 1] * cum[i - 1]
        return out

    def phase_source(self, w: np.ndarray, amp: np.ndarray) -> np.ndarray:
        """-sum_{i in g} q_i b_i b_{i+1} / Omega_i, per field (dDelta/dx = d/dtau of this)."""
        r = self.rabi(w)
        prod = np.real(np.conj(amp[:-1]) * amp[1:])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(r > 0, prod / np.where(r > 0, r, 1.0), 0.0)
        out = np.zeros_like(w)
        for g, tr in enumerate(self.fields):
            for i in tr:
                out[g] -= self.q[i - 1] * ratio[i - 1]
        return out


def _diff_matrix(tau: np.ndarray, direction: int) -> sp.csr_matrix:
    """One-sided d/dtau; the inflow end gets a zero row."""
    m = len(tau)
    dt = np.diff(tau)
    if direction > 0:  # information moves to later tau: backward difference
        rows = np.arange(1, m)
        data = np.concatenate([1 / dt, -1 / dt])
        return sp.csr_matrix((data, (np.concatenate([rows, rows]), np.concatenate([rows, rows - 1]))), shape=(m, m))
    rows = np.arange(m - 1)
    data = np.concatenate([-1 / dt, 1 / dt])
    return sp.csr_matrix((data, (np.concatenate([rows, rows]), np.concatenate([rows, rows + 1]))), shape=(m, m))


def _local_jacobian(system: _System, u: np.ndarray, rho: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """dG_g/du_h at every tau (G, G, m), central differences in the scaled variables."""
    n_f = u.shape[0]
    jac = np.empty((n_f, n_f, u.shape[1]))
    for h in range(n_f):
        up, dn = u.copy(), u.copy()
        # relative steps: the closure depends on ratios of fields that may be
        # many decades apart in the tails; one-sided next to zero
        e = eps * np.maximum(np.abs(u[h]), 1e-30)
        dn[h] = np.maximum(u[h] - e, 0.0)
        up[h] = dn[h] + 2 * e
        jac[:, h] = (system.flux(up * rho) - system.flux(dn * rho)) / (2 * e)
    return jac


def _directions(system: _System, u: np.ndarray, rho: np.ndarray, groups=()) -> np.ndarray:
    """+1 where a field's information travels to later tau, -1 for earlier.

    Fields in one of ``groups`` share a direction, so that the sum of their
    fluxes cancels in the discrete equations as well.
    """
    jac = _local_jacobian(system, u, rho)
    score = np.empty(u.shape[0])
    for g in range(u.shape[0]):
        # dG/dw < 0 means w_x + |c| w_tau = 0, i.e. delay
        score[g] = -np.sum(jac[g, g])
    for grp in groups:
        score[list(grp)] = score[list(grp)].sum()
    return np.where(score >= 0, 1, -1)


def _invariant_sets(system: _System, w0: np.ndarray, tol: float = 1e-12) -> list[tuple[int, ...]]:
    """Field subsets whose fluxes cancel identically at the entrance."""
    n_f = w0.shape[0]
    flux = system.flux(w0)
    scale = max(float(np.max(np.abs(flux))), 1e-300)
    found: list[tuple[int, ...]] = []
    for k in range(2, n_f + 1):
        for sub in itertools.combinations(range(n_f), k):
            if any(set(f) <= set(sub) for f in found):
                continue
            if np.max(np.abs(flux[list(sub)].sum(axis=0))) <= tol * scale and np.any(flux[list(sub)] != 0):
                found.append(sub)
    return found


def mixing_angle(w_num: np.ndarray, w_den: np.ndarray) -> np.ndarray:
    return np.arctan2(np.sqrt(np.maximum(w_num, 0)), np.sqrt(np.maximum(w_den, 0)))


def area_coordinate(tau: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """s(tau) = integral of rho from the first grid point (trapezoid)."""
    return np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(tau))])


def propagate_reduced(
    scheme: LevelScheme,
    tau,
    entrance,
    one_photon,
    medium: MediumParams,
    closure: Closure | RegimeSpec,
    length: float,
    dx: float,
    n_store: int = 21,
    n_area: int | None = None,
    newton_tol: float = 1e-13,
    max_newton: int = 30,
    stop_on_shock: bool = True,
    theta_fields: tuple[int, int] | None = None,
    area_floor: float = 0.0,
    max_halvings: int = 6,
    stop_on_breakdown: bool = False,
) -> FieldGrid:
    """March the reduced equations from x = 0 to ``length``.

    ``entrance`` holds Omega_g^2(tau) at x = 0 for every field of
    ``scheme.fields`` (shape (G, len(tau))).  ``one_photon`` are the entrance
    one-photon detunings per transition.  ``theta_fields`` names the fields
    (numerator, denominator) of the reported mixing angle; by default the
    first conserved pair is used.

    Internally the intensities are scaled by rho(tau), the summed entrance
    intensity, and marched on a uniform grid of the area coordinate
    s = integral of rho d tau (``n_area`` points, default ``len(tau)``).
    There d(w/rho)/dx = dG/ds, free of the diverging speeds of the tails.
    ``area_floor`` adds ``area_floor * max(rho)`` to the density of s so
    that pulse tails keep grid points; useful when a weak field has a
    finite speed where the strong ones have vanished.  A step whose Newton
    iteration fails is retried as two half steps, at most ``max_halvings``
    times in a row.  If it still fails the run raises StepSizeFailure, or
    with ``stop_on_breakdown`` ends there and reports ``meta["breakdown_x"]``.
    Such a breakdown marks a steepening front the quasistatic closure
    cannot follow.
    """
    tau = np.asarray(tau, dtype=float)
    w0 = np.array(entrance, dtype=float)
    n_f = len(scheme.fields)
    if w0.shape != (n_f, tau.size):
        raise ContractViolation(f"entrance must have shape ({n_f}, {tau.size}), got {w0.shape}")
    if tau.size < 3 or np.any(np.diff(tau) <= 0):
        raise ContractViolation("tau grid must increase and have at least 3 points")
    if np.any(w0 < 0):
        raise ContractViolation("squared Rabi frequencies must be >= 0")
    if len(medium.q) != scheme.n_transitions:
        raise ContractViolation(f"need {scheme.n_transitions} medium couplings, got {len(medium.q)}")
    if not (length >= 0 and dx > 0):
        raise ContractViolation("need length >= 0 and dx > 0")
    if isinstance(closure, RegimeSpec):
        closure = regime_closure(closure)
    one_photon = np.asarray(one_photon, dtype=float)
    system = _System(scheme, np.asarray(medium.q, dtype=float), closure, multiphoton_detunings(scheme, one_photon))

    rho = w0.sum(axis=0)
    if not np.all(rho > 0):
        raise ContractViolation("the summed entrance intensity must be > 0 on the whole tau grid")
    if not area_floor >= 0:
        raise ContractViolation("area_floor must be >= 0")
    peak = rho.max()
    rho = rho + area_floor * peak  # density of s; the scaling of u follows it
    S = area_coordinate(tau, rho)
    s = np.linspace(0.0, S[-1], n_area or tau.size)
    tau_s = np.interp(s, S, tau)
    rho_s = np.interp(tau_s, tau, rho)
    u = np.array([np.interp(tau_s, tau, w0[g] / rho) for g in range(n_f)])

    def to_tau(u_s):
        return np.array([np.interp(S, s, u_s[g]) for g in range(n_f)]) * rho

    delta_field = np.array([one_photon[g[0] - 1] for g in scheme.fields])
    delta = np.repeat(delta_field[:, None], tau.size, axis=1)

    invariants = _invariant_sets(system, w0)
    directions = _directions(system, u, rho_s, invariants)
    dmats = [_diff_matrix(s, d) for d in directions]
    if theta_fields is None:
        theta_fields = next((t for t in invariants if len(t) == 2), None)
    support = rho_s - area_floor * peak >= 1e-3 * peak

    def angle_gradient(u_s):
        th = mixing_angle(*u_s[list(theta_fields)])
        return float(np.max(np.abs(np.gradient(th, s) * rho_s)[support])) if np.any(support) else 0.0

    n_steps = int(np.ceil(length / dx - 1e-9)) if length > 0 else 0
    h = length / n_steps if n_steps else 0.0
    store_at = set(np.round(np.linspace(0, n_steps, min(n_store, n_steps + 1))).astype(int).tolist())

    xs, ws, ds, drift, grad = [], [], [], [], []
    inv_ref = [u[list(t)].sum(axis=0) for t in invariants]

    def record(k, u_s, dl):
        xs.append(k * h)
        ws.append(to_tau(u_s))
        ds.append(dl.copy())
        drift.append(max((float(np.max(np.abs(u_s[list(t)].sum(axis=0) - r) / np.maximum(r.max(), 1e-300)))
                          for t, r in zip(invariants, inv_ref)), default=0.0))
        if theta_fields:
            grad.append(angle_gradient(u_s))

    grad0 = angle_gradient(u) if theta_fields else 0.0
    prev_grad = grad0
    shock = False
    shock_x = None
    record(0, u, delta)
    m = s.size
    eye = sp.identity(m, format="csr")

    def backward_euler(u_old, dx_step, x_end, depth=0):
        """One implicit step; on Newton failure retried as two half steps."""
        try:
            return _newton_step(u_old, dx_step)
        except StepSizeFailure:
            if depth >= max_halvings:
                raise StepSizeFailure(f"Newton iteration failed at x = {x_end:.4g} even with dx / {2**depth}; reduce dx")
            mid = backward_euler(u_old, 0.5 * dx_step, x_end - 0.5 * dx_step, depth + 1)
            return backward_euler(mid, 0.5 * dx_step, x_end, depth + 1)

    def _newton_step(u_old, dx_step):
        def residual(u_new):
            flux = system.flux(u_new * rho_s)
            return np.concatenate([(u_new[g] - u_old[g]) - dx_step * (dmats[g] @ flux[g]) for g in range(n_f)])

        u_new = u_old
        res = residual(u_new)
        for _ in range(max_newton):
            norm = np.max(np.abs(res))
            if norm < newton_tol:
                return u_new
            jac = _local_jacobian(system, u_new, rho_s)
            blocks = [[None] * n_f for _ in range(n_f)]
            for g in range(n_f):
                for gg in range(n_f):
                    blk = -dx_step * (dmats[g] @ sp.diags(jac[g, gg]))
                    blocks[g][gg] = blk + eye if g == gg else blk
            step = spsolve(sp.bmat(blocks, format="csc"), res).reshape(n_f, m)
            # backtracking keeps the iteration inside the basin of the smooth branch
            lam = 1.0
            while True:
                trial = u_new - lam * step
                res_t = residual(trial)
                new_norm = np.max(np.abs(res_t))
                if new_norm < norm:
                    break
                lam *= 0.5
                if lam < 1e-3 or not np.isfinite(new_norm):
                    raise StepSizeFailure("Newton iteration stalled")
            u_new, res = trial, res_t
        raise StepSizeFailure("Newton iteration did not converge")

    breakdown_x = None
    for k in range(1, n_steps + 1):
        try:
            u_next = backward_euler(u, h, k * h)
            if np.any(u_next < -1e-10):
                raise StepSizeFailure(f"negative squared field at x = {k * h:.4g}; reduce dx")
        except StepSizeFailure:
            if not stop_on_breakdown:
                raise
            breakdown_x = (k - 1) * h
            if xs[-1] != breakdown_x:
                record(k - 1, u, delta)
            break
        u = u_next
        w_tau = to_tau(u)
        amp = system.amplitudes(w_tau)
        delta = delta + h * np.gradient(system.phase_source(w_tau, amp), tau, axis=1)
        if theta_fields:
            gnow = angle_gradient(u)
            if not shock and grad0 > 0 and gnow > SHOCK_GROWTH * grad0:
                shock = True
                frac = (SHOCK_GROWTH * grad0 - prev_grad) / max(gnow - prev_grad, 1e-300)
                shock_x = (k - 1 + min(max(frac, 0.0), 1.0)) * h
            prev_grad = gnow
        if k in store_at or (shock and stop_on_shock):
            record(k, u, delta)
        if shock and stop_on_shock:
            break

    omega_sq = np.stack(ws, axis=1)
    return FieldGrid(
        x=np.array(xs),
        tau=tau,
        omega_sq=omega_sq,
        delta=np.stack(ds, axis=1),
        fields=scheme.fields,
        theta=mixing_angle(*omega_sq[list(theta_fields)]) if theta_fields else None,
        invariant_fields=tuple(invariants[0]) if invariants else (),
        invariant_drift=np.array(drift),
        max_dtheta=np.array(grad) if grad else None,
        shock=shock,
        shock_length=shock_x,
        truncated=bool((shock and stop_on_shock or breakdown_x is not None) and xs[-1] < length),
        meta={
            "scheme": scheme.name,
            "directions": directions.tolist(),
            "invariant_sets": [list(t) for t in invariants],
            "theta_fields": list(theta_fields) if theta_fields else None,
            "dx": h,
            "length": length,
            "n_area": m,
            "q": list(medium.q),
            "breakdown_x": breakdown_x,
        },
    )


def energy_audit(grid: FieldGrid, tail_fraction: float = 1e-6) -> np.ndarray:
    """W_g(x) by trapezoid quadrature; warns when a pulse is cut by the tau grid."""
    w = grid.omega_sq
    peak = np.max(w, axis=(1, 2), keepdims=False)
    ends = np.maximum(np.max(w[:, :, 0], axis=1), np.max(w[:, :, -1], axis=1))
    for g in range(w.shape[0]):
        if peak[g] > 0 and ends[g] > tail_fraction * peak[g]:
            dt = grid.tau[1] - grid.tau[0]
            warnings.warn(
                f"field {g} is not negligible at the tau-grid ends ({ends[g] / peak[g]:.2g} of peak); "
                f"truncated energy of order {ends[g] * dt:.3g} per grid cell",
                RuntimeWarning,
                stacklevel=2,
            )
    return grid.energies()


def fit_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and intercept."""
    a, b = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(a), float(b)
