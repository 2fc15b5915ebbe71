"""Single-atom amplitude dynamics under a pulse train.

``i db/dt = H(t) b`` is integrated with classical fixed-step RK4.  The
Hamiltonian is sampled at whole and half steps once up front; the norm is
never renormalised, its drift is reported instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import LevelScheme, PulseEnvelope, PulseTrain, hamiltonian_stack, sample_pulses
from .errors import ContractViolation, IntegrationFailure
from .quasienergy import QuasienergyFan, track_eigenbranches

STEP_FACTOR = 0.02  # largest allowed step times max frequency
DEFAULT_STEP_FACTOR = 0.01
NORM_DRIFT_LIMIT = 1e-6
RATIO_THRESHOLD = 0.1
ON_FRACTION = 0.2
COUPLING_FLOOR = 1e-2  # in units 1/T


@dataclass(frozen=True)
class TimeGrid:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.stop > self.start:
            raise ContractViolation("time grid needs stop > start")
        if not self.step > 0:
            raise ContractViolation("time step must be > 0")

    @property
    def n_steps(self) -> int:
        return int(np.ceil((self.stop - self.start) / self.step - 1e-9))

    @property
    def h(self) -> float:
        """Actual step, shrunk slightly so the grid ends exactly at ``stop``."""
        return (self.stop - self.start) / self.n_steps

    def points(self) -> np.ndarray:
        return self.start + self.h * np.arange(self.n_steps + 1)

    @classmethod
    def resolving(cls, train: PulseTrain, start: float, stop: float, factor: float = DEFAULT_STEP_FACTOR) -> "TimeGrid":
        return cls(start, stop, factor / max_frequency(train))


def max_frequency(train: PulseTrain) -> float:
    """Upper bound of the spectral radius of H(t): max|delta| + 2 max Omega."""
    return float(np.max(np.abs(train.detunings.multi_photon)) + 2 * train.peak) or 1.0


@dataclass(frozen=True)
class AmplitudeTrajectory:
    times: np.ndarray
    amplitudes: np.ndarray  # (T, n)
    rabi: np.ndarray  # (n-1, T)
    step: float

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm_error(self) -> np.ndarray:
        return np.abs(self.populations.sum(axis=1) - 1.0)

    @property
    def final(self) -> np.ndarray:
        return self.amplitudes[-1]

    def bare_fidelities(self) -> np.ndarray:
        return self.populations[-1]


@dataclass(frozen=True)
class EvolutionResult:
    trajectory: AmplitudeTrajectory
    fan: QuasienergyFan
    occupied_branch: int
    adiabatic_fidelity: float

    @property
    def bare_fidelities(self) -> np.ndarray:
        return self.trajectory.bare_fidelities()


def _normalised_state(psi0, n: int) -> np.ndarray:
    b = np.asarray(psi0, dtype=complex)
    if b.shape != (n,):
        raise ContractViolation(f"initial state must have {n} components")
    if abs(np.linalg.norm(b) - 1) > 1e-12:
        raise ContractViolation("initial state must be normalised")
    return b


def basis_state(n: int, level: int) -> np.ndarray:
    """Bare state |level> (1-based)."""
    b = np.zeros(n, dtype=complex)
    b[level - 1] = 1.0
    return b


def integrate(train: PulseTrain, psi0, grid: TimeGrid, store_every: int = 1) -> AmplitudeTrajectory:
    """RK4 integration; returns the state every ``store_every`` steps (and at the end)."""
    n = train.scheme.n_levels
    b = _normalised_state(psi0, n)
    fmax = max_frequency(train)
    if grid.h > STEP_FACTOR / fmax * (1 + 1e-12):
        raise ContractViolation(
            f"time step {grid.h:.3g} does not resolve max frequency {fmax:.3g}; need <= {STEP_FACTOR / fmax:.3g}"
        )
    nsteps, h = grid.n_steps, grid.h
    half = grid.start + 0.5 * h * np.arange(2 * nsteps + 1)
    gen = -1j * hamiltonian_stack(train.detunings.multi_photon, sample_pulses(train, half))
    keep = list(range(0, nsteps + 1, store_every))
    if keep[-1] != nsteps:
        keep.append(nsteps)
    out = np.empty((len(keep), n), dtype=complex)
    out[0] = b
    j = 1
    for k in range(nsteps):
        g0, g1, g2 = gen[2 * k], gen[2 * k + 1], gen[2 * k + 2]
        k1 = g0 @ b
        k2 = g1 @ (b + 0.5 * h * k1)
        k3 = g1 @ (b + 0.5 * h * k2)
        k4 = g2 @ (b + h * k3)
        b = b + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if j < len(keep) and k + 1 == keep[j]:
            drift = abs(np.vdot(b, b).real - 1)
            if drift > NORM_DRIFT_LIMIT:
                raise IntegrationFailure(
                    f"norm drift {drift:.3g} at t = {grid.start + (k + 1) * h:.4g}; use a smaller time step"
                )
            out[j] = b
            j += 1
    times = grid.start + h * np.array(keep)
    return AmplitudeTrajectory(times, out, sample_pulses(train, times), h)


def evolve(train: PulseTrain, psi0, grid: TimeGrid, store_every: int = 1) -> EvolutionResult:
    """Integrate and compare the final state with bare states and the followed adiabatic state."""
    traj = integrate(train, psi0, grid, store_every)
    fan = track_eigenbranches(traj.times, train.hamiltonians(traj.times))
    a = fan.branch_of_state(traj.amplitudes[0], 0)
    fid = float(abs(np.vdot(fan.eigvecs[a, -1], traj.final)) ** 2)
    return EvolutionResult(traj, fan, a, fid)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdiabaticityMonitor:
    times: np.ndarray
    branch: int
    min_gap: np.ndarray
    coupling: np.ndarray
    ratio: np.ndarray
    on_window: np.ndarray
    threshold: float = RATIO_THRESHOLD

    @property
    def max_ratio(self) -> float:
        r = self.ratio[self.on_window]
        return float(r.max()) if r.size else 0.0

    @property
    def adiabatic(self) -> bool:
        return self.max_ratio <= self.threshold

    @property
    def verdict(self) -> str:
        return "adiabatic" if self.adiabatic else "nonadiabatic"


def adiabaticity_monitor(
    fan: QuasienergyFan,
    trajectory: AmplitudeTrajectory,
    threshold: float = RATIO_THRESHOLD,
    on_fraction: float = ON_FRACTION,
    coupling_floor: float = COUPLING_FLOOR,
) -> AdiabaticityMonitor:
    """Nonadiabatic coupling over gap for the branch occupied at the first time.

    ratio(t) = max_b |<v_b|d v_a/dt>| / |lambda_a - lambda_b|.  The verdict
    only looks at times where the strongest field exceeds ``on_fraction`` of
    its peak: near field-off the gap to degenerate bare levels closes while
    the populations are frozen, so the ratio there is meaningless.  For the
    same reason branches coupled more weakly than ``coupling_floor`` (units
    1/T) are left out: a vanishing gap to an uncoupled bare level is not a
    breakdown of adiabatic following.
    """
    t = np.asarray(fan.times)
    if t.shape != trajectory.times.shape or np.any(t != trajectory.times):
        raise ContractViolation("fan and trajectory must share the time grid")
    a = fan.branch_of_state(trajectory.amplitudes[0], 0)
    v = fan.eigvecs.copy()  # (B, T, n)
    # align phases along time so finite differences are smooth
    for b in range(v.shape[0]):
        ov = np.einsum("tn,tn->t", v[b, :-1].conj(), v[b, 1:])
        ph = np.where(np.abs(ov) > 0, ov / np.maximum(np.abs(ov), 1e-300), 1.0)
        v[b, 1:] /= np.cumprod(ph)[:, None]
    dva = np.gradient(v[a], t, axis=0) if len(t) > 1 else np.zeros_like(v[a])
    coup = np.abs(np.einsum("btn,tn->bt", v.conj(), dva))
    gaps = np.abs(fan.branches - fan.branches[a])
    others = np.arange(fan.n_branches) != a
    coup, gaps = coup[others], gaps[others]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(coup >= max(coupling_floor, 1e-300), coup / gaps, 0.0)
    ratio = np.max(r, axis=0) if r.size else np.zeros_like(t)
    strength = trajectory.rabi.max(axis=0) if trajectory.rabi.size else np.zeros_like(t)
    peak = strength.max() if strength.size else 0.0
    on = strength >= on_fraction * peak if peak > 0 else np.zeros_like(t, dtype=bool)
    return AdiabaticityMonitor(
        t, a, gaps.min(axis=0) if gaps.size else np.zeros_like(t), coup.max(axis=0) if coup.size else np.zeros_like(t),
        ratio, on, threshold,
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    train: PulseTrain
    psi0: np.ndarray
    grid: TimeGrid
    description: str = ""

    @property
    def scheme(self) -> LevelScheme:
        return self.train.scheme

    @property
    def detunings(self):
        return self.train.detunings


SCENARIOS = ("fig2_m_stirap", "fig3_w_transfer", "w_return")


def scenario(name: str, peak: float = 30.0, detuning: float = 10.0) -> Scenario:
    """Reconstructed pulse sequences of the population-transfer figures.

    fig2_m_stirap:   M scheme, delta = (0, D, 0, D, 0); Stokes-type pulses
                     Omega_2 = Omega_4 precede pump-type Omega_1 = Omega_3 by 1.2 T.
    fig3_w_transfer: W scheme in regime (b), start in |2>; one long field
                     drives transitions 1 and 2; Omega_4 precedes Omega_3.
    w_return:        as fig3 but Omega_4 is wider than and centred on Omega_3,
                     so theta_2 returns to 0 and the atom ends in |2>.
    """
    d = float(detuning)
    g = lambda p, c, w: PulseEnvelope("gaussian", p, c, w)  # noqa: E731
    if name == "fig2_m_stirap":
        scheme = LevelScheme.m_system()
        pump, stokes = g(peak, 0.6, 1.0), g(peak, -0.6, 1.0)
        train = PulseTrain(scheme, (pump, stokes, pump, stokes), (d, d, d, d))
        start, stop, psi0 = -6.0, 6.0, basis_state(5, 1)
        desc = "M-system STIRAP chain, counterintuitive Gaussians, exact two-photon resonances"
    elif name in ("fig3_w_transfer", "w_return"):
        scheme = LevelScheme.w_system(degeneracy=((1, 2),))
        long = g(peak, 0.0, 3.0)
        if name == "fig3_w_transfer":
            om3, om4 = g(peak, 0.6, 1.0), g(peak, -0.6, 1.0)
            desc = "W-system transfer |2> -> |5>, Omega_4 before and off before Omega_3"
        else:
            om3, om4 = g(peak, 0.0, 1.0), g(peak, 0.0, 2.0)
            desc = "W-system return to |2>, Omega_4 encloses Omega_3"
        # multiphoton detunings (0, D, 2D, 0, D)
        train = PulseTrain(scheme, (long, long, om3, om4), (-d, d, 2 * d, d))
        start, stop, psi0 = -12.0, 12.0, basis_state(5, 2)
    else:
        raise ContractViolation(f"unknown scenario {name!r}; known: {SCENARIOS}")
    grid = TimeGrid.resolving(train, start, stop)
    return Scenario(name, train, psi0, grid, desc)
