"""Chain-coupled level schemes, pulse envelopes and the interaction Hamiltonian.

Levels are numbered 1..n and transitions 1..n-1 (transition ``i`` couples
levels ``i`` and ``i+1``).  Internally arrays are zero-based.  Frequencies are
in units of 1/T and times in units of T, where T is the reference pulse width
of a scenario.

The rotating-frame Hamiltonian has the multiphoton detunings on the diagonal
and ``-Omega_i`` on the first off-diagonals::

    H = diag(0, delta_1, ..., delta_{n-1}) - sum_i Omega_i (|i><i+1| + h.c.)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ContractViolation

MAX_LEVELS = 8


class Orientation(str, Enum):
    UP = "up"
    DOWN = "down"

    @property
    def sign(self) -> int:
        return 1 if self is Orientation.UP else -1


def _orientation(value) -> Orientation:
    if isinstance(value, Orientation):
        return value
    try:
        return Orientation(str(value).lower())
    except ValueError:
        raise ContractViolation(f"orientation must be 'up' or 'down', got {value!r}") from None


@dataclass(frozen=True)
class LevelScheme:
    """Topology of a chain of ``n_levels`` levels.

    ``orientation[i]`` tells whether level i+2 lies above (UP) or below (DOWN)
    level i+1.  ``degeneracy_groups`` lists 1-based transition indices driven
    by one physical field; transitions not mentioned get their own group.
    """

    n_levels: int
    orientation: tuple[Orientation, ...]
    degeneracy_groups: tuple[tuple[int, ...], ...] = ()
    name: str = "custom"

    def __post_init__(self):
        n = int(self.n_levels)
        if not 2 <= n <= MAX_LEVELS:
            raise ContractViolation(f"n_levels must lie in [2, {MAX_LEVELS}], got {n}")
        orient = tuple(_orientation(o) for o in self.orientation)
        if len(orient) != n - 1:
            raise ContractViolation(
                f"{n} levels need {n - 1} orientations, got {len(orient)}"
            )
        seen: dict[int, int] = {}
        groups = []
        for g in self.degeneracy_groups:
            g = tuple(sorted(int(i) for i in g))
            if not g:
                continue
            for i in g:
                if not 1 <= i <= n - 1:
                    raise ContractViolation(f"transition index {i} out of range 1..{n - 1}")
                if i in seen:
                    raise ContractViolation(f"transition {i} appears in more than one degeneracy group")
                seen[i] = len(groups)
            groups.append(g)
        for i in range(1, n):
            if i not in seen:
                groups.append((i,))
        groups.sort(key=lambda g: g[0])
        object.__setattr__(self, "n_levels", n)
        object.__setattr__(self, "orientation", orient)
        object.__setattr__(self, "degeneracy_groups", tuple(groups))

    @property
    def n_transitions(self) -> int:
        return self.n_levels - 1

    @property
    def signs(self) -> np.ndarray:
        """+1 for UP transitions, -1 for DOWN, as a float array."""
        return np.array([o.sign for o in self.orientation], dtype=float)

    @property
    def fields(self) -> tuple[tuple[int, ...], ...]:
        """Alias of the (complete) degeneracy partition: one entry per physical field."""
        return self.degeneracy_groups

    def group_of(self, transition: int) -> tuple[int, ...]:
        for g in self.degeneracy_groups:
            if transition in g:
                return g
        raise ContractViolation(f"no transition {transition}")

    def with_degeneracy(self, groups: Sequence[Sequence[int]]) -> "LevelScheme":
        return LevelScheme(self.n_levels, self.orientation, tuple(tuple(g) for g in groups), self.name)

    def independent(self) -> "LevelScheme":
        return self.with_degeneracy(())

    # Named configurations.  Five-level ones follow the usual M / W / ladder
    # diagrams; the three-level ones are the Lambda, V and cascade chains.
    @classmethod
    def m_system(cls, degeneracy=()) -> "LevelScheme":
        return cls(5, ("up", "down", "up", "down"), degeneracy, "M")

    @classmethod
    def w_system(cls, degeneracy=()) -> "LevelScheme":
        return cls(5, ("down", "up", "down", "up"), degeneracy, "W")

    @classmethod
    def ladder(cls, n_levels: int = 5, degeneracy=()) -> "LevelScheme":
        return cls(n_levels, ("up",) * (n_levels - 1), degeneracy, "ladder")

    @classmethod
    def lambda_system(cls, degeneracy=()) -> "LevelScheme":
        return cls(3, ("up", "down"), degeneracy, "lambda")

    @classmethod
    def vee_system(cls, degeneracy=()) -> "LevelScheme":
        return cls(3, ("down", "up"), degeneracy, "vee")

    @classmethod
    def named(cls, name: str, degeneracy=()) -> "LevelScheme":
        key = name.strip().lower()
        builders = {
            "m": cls.m_system,
            "w": cls.w_system,
            "ladder": cls.ladder,
            "ladder5": cls.ladder,
            "lambda": cls.lambda_system,
            "vee": cls.vee_system,
            "v": cls.vee_system,
        }
        if key == "ladder3":
            return cls.ladder(3, degeneracy)
        if key not in builders:
            raise ContractViolation(f"unknown scheme {name!r}; known: {sorted(builders) + ['ladder3']}")
        return builders[key](degeneracy=degeneracy)


def multiphoton_detunings(scheme: LevelScheme, one_photon) -> np.ndarray:
    """Signed cumulative sum of one-photon detunings, with delta_0 = 0 prepended.

    ``one_photon`` may carry trailing axes (e.g. a time series per transition);
    the result then has shape ``(n_levels, ...)``.
    """
    d = np.asarray(one_photon, dtype=float)
    if d.shape[:1] != (scheme.n_transitions,):
        raise ContractViolation(
            f"expected {scheme.n_transitions} one-photon detunings, got shape {d.shape}"
        )
    signs = scheme.signs.reshape((-1,) + (1,) * (d.ndim - 1))
    cum = np.cumsum(signs * d, axis=0)
    return np.concatenate([np.zeros((1,) + d.shape[1:]), cum], axis=0)


def one_photon_from_multiphoton(scheme: LevelScheme, multi_photon) -> np.ndarray:
    """Inverse of :func:`multiphoton_detunings`."""
    m = np.asarray(multi_photon, dtype=float)
    if m.shape[:1] != (scheme.n_levels,):
        raise ContractViolation(f"expected {scheme.n_levels} multiphoton detunings, got shape {m.shape}")
    if np.any(m[0] != 0):
        raise ContractViolation("delta_0 must be 0")
    signs = scheme.signs.reshape((-1,) + (1,) * (m.ndim - 1))
    return signs * np.diff(m, axis=0)


@dataclass(frozen=True)
class DetuningLadder:
    """One-photon detunings of a scheme; multiphoton values are always derived."""

    scheme: LevelScheme
    one_photon: tuple[float, ...]

    def __post_init__(self):
        d = tuple(float(x) for x in np.atleast_1d(np.asarray(self.one_photon, dtype=float)))
        if len(d) != self.scheme.n_transitions:
            raise ContractViolation(
                f"expected {self.scheme.n_transitions} one-photon detunings, got {len(d)}"
            )
        object.__setattr__(self, "one_photon", d)

    @property
    def multi_photon(self) -> np.ndarray:
        return multiphoton_detunings(self.scheme, self.one_photon)

    @classmethod
    def from_multiphoton(cls, scheme: LevelScheme, multi_photon) -> "DetuningLadder":
        return cls(scheme, tuple(one_photon_from_multiphoton(scheme, multi_photon)))


@dataclass(frozen=True)
class HamiltonianSnapshot:
    matrix: np.ndarray
    time: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def check(self) -> None:
        """Raise if the snapshot is not Hermitian and tridiagonal."""
        h = self.matrix
        scale = max(np.linalg.norm(h), 1.0)
        if np.linalg.norm(h - h.conj().T) >= 1e-12 * scale:
            raise ContractViolation("Hamiltonian is not Hermitian")
        i, j = np.indices(h.shape)
        if np.any(h[np.abs(i - j) > 1] != 0):
            raise ContractViolation("Hamiltonian is not tridiagonal")


def _diag(detunings, n_levels: int) -> np.ndarray:
    if isinstance(detunings, DetuningLadder):
        return detunings.multi_photon
    d = np.asarray(detunings, dtype=float)
    if d.shape != (n_levels,):
        raise ContractViolation(f"expected {n_levels} multiphoton detunings, got shape {d.shape}")
    return d


def build_hamiltonian(scheme: LevelScheme, rabi, detunings, time: float = 0.0) -> HamiltonianSnapshot:
    """Assemble H for one instant.

    ``detunings`` is a :class:`DetuningLadder` or the multiphoton vector
    ``(0, delta_1, ..., delta_{n-1})``.
    """
    rabi = np.asarray(rabi, dtype=float)
    n = scheme.n_levels
    if rabi.shape != (n - 1,):
        raise ContractViolation(f"expected {n - 1} Rabi frequencies, got shape {rabi.shape}")
    if np.any(rabi < 0):
        raise ContractViolation("Rabi frequencies must be nonnegative")
    diag = _diag(detunings, n)
    h = np.diag(diag.astype(float)) - np.diag(rabi, 1) - np.diag(rabi, -1)
    return HamiltonianSnapshot(h, float(time))


def hamiltonian_stack(diag, rabi) -> np.ndarray:
    """Vectorised H for many instants.

    ``diag`` has shape (n,) or (n, m); ``rabi`` has shape (n-1, m).  Returns
    an array of shape (m, n, n).
    """
    rabi = np.asarray(rabi, dtype=float)
    n = rabi.shape[0] + 1
    m = rabi.shape[1]
    diag = np.broadcast_to(np.asarray(diag, dtype=float).reshape(n, -1), (n, m))
    h = np.zeros((m, n, n))
    idx = np.arange(n)
    h[:, idx, idx] = diag.T
    h[:, idx[:-1], idx[1:]] = -rabi.T
    h[:, idx[1:], idx[:-1]] = -rabi.T
    return h


SHAPES = ("gaussian", "sech", "sin2", "constant", "piecewise_linear")


@dataclass(frozen=True)
class PulseEnvelope:
    """Real nonnegative Rabi-frequency envelope.

    gaussian:          peak * exp(-((t - center) / width)**2)
    sech:              peak / cosh((t - center) / width)
    sin2:              peak * cos(pi (t - center) / (2 width))**2 for |t - center| <= width
    constant:          peak
    piecewise_linear:  peak * interp(t, points), zero outside the points' span;
                       ``points`` holds (time, fraction-of-peak) pairs
    ``on_interval`` zeroes the envelope outside [start, stop].
    """

    shape: str = "gaussian"
    peak_rabi: float = 0.0
    center: float = 0.0
    width: float = 1.0
    on_interval: tuple[float, float] | None = None
    points: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        shape = str(self.shape).lower()
        if shape not in SHAPES:
            raise ContractViolation(f"unknown pulse shape {self.shape!r}; expected one of {SHAPES}")
        object.__setattr__(self, "shape", shape)
        if not self.peak_rabi >= 0:
            raise ContractViolation(f"peak Rabi frequency must be >= 0, got {self.peak_rabi}")
        if shape in ("gaussian", "sech", "sin2") and not self.width > 0:
            raise ContractViolation(f"pulse width must be > 0, got {self.width}")
        pts = tuple((float(a), float(b)) for a, b in self.points)
        if shape == "piecewise_linear":
            if len(pts) < 2:
                raise ContractViolation("piecewise_linear envelope needs at least two points")
            if any(b < 0 for _, b in pts):
                raise ContractViolation("piecewise_linear values must be >= 0")
            if any(t1 <= t0 for (t0, _), (t1, _) in zip(pts, pts[1:])):
                raise ContractViolation("piecewise_linear times must increase")
        object.__setattr__(self, "points", pts)
        if self.on_interval is not None:
            a, b = (float(x) for x in self.on_interval)
            if b < a:
                raise ContractViolation("on_interval must satisfy start <= stop")
            object.__setattr__(self, "on_interval", (a, b))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x = t - self.center
        if self.shape == "gaussian":
            v = np.exp(-((x / self.width) ** 2))
        elif self.shape == "sech":
            v = 1 / np.cosh(x / self.width)
        elif self.shape == "sin2":
            v = np.where(np.abs(x) <= self.width, np.cos(0.5 * np.pi * x / self.width) ** 2, 0.0)
        elif self.shape == "constant":
            v = np.ones_like(t)
        else:
            pt, pv = np.array(self.points).T
            v = np.interp(t, pt, pv, left=0.0, right=0.0)
        out = self.peak_rabi * v
        if self.on_interval is not None:
            a, b = self.on_interval
            out = np.where((t >= a) & (t <= b), out, 0.0)
        return out

    def derivative(self, t):
        """Analytic time derivative (numerical for piecewise-linear)."""
        t = np.asarray(t, dtype=float)
        x = t - self.center
        if self.shape == "gaussian":
            d = -2 * x / self.width**2 * self(t)
        elif self.shape == "sech":
            d = -np.tanh(x / self.width) / self.width * self(t)
        elif self.shape == "sin2":
            k = 0.5 * np.pi / self.width
            d = np.where(np.abs(x) <= self.width, -self.peak_rabi * k * np.sin(2 * k * x), 0.0)
        elif self.shape == "constant":
            d = np.zeros_like(t)
        else:
            h = 1e-6
            d = (self(t + h) - self(t - h)) / (2 * h)
        if self.on_interval is not None:
            a, b = self.on_interval
            d = np.where((t >= a) & (t <= b), d, 0.0)
        return d


@dataclass(frozen=True)
class PulseTrain:
    """Envelopes per transition plus one-photon detunings.

    Transitions in one degeneracy group are driven by the envelope stored at
    the group's lowest transition index; the others are ignored.
    """

    scheme: LevelScheme
    envelopes: tuple[PulseEnvelope, ...]
    one_photon: tuple[float, ...]

    def __post_init__(self):
        env = tuple(self.envelopes)
        if len(env) != self.scheme.n_transitions:
            raise ContractViolation(
                f"expected {self.scheme.n_transitions} envelopes, got {len(env)}"
            )
        object.__setattr__(self, "envelopes", env)
        object.__setattr__(self, "one_photon", DetuningLadder(self.scheme, self.one_photon).one_photon)

    @property
    def detunings(self) -> DetuningLadder:
        return DetuningLadder(self.scheme, self.one_photon)

    def envelope_for(self, transition: int) -> PulseEnvelope:
        return self.envelopes[self.scheme.group_of(transition)[0] - 1]

    @property
    def peak(self) -> float:
        return max(self.envelope_for(i).peak_rabi for i in range(1, self.scheme.n_levels))

    def hamiltonians(self, times) -> np.ndarray:
        """H(t) for every entry of ``times``; shape (len(times), n, n)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return hamiltonian_stack(self.detunings.multi_photon, sample_pulses(self, times))

    def hamiltonian_derivatives(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        d = np.array([self.envelope_for(i).derivative(times) for i in range(1, self.scheme.n_levels)])
        return hamiltonian_stack(np.zeros(self.scheme.n_levels), d)


def sample_pulses(train: PulseTrain, t) -> np.ndarray:
    """Rabi frequencies Omega_i(t); shape (n-1,) for scalar t, (n-1, m) for arrays."""
    return np.array(
        [train.envelope_for(i)(t) for i in range(1, train.scheme.n_levels)], dtype=float
    )
