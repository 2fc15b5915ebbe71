"""Transparency regimes: parameter constraints, pinned quasienergies, closed-form states.

A regime fixes linear relations among the multiphoton detunings and equalities
among Rabi frequencies such that one quasienergy stays equal to a detuning for
the whole interaction.  When the eigenstate on that branch has vanishing
field-summed dipoles the medium is transparent; otherwise the condition is
necessary only.

Closed-form states are written for the sign convention of :mod:`.chain`
(``-Omega`` off the diagonal).  The alternating gauge ``b_k -> (-1)**k b_k``
maps them onto the ``+Omega`` convention.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import null_space

from .chain import LevelScheme, build_hamiltonian, hamiltonian_stack
from .errors import ContractViolation, RegimeMismatch
from .quasienergy import dipole_moments

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class LinearConstraint:
    """sum_k coeffs[k] * delta_k == 0 (or != 0 when used as an exclusion)."""

    coeffs: tuple[float, ...]
    text: str

    def value(self, deltas) -> float:
        return float(np.dot(self.coeffs, deltas))


def _lin(n: int, text: str, **terms) -> LinearConstraint:
    c = np.zeros(n)
    for key, val in terms.items():
        c[int(key[1:])] = val
    return LinearConstraint(tuple(c), text)


@dataclass(frozen=True)
class AdiabaticState:
    amplitudes: np.ndarray
    mixing_angles: dict
    normalizer: float
    printed_normalizer: float | None = None
    regime: str = ""

    @property
    def normalizer_mismatch(self) -> float | None:
        if self.printed_normalizer is None:
            return None
        return float(abs(self.normalizer - self.printed_normalizer))


# ---------------------------------------------------------------------------
# closed forms; rabi has shape (n-1, ...), deltas (n, ...)


def _normalise(raw, printed):
    norm = np.sqrt(np.sum(np.abs(raw) ** 2, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        return raw / norm, norm, printed


def _angle(a, b):
    """(sin, cos, angle) of atan2(a, b), computed from the ratio so exact zeros stay exact."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    h = np.hypot(a, b)
    safe = np.where(h > 0, h, 1.0)
    return np.where(h > 0, a / safe, 0.0), np.where(h > 0, b / safe, 1.0), np.arctan2(a, b)


def state_lambda_dark(rabi, deltas):
    s, c, th = _angle(rabi[0], rabi[1])
    raw = np.array([c, np.zeros_like(th), -s])
    return (*_normalise(raw, np.ones_like(th)), {"theta": th})


def state_lambda_delta1(rabi, deltas):
    sp, cp, phi = _angle(SQRT2 * np.asarray(rabi[0]), deltas[1])
    raw = np.array([sp / SQRT2, -cp, -sp / SQRT2])
    return (*_normalise(raw, np.ones_like(phi)), {"Phi": phi})


def state_a(rabi, deltas):
    s1, c1, t1 = _angle(rabi[0], rabi[1])
    s2, c2, t2 = _angle(rabi[2], rabi[3])
    z = np.zeros_like(t1)
    raw = np.array([c1 * c2, z, -s1 * c2, z, s1 * s2])
    printed = np.sqrt(1 - s2**2 * c1**2)
    return (*_normalise(raw, printed), {"theta1": t1, "theta2": t2})


def state_b(rabi, deltas):
    sp, cp, phi = _angle(SQRT2 * np.asarray(rabi[0]), deltas[1])
    s2, c2, t2 = _angle(rabi[2], rabi[3])
    raw = np.array([sp * c2, -SQRT2 * cp * c2, -sp * c2, np.zeros_like(phi), sp * s2])
    printed = np.sqrt(sp**2 * s2**2 + 2 * c2**2)
    return (*_normalise(raw, printed), {"Phi": phi, "theta2": t2})


def state_c(rabi, deltas):
    s1, c1, p1 = _angle(rabi[0], deltas[1])
    s2, c2, p2 = _angle(rabi[2], deltas[3])
    raw = np.array([s1 * s2, -c1 * s2, -s1 * s2, s1 * c2, s1 * s2])
    printed = np.sqrt(s1**2 + s2**2 + s1**2 * s2**2)
    return (*_normalise(raw, printed), {"Phi1": p1, "Phi2": p2})


def state_d(rabi, deltas):
    # one angle serves both the |1>,|3> and |4>,|5> amplitudes
    s1, c1, t1 = _angle(rabi[0], rabi[1])
    sp, cp, p3 = _angle(rabi[3], deltas[4])
    raw = np.array([sp * c1, np.zeros_like(t1), -sp * s1, cp * s1, sp * s1])
    printed = np.sqrt(cp**2 + s1**2)
    return (*_normalise(raw, printed), {"theta1": t1, "Phi3": p3})


@dataclass(frozen=True)
class RegimeSpec:
    """Constraints of a regime and the quasienergy it pins.

    ``rabi_constraints`` are groups of 1-based transitions with equal Rabi
    frequency; by default these are also the fields whose dipoles are summed
    in the transparency test (degenerate pumping).
    """

    name: str
    n_levels: int
    detuning_constraints: tuple[LinearConstraint, ...]
    rabi_constraints: tuple[tuple[int, ...], ...]
    pinned: LinearConstraint
    required_initial_state: int
    closed_form: Callable | None = None
    exclusions: tuple[LinearConstraint, ...] = ()
    degeneracy: tuple[tuple[int, ...], ...] | None = None
    note: str = ""

    @property
    def fields(self) -> tuple[tuple[int, ...], ...]:
        return self.rabi_constraints if self.degeneracy is None else self.degeneracy

    def scheme(self, degenerate: bool = True) -> LevelScheme:
        orient = ("up",) * (self.n_levels - 1)
        return LevelScheme(self.n_levels, orient, self.fields if degenerate else (), self.name)

    def pinned_value(self, deltas) -> float:
        return self.pinned.value(deltas)

    def violations(self, rabi, deltas, rtol: float = 1e-10) -> list[str]:
        rabi = np.asarray(rabi, dtype=float)
        deltas = np.asarray(deltas, dtype=float)
        out = []
        dscale = max(1.0, float(np.max(np.abs(deltas))))
        if abs(deltas[0]) > 0:
            out.append("delta_0 = 0")
        for c in self.detuning_constraints:
            if abs(c.value(deltas)) > rtol * dscale:
                out.append(c.text)
        for c in self.exclusions:
            if abs(c.value(deltas)) <= rtol * dscale:
                out.append(c.text)
        rscale = max(1.0, float(np.max(np.abs(rabi)))) if rabi.size else 1.0
        for g in self.rabi_constraints:
            vals = rabi[[i - 1 for i in g]]
            if np.ptp(vals) > rtol * rscale:
                out.append(" = ".join(f"Omega_{i}" for i in g))
        return out

    def check(self, rabi, deltas, rtol: float = 1e-10) -> None:
        bad = self.violations(rabi, deltas, rtol)
        if bad:
            raise RegimeMismatch(f"regime {self.name}: constraint(s) violated: {'; '.join(bad)}")

    def sample(self, rng: np.random.Generator, detuning_scale: float = 20.0, rabi_range=(0.2, 20.0)):
        """Random (rabi, deltas) satisfying every constraint."""
        n = self.n_levels
        rows = [np.eye(n)[0]] + [np.array(c.coeffs) for c in self.detuning_constraints]
        basis = null_space(np.array(rows))
        for _ in range(100):
            deltas = basis @ rng.uniform(-1, 1, basis.shape[1]) if basis.size else np.zeros(n)
            m = float(np.max(np.abs(deltas))) if deltas.size else 0.0
            if m == 0:
                continue
            deltas = deltas * (detuning_scale * rng.uniform(0.2, 1.0) / m)
            deltas[0] = 0.0
            if all(abs(c.value(deltas)) > 0.05 * detuning_scale for c in self.exclusions):
                break
        else:
            raise ContractViolation(f"could not sample regime {self.name}")
        rabi = rng.uniform(*rabi_range, n - 1)
        for g in self.rabi_constraints:
            rabi[[i - 1 for i in g]] = rabi[g[0] - 1]
        return rabi, deltas


def _catalog() -> dict[str, RegimeSpec]:
    c3 = lambda text, **kw: _lin(3, text, **kw)  # noqa: E731
    c5 = lambda text, **kw: _lin(5, text, **kw)  # noqa: E731
    regimes = [
        RegimeSpec(
            "lambda-dark", 3, (c3("delta_2 = 0", d2=1),), (), c3("lambda = 0"), 1,
            state_lambda_dark,
        ),
        RegimeSpec(
            "lambda-delta1", 3, (c3("delta_2 = 2 delta_1", d2=1, d1=-2),), ((1, 2),),
            c3("lambda = delta_1", d1=1), 2, state_lambda_delta1,
        ),
        RegimeSpec(
            "a", 5, (c5("delta_2 = 0", d2=1), c5("delta_4 = 0", d4=1)), (), c5("lambda = 0"), 1,
            state_a,
        ),
        RegimeSpec(
            "b", 5, (c5("delta_1 = delta_4", d1=1, d4=-1), c5("delta_2 = 2 delta_1", d2=1, d1=-2)),
            ((1, 2),), c5("lambda = delta_1", d1=1), 2, state_b,
        ),
        RegimeSpec(
            "c", 5,
            (c5("delta_1 = delta_2", d1=1, d2=-1), c5("delta_2 = delta_3", d2=1, d3=-1),
             c5("delta_4 = 2 delta_1", d4=1, d1=-2)),
            ((1, 2), (3, 4)), c5("lambda = delta_1", d1=1), 2, state_c,
        ),
        RegimeSpec(
            "d", 5, (c5("delta_3 = 0", d3=1), c5("delta_4 = -delta_2", d4=1, d2=1)), ((3, 4),),
            c5("lambda = 0"), 4, state_d, exclusions=(c5("delta_2 != 0", d2=1),),
            note="printed as delta_2 = delta_4; lambda = 0 is an eigenvalue only for delta_4 = -delta_2",
        ),
        RegimeSpec(
            "e", 5,
            (c5("2 delta_2 = delta_4", d2=2, d4=-1), c5("delta_1 + delta_3 = delta_4", d1=1, d3=1, d4=-1)),
            ((1, 4), (2, 3)), c5("lambda = delta_2", d2=1), 3,
        ),
        RegimeSpec(
            "f", 5, (c5("delta_1 = delta_2", d1=1, d2=-1), c5("3 delta_3 = delta_2 + delta_4", d3=3, d2=-1, d4=-1)),
            ((1, 2),), c5("lambda = delta_3", d3=1), 4,
        ),
    ]
    return {r.name: r for r in regimes}


CATALOG: dict[str, RegimeSpec] = _catalog()

# Alternative readings reported next to the catalog entries.
VARIANTS: dict[str, RegimeSpec] = {
    "d-printed": RegimeSpec(
        "d-printed", 5, (_lin(5, "delta_3 = 0", d3=1), _lin(5, "delta_2 = delta_4", d2=1, d4=-1)), ((3, 4),),
        _lin(5, "lambda = 0"), 4, state_d, exclusions=(_lin(5, "delta_2 != 0", d2=1),),
    ),
    "f-2d3": RegimeSpec(
        "f-2d3", 5, (_lin(5, "delta_1 = delta_2", d1=1, d2=-1), _lin(5, "2 delta_3 = delta_2 + delta_4", d3=2, d2=-1, d4=-1)),
        ((1, 2),), _lin(5, "lambda = delta_3", d3=1), 4,
    ),
    "f-derived": RegimeSpec(
        "f-derived", 5, (_lin(5, "delta_1 = delta_3", d1=1, d3=-1), _lin(5, "3 delta_3 = delta_2 + delta_4", d3=3, d2=-1, d4=-1)),
        ((1, 2), (3, 4)), _lin(5, "lambda = delta_3", d3=1), 4,
        note="conditions under which lambda = delta_3 holds identically given Omega_1 = Omega_2, Omega_3 = Omega_4",
    ),
}

ALIASES = {"Λ-dark": "lambda-dark", "Λ-delta1": "lambda-delta1", "L-dark": "lambda-dark", "L-delta1": "lambda-delta1"}


def get_regime(name: str) -> RegimeSpec:
    key = ALIASES.get(name, name)
    if key in CATALOG:
        return CATALOG[key]
    if key in VARIANTS:
        return VARIANTS[key]
    raise ContractViolation(f"unknown regime {name!r}; known: {sorted(CATALOG) + sorted(VARIANTS)}")


def adiabatic_state(regime: RegimeSpec, rabi, deltas, rtol: float = 1e-10) -> AdiabaticState:
    """Closed-form eigenstate on the pinned branch; raises RegimeMismatch if constraints fail."""
    if regime.closed_form is None:
        raise ContractViolation(f"regime {regime.name} has no closed-form state")
    rabi = np.asarray(rabi, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    regime.check(rabi, deltas, rtol)
    amp, norm, printed, angles = regime.closed_form(rabi, deltas)
    return AdiabaticState(
        amplitudes=np.asarray(amp, dtype=complex),
        mixing_angles={k: float(v) for k, v in angles.items()},
        normalizer=float(norm),
        printed_normalizer=float(printed),
        regime=regime.name,
    )


def closure_populations(regime: RegimeSpec, rabi, deltas) -> np.ndarray:
    """|b_k|^2 of the closed-form state for arrays of local fields, shape (n, ...)."""
    amp, *_ = regime.closed_form(np.asarray(rabi, dtype=float), np.asarray(deltas, dtype=float))
    return np.abs(amp) ** 2


def closure_amplitudes(regime: RegimeSpec, rabi, deltas) -> np.ndarray:
    amp, *_ = regime.closed_form(np.asarray(rabi, dtype=float), np.asarray(deltas, dtype=float))
    return amp


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialResult:
    trial: int
    rabi: tuple[float, ...]
    deltas: tuple[float, ...]
    pinned_value: float
    residual: float
    eigen_hit: bool
    dipole_sums: tuple[float, ...]
    transparent: bool
    offending_fields: tuple[tuple[int, ...], ...]
    state_residual: float

    @property
    def verdict(self) -> str:
        return "transparent" if self.transparent else "necessary-only"


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    degenerate: bool
    seed: int
    trials: tuple[TrialResult, ...] = field(default=())
    eigen_tol: float = 1e-8
    dipole_tol: float = 1e-8

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def eigen_hits(self) -> int:
        return sum(t.eigen_hit for t in self.trials)

    @property
    def transparent_count(self) -> int:
        return sum(t.transparent for t in self.trials)

    @property
    def all_pinned(self) -> bool:
        return self.eigen_hits == self.n_trials

    @property
    def all_transparent(self) -> bool:
        return self.transparent_count == self.n_trials

    def summary(self) -> dict:
        return {
            "regime": self.regime,
            "degenerate": self.degenerate,
            "seed": self.seed,
            "trials": self.n_trials,
            "eigen_hits": self.eigen_hits,
            "transparent": self.transparent_count,
            "max_residual": max((t.residual for t in self.trials), default=0.0),
            "max_dipole": max((max(map(abs, t.dipole_sums)) for t in self.trials), default=0.0),
        }

    def to_dict(self) -> dict:
        out = self.summary()
        out["eigen_tol"] = self.eigen_tol
        out["dipole_tol"] = self.dipole_tol
        out["per_trial"] = [
            {
                "trial": t.trial,
                "rabi": list(t.rabi),
                "deltas": list(t.deltas),
                "pinned_value": t.pinned_value,
                "residual": t.residual,
                "eigen_hit": t.eigen_hit,
                "dipole_sums": list(t.dipole_sums),
                "verdict": t.verdict,
                "offending_fields": [list(g) for g in t.offending_fields],
            }
            for t in self.trials
        ]
        return out


def _trial(regime: RegimeSpec, seed: int, index: int, degenerate: bool, eigen_tol: float, dipole_tol: float) -> TrialResult:
    rng = np.random.default_rng([seed, index])
    rabi, deltas = regime.sample(rng)
    scheme = regime.scheme(degenerate)
    h = build_hamiltonian(scheme, rabi, deltas).matrix
    hnorm = np.linalg.norm(h, 2)
    target = regime.pinned_value(deltas)
    w, v = np.linalg.eigh(h)
    k = int(np.argmin(np.abs(w - target)))
    residual = float(abs(w[k] - target) / hnorm)
    state = v[:, k].astype(complex)
    if regime.closed_form is not None:
        amp, *_ = regime.closed_form(rabi, deltas)
        cand = np.asarray(amp, dtype=complex)
        if np.linalg.norm(h @ cand - target * cand) < 1e-9 * hnorm:
            state = cand
    lam = np.real(np.vdot(state, h @ state))
    state_res = float(np.linalg.norm(h @ state - lam * state) / hnorm)
    per = dipole_moments(h, state, scheme)
    bad = tuple(g for g, d in zip(scheme.fields, per) if abs(d) >= dipole_tol)
    return TrialResult(
        trial=index,
        rabi=tuple(float(x) for x in rabi),
        deltas=tuple(float(x) for x in deltas),
        pinned_value=float(target),
        residual=residual,
        eigen_hit=residual < eigen_tol,
        dipole_sums=tuple(float(abs(d)) for d in per),
        transparent=residual < eigen_tol and not bad,
        offending_fields=bad,
        state_residual=state_res,
    )


def verify_regime(
    regime: RegimeSpec | str,
    n_trials: int = 100,
    seed: int = 0,
    degenerate: bool = True,
    eigen_tol: float = 1e-8,
    dipole_tol: float = 1e-8,
    threads: int = 1,
) -> RegimeReport:
    """Draw parameters satisfying the regime and test eigenvalue pinning and transparency."""
    if isinstance(regime, str):
        regime = get_regime(regime)
    if n_trials < 1:
        raise ContractViolation("n_trials must be >= 1")
    job = lambda i: _trial(regime, seed, i, degenerate, eigen_tol, dipole_tol)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            trials = tuple(ex.map(job, range(n_trials)))
    else:
        trials = tuple(job(i) for i in range(n_trials))
    return RegimeReport(regime.name, degenerate, seed, trials, eigen_tol, dipole_tol)


def regime_hamiltonians(regime: RegimeSpec, rabi, deltas) -> np.ndarray:
    return hamiltonian_stack(deltas, rabi)
