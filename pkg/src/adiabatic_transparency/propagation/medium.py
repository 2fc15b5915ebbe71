"""Medium parameters, the x-tau field grid and adiabaticity length scales."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation

F_MAX = 8.0 / 3.0  # max of f(theta), reached at theta = pi/4
SHOCK_GROWTH = 10.0  # shock flag: max |d theta/d tau| beyond this multiple of its entrance value


@dataclass(frozen=True)
class MediumParams:
    """Coupling constants q_i = 2 pi N omega_i |d_{i,i+1}|^2 / (hbar c), one per transition.

    ``alpha0`` and ``linewidth`` optionally describe the same medium through
    its line-centre absorption coefficient alpha_0 = q / Gamma.
    """

    q: tuple[float, ...]
    alpha0: float | None = None
    linewidth: float | None = None

    def __post_init__(self):
        q = tuple(float(v) for v in np.atleast_1d(self.q))
        if any(not v >= 0 for v in q):
            raise ContractViolation("medium couplings q_i must be >= 0")
        object.__setattr__(self, "q", q)
        if (self.alpha0 is None) != (self.linewidth is None):
            raise ContractViolation("alpha0 and linewidth must be given together")
        if self.alpha0 is not None:
            if not (self.alpha0 > 0 and self.linewidth > 0):
                raise ContractViolation("alpha0 and linewidth must be > 0")
            for v in q:
                if abs(self.alpha0 * self.linewidth - v) > 1e-12 * max(v, 1e-300):
                    raise ContractViolation("alpha0 * linewidth must equal every q_i")

    @classmethod
    def uniform(cls, q: float, n_transitions: int) -> "MediumParams":
        return cls((float(q),) * n_transitions)

    @classmethod
    def from_absorption(cls, alpha0: float, linewidth: float, n_transitions: int) -> "MediumParams":
        return cls((alpha0 * linewidth,) * n_transitions, alpha0, linewidth)

    def scaled(self, factor: float) -> "MediumParams":
        return MediumParams(tuple(factor * v for v in self.q))


@dataclass
class FieldGrid:
    """Solution of a propagation run sampled at ``x`` (rows) and ``tau`` (columns).

    ``omega_sq`` and ``delta`` are indexed by field (one per degeneracy
    group), then x, then tau.  ``theta`` is the mixing angle of the conserved
    field pair; ``phi`` is set for W-system runs.
    """

    x: np.ndarray
    tau: np.ndarray
    omega_sq: np.ndarray
    delta: np.ndarray
    fields: tuple[tuple[int, ...], ...]
    theta: np.ndarray | None = None
    phi: np.ndarray | None = None
    theta_char: np.ndarray | None = None
    invariant_fields: tuple[int, ...] = ()
    invariant_drift: np.ndarray | None = None
    max_dtheta: np.ndarray | None = None
    shock: bool = False
    shock_length: float | None = None
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_fields(self) -> int:
        return self.omega_sq.shape[0]

    def energies(self) -> np.ndarray:
        """W_g(x) = integral of Omega_g^2 over tau, shape (fields, x)."""
        return np.trapezoid(self.omega_sq, self.tau, axis=-1)

    def field_index(self, transition: int) -> int:
        for k, g in enumerate(self.fields):
            if transition in g:
                return k
        raise ContractViolation(f"no field drives transition {transition}")

    @property
    def max_invariant_drift(self) -> float:
        return float(np.max(self.invariant_drift)) if self.invariant_drift is not None and self.invariant_drift.size else 0.0


# ---------------------------------------------------------------------------
# M-system transport coefficient


def f_theta(theta):
    """f = (1 + 2 cos^2 sin^2) / (1 - cos^2 sin^2)^2."""
    p = 0.25 * np.sin(2 * np.asarray(theta, dtype=float)) ** 2
    return (1 + 2 * p) / (1 - p) ** 2


def df_dtheta(theta):
    theta = np.asarray(theta, dtype=float)
    p = 0.25 * np.sin(2 * theta) ** 2
    return (4 + 2 * p) / (1 - p) ** 3 * 0.5 * np.sin(4 * theta)


# ---------------------------------------------------------------------------
# W-system coefficients.  The *_printed helpers evaluate the closed
# expressions as usually quoted; the solver itself derives every rate from
# the populations of the adiabatic state, see group_slowness_w.


def group_slowness_w(q, delta1, omega1_sq, theta2):
    """Extra slowness 1/u_1 - 1/c of Omega_1^2 obtained from |b_2|^2 of the adiabatic state."""
    k = 2 + np.tan(theta2) ** 2
    return q * delta1**2 * k / (delta1**2 + omega1_sq * k) ** 2


def group_slowness_w_printed(q, delta1, omega1_sq, theta2):
    k = 2 + np.tan(theta2) ** 2
    return 2 * q * delta1**2 * k / (delta1**2 + omega1_sq * k) ** 2


def depletion_factor_printed(q, delta1, omega1_sq, theta2):
    k = 2 + np.tan(theta2) ** 2
    return 2 * q * delta1**2 / (delta1**2 + omega1_sq * k) ** 2


def _w_denominator(theta2, phi):
    return 2 * np.cos(theta2) ** 2 + np.sin(theta2) ** 2 * np.sin(phi) ** 2


def theta2_speed(q, omega0_sq, theta2, phi):
    """Coefficient c in d theta_2/dx - c d theta_2/d tau = ...; positive means advance."""
    return 2 * q * np.sin(phi) ** 2 / (_w_denominator(theta2, phi) ** 2 * omega0_sq)


def f1_printed(theta2, phi):
    return np.cos(theta2) * np.sin(phi) ** 2 / _w_denominator(theta2, phi) ** 2


def b_coefficient(theta2, phi, delta1, omega1_sq):
    return np.sin(2 * theta2) * np.cos(phi) ** 2 / _w_denominator(theta2, phi) ** 2 / (delta1**2 + 2 * omega1_sq)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LengthScale:
    name: str
    value: float
    inequality: str


def adiabaticity_lengths(
    kind: str,
    q: float,
    T: float = 1.0,
    omega0: float | None = None,
    delta1: float | None = None,
    T1: float | None = None,
    omega1: float | None = None,
    W0: float | None = None,
) -> dict[str, LengthScale]:
    """Propagation lengths below which the medium leaves adiabatic following intact.

    kind "M": needs omega0.  kind "W": uses delta1, omega0, T1, omega1, W0 as
    available.  All scales are inversely proportional to q.
    """
    if not q > 0:
        raise ContractViolation("q must be > 0")
    for name, v in (("T", T), ("omega0", omega0), ("delta1", delta1), ("T1", T1), ("omega1", omega1), ("W0", W0)):
        if v is not None and not v > 0:
            raise ContractViolation(f"{name} must be > 0")
    kind = kind.upper()
    out: dict[str, LengthScale] = {}
    if kind == "M":
        if omega0 is None:
            raise ContractViolation("M-system lengths need omega0")
        out["L_adiab_M"] = LengthScale("L_adiab_M", omega0**2 * T / (3 * q), "3 q x / (Omega_0^2 T) << 1")
        out["L_shock_M"] = LengthScale("L_shock_M", omega0**2 * T / (q * F_MAX), "q x f_max / (Omega_0^2 T) ~ 1")
    elif kind == "W":
        T1 = T if T1 is None else T1
        if delta1 is not None:
            out["L_disp_W"] = LengthScale("L_disp_W", delta1**2 * T / q, "q x T / (delta_1 T)^2 << 1")
        if omega0 is not None:
            out["L_mix_W"] = LengthScale("L_mix_W", omega0**2 * T1 / q, "q x T_1 / (Omega_0 T_1)^2 << 1")
        if delta1 is not None and omega1 is not None:
            out["L_shock_W"] = LengthScale(
                "L_shock_W", delta1**2 * T1 / (4 * q * omega1**2), "4 q x Omega_1^2 / (delta_1^2 T_1) ~ 1"
            )
        if W0 is not None:
            out["L_deplete"] = LengthScale("L_deplete", W0 / q, "q_1 x = W_0")
    else:
        raise ContractViolation(f"unknown scheme kind {kind!r}; expected 'M' or 'W'")
    return out
