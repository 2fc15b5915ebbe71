"""Quasienergy branches and induced dipoles.

Branches are followed through time by eigenvector overlap (Hungarian
assignment on |<v_prev|v_new>|).  Inside exactly degenerate clusters the new
eigenvectors are rotated onto the previous ones (orthogonal Procrustes), so a
branch keeps its identity through a true crossing; such points are recorded
as crossing events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .chain import HamiltonianSnapshot, LevelScheme, PulseTrain
from .errors import ContractViolation

FIELD_OFF_FRACTION = 1e-6


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real positive."""
    v = np.array(vectors, dtype=complex)
    cols = v.reshape(v.shape[0], -1) if v.ndim > 1 else v[:, None]
    k = np.argmax(np.abs(cols), axis=0)
    ph = cols[k, np.arange(cols.shape[1])]
    ph = np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
    cols = cols / ph
    return cols.reshape(v.shape)


@dataclass(frozen=True)
class CrossingEvent:
    index: int
    time: float
    branches: tuple[int, ...]
    kind: str  # "degenerate" or "ambiguous"


@dataclass(frozen=True)
class QuasienergyFan:
    times: np.ndarray
    branches: np.ndarray  # (n_branches, n_times)
    eigvecs: np.ndarray  # (n_branches, n_times, n_levels)
    labels: np.ndarray  # field-off value at the first time
    end_labels: np.ndarray  # field-off value at the last time
    label_levels: tuple[int, ...]  # 1-based bare level each branch starts on
    end_label_levels: tuple[int, ...]
    crossings: tuple[CrossingEvent, ...] = field(default=())

    @property
    def n_branches(self) -> int:
        return self.branches.shape[0]

    def branches_labeled(self, value: float, atol: float = 1e-9) -> list[int]:
        return [b for b in range(self.n_branches) if abs(self.labels[b] - value) <= atol * max(1.0, abs(value))]

    def flatness(self, b: int) -> float:
        """max_t |lambda_b(t) - label_b|."""
        return float(np.max(np.abs(self.branches[b] - self.labels[b])))

    def branch_of_state(self, psi, index: int = 0) -> int:
        """Branch with the largest overlap with ``psi`` at time ``index``."""
        ov = np.abs(np.einsum("bn,n->b", self.eigvecs[:, index].conj(), np.asarray(psi, dtype=complex)))
        return int(np.argmax(ov))


def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(values)
    groups: list[list[int]] = [[int(order[0])]]
    for a, b in zip(order, order[1:]):
        if values[b] - values[a] <= tol:
            groups[-1].append(int(b))
        else:
            groups.append([int(b)])
    return [g for g in groups if len(g) > 1]


def track_eigenbranches(
    times,
    hamiltonians,
    degenerate_tol: float = 1e-10,
    ambiguous_overlap: float = 0.5,
    anchor: int | None = None,
) -> QuasienergyFan:
    """Diagonalise a stack of Hermitian matrices and follow branches by overlap.

    Tracking starts at ``anchor`` (default: the instant of strongest
    coupling, where branches are best separated) and proceeds outward in
    both directions.  Degenerate field-off subspaces are thereby resolved
    into the combinations that connect adiabatically to the dressed states,
    instead of an arbitrary basis picked by the eigensolver.
    """
    times = np.asarray(times, dtype=float)
    hs = np.asarray(hamiltonians)
    nt, n, _ = hs.shape
    w, v = np.linalg.eigh(hs)
    scale = max(1.0, float(np.max(np.abs(w))))
    tol = degenerate_tol * scale
    if anchor is None:
        off = np.abs(hs[:, np.arange(n - 1), np.arange(1, n)]).sum(axis=1) if n > 1 else np.zeros(nt)
        anchor = int(np.argmax(off))

    lam = np.empty((n, nt))
    vecs = np.empty((n, nt, n), dtype=complex)
    events: list[CrossingEvent] = []

    def record(j, cur, cur_w):
        lam[:, j] = cur_w
        vecs[:, j] = fix_phase(cur).T

    first = v[anchor].astype(complex)
    record(anchor, first, w[anchor])
    for cl in _clusters(w[anchor], tol):
        events.append(CrossingEvent(anchor, float(times[anchor]), tuple(cl), "degenerate"))

    for direction in (1, -1):
        prev = first
        for j in range(anchor + direction, nt if direction > 0 else -1, direction):
            new = v[j].astype(complex)
            ov = np.abs(prev.conj().T @ new)
            rows, cols = linear_sum_assignment(-ov)
            perm = cols[np.argsort(rows)]
            cur = new[:, perm]
            cur_w = w[j][perm]
            for cl in _clusters(cur_w, tol):
                q = cur[:, cl]
                u, _, vh = np.linalg.svd(q.conj().T @ prev[:, cl])
                cur[:, cl] = q @ (u @ vh)
                events.append(CrossingEvent(j, float(times[j]), tuple(cl), "degenerate"))
            best = ov[np.arange(n), perm]
            weak = [b for b in range(n) if best[b] < ambiguous_overlap]
            if weak:
                events.append(CrossingEvent(j, float(times[j]), tuple(weak), "ambiguous"))
            # continuous gauge for the next overlap
            ph = np.einsum("nb,nb->b", prev.conj(), cur)
            cur = cur / np.where(np.abs(ph) > 0, ph / np.maximum(np.abs(ph), 1e-300), 1.0)
            record(j, cur, cur_w)
            prev = cur
    crossings = sorted(events, key=lambda e: (e.index, e.branches))

    def labels_at(k):
        d = np.real(np.diagonal(hs[k]))
        lev = np.argmax(np.abs(vecs[:, k]), axis=1)
        return d[lev], tuple(int(x) + 1 for x in lev)

    lab, lab_lev = labels_at(0)
    end, end_lev = labels_at(nt - 1)
    return QuasienergyFan(times, lam, vecs, lab, end, lab_lev, end_lev, tuple(crossings))


def quasienergy_fan(train: PulseTrain, times, check_ends: bool = True) -> QuasienergyFan:
    """Continuity-tracked eigenvalues of H(t) over ``times``."""
    times = np.asarray(times, dtype=float)
    if check_ends:
        from .chain import sample_pulses

        peak = train.peak
        ends = sample_pulses(train, times[[0, -1]])
        if peak > 0 and np.any(ends > FIELD_OFF_FRACTION * peak):
            raise ContractViolation(
                "fields are not negligible at the ends of the time grid "
                f"(max end value {ends.max():.3g}, peak {peak:.3g})"
            )
    return track_eigenbranches(times, train.hamiltonians(times))


def _matrix(h) -> np.ndarray:
    return h.matrix if isinstance(h, HamiltonianSnapshot) else np.asarray(h)


def transition_dipoles(state) -> np.ndarray:
    """d lambda / d Omega_i^* = -conj(b_{i+1}) b_i for every transition."""
    b = np.asarray(state, dtype=complex)
    return -np.conj(b[1:]) * b[:-1]


def dipole_moments(h, state, scheme: LevelScheme | None = None, tol: float = 1e-8) -> np.ndarray:
    """Per-field derivative of the quasienergy with respect to the field amplitude.

    ``state`` must be a normalised eigenvector of ``h``.  Fields are the
    degeneracy groups of ``scheme`` (each transition alone when omitted); a
    group returns the coherent sum of its transitions' contributions.
    """
    m = _matrix(h)
    b = np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(b) - 1) > tol:
        raise ContractViolation("state is not normalised")
    lam = np.real(np.vdot(b, m @ b))
    res = np.linalg.norm(m @ b - lam * b)
    if res > tol * max(1.0, np.linalg.norm(m, 2)):
        raise ContractViolation(f"state is not an eigenvector (residual {res:.3g})")
    per = transition_dipoles(b)
    if scheme is None:
        return per
    return np.array([per[[i - 1 for i in g]].sum() for g in scheme.fields])


def rabi_gradient(state) -> np.ndarray:
    """d lambda / d Omega_i for real Rabi frequencies (Hellmann-Feynman)."""
    return 2.0 * np.real(transition_dipoles(state))
