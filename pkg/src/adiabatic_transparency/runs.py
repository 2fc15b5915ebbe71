"""Subcommand runs: each returns tables, a manifest and its invariant checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import build_scenario, scheme_of
from .dynamics import NORM_DRIFT_LIMIT, adiabaticity_monitor, evolve
from .errors import ConfigError, ContractViolation
from .output import RunManifest, check
from .propagation import (
    FieldGrid,
    MediumParams,
    contour_position,
    fit_slope,
    m_system_transport,
    propagate_reduced,
    w_sech_entrance,
    w_system_transport,
)
from .quasienergy import FIELD_OFF_FRACTION, track_eigenbranches
from .regimes import CATALOG, RegimeReport, get_regime, verify_regime

INVARIANT_DRIFT_LIMIT = 1e-6
FLATNESS_LIMIT = 1e-8  # relative to the largest one-photon detuning
EVOLVE_ROWS = 2000


@dataclass
class RunOutput:
    manifest: RunManifest
    tables: dict[str, tuple[list[str], list]] = field(default_factory=dict)
    documents: dict[str, dict] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.manifest.passed


# ---------------------------------------------------------------------------


TRANSPARENT_REGIMES = ("lambda-dark", "a", "b", "c", "d")
NECESSARY_ONLY_REGIMES = ("lambda-delta1",)  # transparent only with the degeneracy declared


def run_conditions(names, trials: int = 200, seed: int = 0, threads: int = 1) -> RunOutput:
    """Eigenvalue pinning and transparency for regimes; degenerate regimes also run with independent fields."""
    names = list(CATALOG) if not names or names == ["all"] else [get_regime(n).name for n in names]
    reports: list[RegimeReport] = []
    checks = {}
    for name in names:
        regime = get_regime(name)
        rep = verify_regime(regime, trials, seed, degenerate=True, threads=threads)
        reports.append(rep)
        checks[f"{name}:pinning"] = {"value": rep.eigen_hits, "limit": rep.n_trials, "pass": rep.all_pinned}
        if name in TRANSPARENT_REGIMES + NECESSARY_ONLY_REGIMES:
            checks[f"{name}:transparency"] = {"value": rep.transparent_count, "limit": rep.n_trials,
                                              "pass": rep.all_transparent}
        if any(len(g) > 1 for g in regime.fields):
            ind = verify_regime(regime, trials, seed, degenerate=False, threads=threads)
            reports.append(ind)
            if name in NECESSARY_ONLY_REGIMES:
                checks[f"{name}:independent_not_transparent"] = {
                    "value": ind.transparent_count, "limit": ind.n_trials, "pass": ind.transparent_count < ind.n_trials}
    rows = []
    for rep in reports:
        s = rep.summary()
        rows.append([s["regime"], "declared" if rep.degenerate else "independent", s["trials"], s["eigen_hits"],
                     s["transparent"], s["max_residual"], s["max_dipole"],
                     "pinned" if rep.all_pinned else "not-pinned",
                     "transparent" if rep.all_transparent else "necessary-only" if rep.all_pinned else "fails"])
    header = ["regime", "degeneracy", "trials [1]", "pinned [1]", "transparent [1]", "max_residual [1]",
              "max_dipole_sum [1]", "pinning", "verdict"]
    manifest = RunManifest(
        "conditions", {"regimes": names, "trials": trials}, __version__, seed,
        {"trials": trials, "eigen_tol": 1e-8, "dipole_tol": 1e-8}, checks,
        {"summary": [dict(zip(header, r)) for r in rows]},
    )
    report = {"seed": seed, "trials": trials, "regimes": [r.to_dict() for r in reports]}
    return RunOutput(manifest, {"conditions.csv": (header, rows)}, {"report": report})


# ---------------------------------------------------------------------------


def run_quasienergies(tree: dict, points: int = 2001) -> RunOutput:
    sc = build_scenario(tree)
    times = np.linspace(sc.grid.start, sc.grid.stop, points)
    hs = sc.train.hamiltonians(times)
    fan = track_eigenbranches(times, hs)
    diag = np.sort(sc.train.detunings.multi_photon)
    scale = max(1.0, float(np.max(np.abs(diag))))
    rabi_ends = np.abs(hs[[0, -1]][:, np.arange(sc.scheme.n_levels - 1), np.arange(1, sc.scheme.n_levels)])
    ends_off = bool(np.all(rabi_ends <= FIELD_OFF_FRACTION * max(sc.train.peak, 1e-300)))
    checks = {}
    if ends_off:
        err = max(float(np.max(np.abs(np.sort(fan.branches[:, k]) - diag))) for k in (0, -1)) / scale
        checks["field_off_labels"] = check(err, 1e-6)
    order = np.argsort(fan.labels, kind="stable")
    header = ["t [T]"] + [f"lambda_{fan.label_levels[b]} [1/T]" for b in order]
    rows = [[t] + [fan.branches[b, k] for b in order] for k, t in enumerate(times)]
    manifest = RunManifest(
        "quasienergies", tree, __version__, None, {"points": points, "start": times[0], "stop": times[-1]}, checks,
        {"labels": [float(fan.labels[b]) for b in order], "end_labels": [float(fan.end_labels[b]) for b in order],
         "crossings": len(fan.crossings), "ends_field_off": ends_off},
    )
    return RunOutput(manifest, {"quasienergies.csv": (header, rows)})


# ---------------------------------------------------------------------------


def run_evolve(tree: dict, rows: int = EVOLVE_ROWS) -> RunOutput:
    sc = build_scenario(tree)
    every = max(1, sc.grid.n_steps // max(rows, 1))
    res = evolve(sc.train, sc.psi0, sc.grid, every)
    traj = res.trajectory
    mon = adiabaticity_monitor(res.fan, traj, threshold=tree["threshold"])
    n = sc.scheme.n_levels
    pops = traj.populations
    header = (["t [T]"] + [f"rho_{k}{k} [1]" for k in range(1, n + 1)]
              + [f"Omega_{i} [1/T]" for i in range(1, n)] + ["gap [1/T]", "ratio [1]"])
    table = [[t, *pops[k], *traj.rabi[:, k], mon.min_gap[k], mon.ratio[k]] for k, t in enumerate(traj.times)]
    drift = float(np.max(traj.norm_error))
    checks = {"norm_drift": check(drift, NORM_DRIFT_LIMIT)}
    results = {
        "final_populations": pops[-1],
        "adiabatic_fidelity": res.adiabatic_fidelity,
        "occupied_branch_level": res.fan.label_levels[res.occupied_branch],
        "max_ratio": mon.max_ratio,
        "verdict": mon.verdict,
        "max_intermediate": {f"rho_{k}{k}": float(pops[:, k - 1].max()) for k in range(2, n)},
    }
    grid = {"start": sc.grid.start, "stop": sc.grid.stop, "step": sc.grid.h, "steps": sc.grid.n_steps,
            "store_every": every}
    return RunOutput(RunManifest("evolve", tree, __version__, None, grid, checks, results),
                     {"evolve.csv": (header, table)})


# ---------------------------------------------------------------------------


def _tau_grid(p: dict) -> np.ndarray:
    t0, t1 = p["tau"]["start"], p["tau"]["stop"]
    n = int(round((t1 - t0) / p["dtau"]))
    return np.linspace(t0, t1, n + 1)


def _field_intensities(tree: dict, tau: np.ndarray) -> np.ndarray:
    train = build_scenario(tree).train
    return np.array([train.envelope_for(g[0])(tau) ** 2 for g in scheme_of(tree).fields])


def _uniform_q(p: dict) -> float:
    q = p["q"]
    if max(q) - min(q) > 1e-12 * max(max(q), 1e-300):
        raise ConfigError(f"{p['method']} needs equal couplings q on all transitions")
    return float(q[0])


def _w_detunings(tree: dict) -> tuple[float, float]:
    d = [t["delta"] for t in tree["transitions"]]
    d1 = d[1]
    d3 = 2 * d1 - d[2]
    if abs(d[0] + d1) > 1e-12 * max(1.0, abs(d1)) or abs(d[3] - (d1 - d3)) > 1e-12 * max(1.0, abs(d1)):
        raise ConfigError("w_transport needs one-photon detunings (-d1, d1, 2 d1 - d3, d1 - d3) (regime b)")
    return d1, d3


def propagate_tree(tree: dict) -> FieldGrid:
    """Run the propagation section of a resolved tree."""
    p = tree["propagation"]
    if p is None:
        raise ConfigError("scenario has no propagation section")
    tau = _tau_grid(p)
    one_photon = [t["delta"] for t in tree["transitions"]]
    if p["method"] == "reduced":
        return propagate_reduced(
            scheme_of(tree), tau, _field_intensities(tree, tau), one_photon, MediumParams(tuple(p["q"])),
            get_regime(p["regime"]), p["length"], p["dx"], n_store=p["n_store"], stop_on_shock=p["stop_on_shock"],
            area_floor=p["area_floor"], stop_on_breakdown=p["stop_on_breakdown"],
        )
    if p["method"] == "m_transport":
        if tree["degeneracy"] != [[1, 3], [2, 4]]:
            raise ConfigError("m_transport needs degeneracy [[1, 3], [2, 4]]")
        w = _field_intensities(tree, tau)
        return m_system_transport(
            tau, np.arctan2(np.sqrt(w[0]), np.sqrt(w[1])), w[0] + w[1], _uniform_q(p), p["length"], p["dx"],
            n_store=p["n_store"], stop_on_shock=p["stop_on_shock"], one_photon=one_photon,
        )
    if tree["degeneracy"] != [[1, 2]]:
        raise ConfigError("w_transport needs degeneracy [[1, 2]]")
    d1, d3 = _w_detunings(tree)
    ent = p["entrance"]
    if ent["kind"] == "w_sech":
        o1, th2, r0 = w_sech_entrance(tau, ent["omega1"], ent["omega0"], ent["width"], ent["ramp"])
    else:
        train = build_scenario(tree).train
        o1 = train.envelope_for(1)(tau)
        o3, o4 = train.envelope_for(3)(tau), train.envelope_for(4)(tau)
        th2, r0 = np.arctan2(o3, o4), o3**2 + o4**2
        th2 = th2 - th2[0]
    dx = p["dx"] if p["dx"] is not None else 0.25
    return w_system_transport(
        tau, o1, th2, r0, d1, MediumParams(tuple(p["q"])), p["length"], dx, delta3=d3, n_store=p["n_store"],
        stop_on_shock=p["stop_on_shock"], area_floor=p["area_floor"], stop_on_breakdown=p["stop_on_breakdown"],
    )


def propagation_summary(tree: dict, grid: FieldGrid) -> tuple[dict, dict]:
    """Invariant checks and headline results of a propagation run."""
    p = tree["propagation"]
    checks = {}
    if grid.invariant_fields:
        checks["invariant_drift"] = check(grid.max_invariant_drift, INVARIANT_DRIFT_LIMIT)
    if p["regime"] in ("a", "b"):
        scale = max(1.0, max(abs(t["delta"]) for t in tree["transitions"]))
        flat = float(np.max(np.abs(grid.delta - grid.delta[:, :1]))) / scale
        checks["detuning_flatness"] = check(flat, FLATNESS_LIMIT)
    breakdown = grid.meta.get("breakdown_x")  # only set when the scenario asks to stop there
    energies = grid.energies()
    results = {
        "x_final": grid.x[-1],
        "shock": grid.shock,
        "shock_length": grid.shock_length,
        "breakdown_x": breakdown,
        "energy_slopes": [fit_slope(grid.x, e)[0] if len(grid.x) > 1 else 0.0 for e in energies],
        "energies_entrance": energies[:, 0],
        "energies_exit": energies[:, -1],
    }
    if p["method"] == "m_transport":
        results["breaking_length"] = grid.meta["breaking_length"]
        if not grid.meta["characteristics_crossed"]:
            results["max_theta_vs_characteristics"] = float(np.max(np.abs(grid.theta - grid.theta_char)))
    if grid.theta is not None:
        results["theta_half_contour"] = [contour_position(grid.tau, t, np.pi / 4) for t in grid.theta]
    if p["method"] == "w_transport" and len(grid.x) > 1:
        slope, icpt = fit_slope(grid.x, energies[0])
        results["depletion_slope"] = slope
        results["depletion_length_fit"] = icpt / -slope if slope < 0 else float("inf")
        results["depletion_length_law"] = energies[0, 0] / p["q"][0] if p["q"][0] > 0 else float("inf")
    return checks, results


def run_propagate(tree: dict) -> RunOutput:
    grid = propagate_tree(tree)
    checks, results = propagation_summary(tree, grid)
    tables = {}
    xcols = [f"x={x:.6g} [L]" for x in grid.x]
    for g, fld in enumerate(grid.fields):
        name = "field_" + "_".join(str(i) for i in fld) + ".csv"
        tables[name] = (["tau [T]"] + [f"Omega_sq {c[:-4]} [1/T^2]" for c in xcols],
                        [[t, *grid.omega_sq[g, :, k]] for k, t in enumerate(grid.tau)])
    if grid.theta is not None:
        tables["theta.csv"] = (["tau [T]"] + [f"theta {c[:-4]} [rad]" for c in xcols],
                               [[t, *grid.theta[:, k]] for k, t in enumerate(grid.tau)])
    if grid.theta_char is not None:
        tables["theta_characteristics.csv"] = (["tau [T]"] + [f"theta {c[:-4]} [rad]" for c in xcols],
                                               [[t, *grid.theta_char[:, k]] for k, t in enumerate(grid.tau)])
    energies = grid.energies()
    drift = grid.invariant_drift if grid.invariant_drift is not None else np.zeros(len(grid.x))
    dth = grid.max_dtheta if grid.max_dtheta is not None else np.full(len(grid.x), np.nan)
    header = ["x [L]", "invariant_drift [1]", "max_dtheta_dtau [rad/T]"] + [
        "W_" + "_".join(str(i) for i in fld) + " [1/T]" for fld in grid.fields]
    tables["diagnostics.csv"] = (header, [[x, drift[i], dth[i], *energies[:, i]] for i, x in enumerate(grid.x)])
    gridspec = {"tau_start": grid.tau[0], "tau_stop": grid.tau[-1], "tau_points": grid.tau.size,
                "dx": grid.meta.get("dx"), "length": tree["propagation"]["length"], "x_stored": grid.x}
    meta = {k: v for k, v in grid.meta.items() if k not in ("dx", "length")}
    results["solver"] = meta
    return RunOutput(RunManifest("propagate", tree, __version__, None, gridspec, checks, results), tables)


def run(command: str, tree: dict) -> RunOutput:
    if command == "evolve":
        return run_evolve(tree)
    if command == "propagate":
        return run_propagate(tree)
    if command == "quasienergies":
        return run_quasienergies(tree)
    raise ContractViolation(f"unknown command {command!r}")
