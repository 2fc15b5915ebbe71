"""One-parameter scans over a scenario mapping."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import set_path, validate
from .errors import TransparencyError
from .runs import run_evolve, run_propagate

SCAN_COMMANDS = ("evolve", "propagate")


@dataclass(frozen=True)
class ScanAxis:
    """A parameter path with explicit values, or ``count`` points from ``start`` to ``stop``."""

    path: str
    values: tuple[float, ...]

    @classmethod
    def from_range(cls, path: str, start: float, stop: float, count: int, log: bool = False) -> "ScanAxis":
        if count < 0:
            raise TransparencyError("scan count must be >= 0")
        if log:
            if not (start > 0 and stop > 0):
                raise TransparencyError("a logarithmic scan needs positive bounds")
            vals = np.geomspace(start, stop, count) if count else np.array([])
        else:
            vals = np.linspace(start, stop, count)
        return cls(path, tuple(float(v) for v in vals))


def _point_metrics(command: str, raw: dict, axis: ScanAxis, value: float) -> dict:
    tree = validate(set_path(raw, axis.path, value))
    out = run_evolve(tree) if command == "evolve" else run_propagate(tree)
    m = out.manifest
    row = {"checks_pass": m.passed}
    r = m.results
    if command == "evolve":
        pops = np.asarray(r["final_populations"])
        row.update({
            "fidelity [1]": r["adiabatic_fidelity"],
            "max_ratio [1]": r["max_ratio"],
            "verdict": r["verdict"],
            **{f"rho_{k}{k}_final [1]": pops[k - 1] for k in range(1, pops.size + 1)},
        })
    else:
        row.update({
            "x_final [L]": r["x_final"],
            "shock_length [L]": r["shock_length"],
            **{f"W_slope_{g} [1/(T L)]": s for g, s in enumerate(r["energy_slopes"], 1)},
            **{f"W_{g}_exit [1/T]": w for g, w in enumerate(r["energies_exit"], 1)},
        })
    return row


def scan(command: str, raw: dict, axis: ScanAxis, threads: int = 1) -> tuple[list[str], list[list]]:
    """Run ``command`` at every axis value; a failing point fills its ``error`` column and the scan goes on."""
    if command not in SCAN_COMMANDS:
        raise TransparencyError(f"scan runs one of {SCAN_COMMANDS}, not {command!r}")

    def job(value):
        try:
            return _point_metrics(command, raw, axis, value), ""
        except (TransparencyError, ValueError, ArithmeticError) as exc:
            return {"checks_pass": False}, f"{type(exc).__name__}: {exc}"

    if threads > 1 and len(axis.values) > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(job, axis.values))
    else:
        results = [job(v) for v in axis.values]
    metric_cols: list[str] = []
    for row, _ in results:
        for k in row:
            if k not in metric_cols:
                metric_cols.append(k)
    header = [f"{axis.path} [scan]"] + metric_cols + ["error"]
    rows = [[v] + [row.get(k) for k in metric_cols] + [err] for v, (row, err) in zip(axis.values, results)]
    return header, rows
