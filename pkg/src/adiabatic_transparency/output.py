"""Deterministic CSV and manifest emission."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "{:.12g}"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FORMAT.format(0.0 if v == 0 else v)
    text = str(v)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_csv(path, header, rows) -> Path:
    """Plain comma-separated table with a fixed float format; '\\n' line ends."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(_cell(h) for h in header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


@dataclass
class RunManifest:
    """Everything needed to repeat a run, plus what it found.

    ``wall_time`` stays None unless timing was requested, so that repeated
    runs give byte-identical manifests.
    """

    command: str
    tree: dict
    version: str
    seed: int | None = None
    grid: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    wall_time: float | None = None

    @property
    def passed(self) -> bool:
        return all(bool(c.get("pass")) for c in self.checks.values())

    def to_dict(self) -> dict:
        return _jsonable({
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "scenario": self.tree,
            "grid": self.grid,
            "checks": self.checks,
            "all_checks_pass": self.passed,
            "results": self.results,
            "wall_time": self.wall_time,
        })

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def check(value: float, limit: float, below: bool = True) -> dict:
    """A named invariant check entry for the manifest."""
    ok = bool(value < limit) if below else bool(value > limit)
    return {"value": float(value), "limit": float(limit), "pass": ok}


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path
