"""Scenario files: parsing, validation and construction of runnable objects.

A scenario file is a YAML mapping::

    name: fig2_m_stirap
    scheme: M                 # named scheme, or a list of orientations
    levels: 5                 # optional check against the scheme
    degeneracy: [[1, 3], [2, 4]]
    transitions:
      - {shape: gaussian, peak: 30, center: 0.6, width: 1, delta: 10}
      ...
    time: {start: -6, stop: 6}        # step defaults to 0.01 / max frequency
    initial_state: 1
    threshold: 0.1
    propagation: {...}                # optional, see PROPAGATION_KEYS

Frequencies are in units of 1/T and times in units of T.  Every key is
checked; unknown keys and bad values raise ConfigError with the key path
and the line in the file.
"""

from __future__ import annotations

import copy
from pathlib import Path

import numpy as np
import yaml

from .chain import SHAPES, LevelScheme, PulseEnvelope, PulseTrain, multiphoton_detunings
from .dynamics import DEFAULT_STEP_FACTOR, RATIO_THRESHOLD, Scenario, TimeGrid, basis_state, max_frequency
from .errors import ConfigError, ContractViolation
from .regimes import get_regime

TOP_KEYS = ("name", "description", "scheme", "levels", "degeneracy", "transitions", "time",
            "initial_state", "threshold", "propagation")
TRANSITION_KEYS = ("shape", "peak", "center", "width", "delta", "points")
TIME_KEYS = ("start", "stop", "step")
PROPAGATION_KEYS = ("method", "regime", "q", "length", "dx", "dtau", "tau", "n_store", "stop_on_shock",
                    "stop_on_breakdown", "area_floor", "entrance")
ENTRANCE_KEYS = ("kind", "omega1", "omega0", "width", "ramp")
METHODS = ("reduced", "m_transport", "w_transport")
SCENARIO_DIR = Path(__file__).parent / "scenarios"


class _Source:
    """Line numbers of every key path in a parsed document."""

    def __init__(self, path, lines: dict[str, int]):
        self.path = str(path) if path is not None else None
        self.lines = lines

    def error(self, key: str, message: str) -> ConfigError:
        line = None
        probe = key
        while probe:
            if probe in self.lines:
                line = self.lines[probe]
                break
            probe = probe.rsplit(".", 1)[0] if "." in probe else probe.rsplit("[", 1)[0] if "[" in probe else ""
        return ConfigError(f"{key}: {message}" if key else message, self.path, line)


def _record_lines(node, path: str, lines: dict[str, int]) -> None:
    lines.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            child = f"{path}.{k.value}" if path else str(k.value)
            lines[child] = k.start_mark.line + 1
            _record_lines(v, child, lines)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _record_lines(v, f"{path}[{i}]", lines)


def load_yaml(text: str, path=None) -> tuple[dict, _Source]:
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
        if node is None:
            raise ConfigError("empty scenario file", path, None)
        data = loader.construct_document(node)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"malformed file: {exc.problem or exc}", path, mark.line + 1 if mark else None) from None
    finally:
        loader.dispose()
    lines: dict[str, int] = {}
    _record_lines(node, "", lines)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", path, 1)
    return data, _Source(path, lines)


# ---------------------------------------------------------------------------
# validation helpers


def _check_keys(src: _Source, where: str, mapping, allowed) -> None:
    if not isinstance(mapping, dict):
        raise src.error(where, "must be a mapping")
    for key in mapping:
        if key not in allowed:
            path = f"{where}.{key}" if where else str(key)
            raise src.error(path, f"unknown key; allowed: {', '.join(allowed)}")


def _number(src: _Source, key: str, value, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise src.error(key, f"expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise src.error(key, "must be finite")
    if positive and not value > 0:
        raise src.error(key, f"must be > 0, got {value}")
    if nonneg and not value >= 0:
        raise src.error(key, f"must be >= 0, got {value}")
    return value


def _integer(src: _Source, key: str, value, lo=None, hi=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise src.error(key, f"expected an integer, got {value!r}")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise src.error(key, f"must lie in [{lo}, {hi}], got {value}")
    return int(value)


def _boolean(src: _Source, key: str, value) -> bool:
    if not isinstance(value, bool):
        raise src.error(key, f"expected true or false, got {value!r}")
    return value


def _scheme(src: _Source, data) -> LevelScheme:
    raw = data.get("scheme")
    if raw is None:
        raise src.error("scheme", "missing")
    groups = data.get("degeneracy", []) or []
    if not isinstance(groups, list) or not all(isinstance(g, list) for g in groups):
        raise src.error("degeneracy", "must be a list of lists of transition indices")
    for i, g in enumerate(groups):
        for j, t in enumerate(g):
            _integer(src, f"degeneracy[{i}][{j}]", t)
    try:
        if isinstance(raw, str):
            scheme = LevelScheme.named(raw, ())
        elif isinstance(raw, list):
            scheme = LevelScheme(len(raw) + 1, tuple(raw), (), "custom")
        else:
            raise src.error("scheme", "must be a scheme name or a list of orientations")
        scheme = scheme.with_degeneracy(groups)
    except ContractViolation as exc:
        raise src.error("degeneracy" if "transition" in str(exc) else "scheme", str(exc)) from None
    if "levels" in data:
        n = _integer(src, "levels", data["levels"], 2)
        if n != scheme.n_levels:
            raise src.error("levels", f"scheme {scheme.name} has {scheme.n_levels} levels, not {n}")
    return scheme


def _transition(src: _Source, key: str, raw) -> dict:
    _check_keys(src, key, raw, TRANSITION_KEYS)
    shape = raw.get("shape", "gaussian")
    if shape not in SHAPES:
        raise src.error(f"{key}.shape", f"unknown shape {shape!r}; expected one of {SHAPES}")
    out = {
        "shape": shape,
        "peak": _number(src, f"{key}.peak", raw.get("peak", 0.0), nonneg=True),
        "center": _number(src, f"{key}.center", raw.get("center", 0.0)),
        "width": _number(src, f"{key}.width", raw.get("width", 1.0), positive=shape in ("gaussian", "sech", "sin2")),
        "delta": _number(src, f"{key}.delta", raw.get("delta", 0.0)),
    }
    if shape == "piecewise_linear":
        pts = raw.get("points")
        if not isinstance(pts, list) or len(pts) < 2:
            raise src.error(f"{key}.points", "piecewise_linear needs a list of at least two [time, value] pairs")
        out["points"] = [[_number(src, f"{key}.points[{i}]", a), _number(src, f"{key}.points[{i}]", b, nonneg=True)]
                         for i, (a, b) in enumerate(pts)]
    elif "points" in raw:
        raise src.error(f"{key}.points", "only allowed for piecewise_linear pulses")
    try:
        _envelope(out)
    except ContractViolation as exc:
        raise src.error(key, str(exc)) from None
    return out


def _envelope(t: dict) -> PulseEnvelope:
    return PulseEnvelope(t["shape"], t["peak"], t["center"], t["width"], points=tuple(map(tuple, t.get("points", ()))))


def _propagation(src: _Source, raw, tree: dict) -> dict:
    _check_keys(src, "propagation", raw, PROPAGATION_KEYS)
    method = raw.get("method", "reduced")
    if method not in METHODS:
        raise src.error("propagation.method", f"unknown method {method!r}; expected one of {METHODS}")
    n_tr = tree["levels"] - 1
    q = raw.get("q", 1.0)
    if isinstance(q, list):
        if len(q) != n_tr:
            raise src.error("propagation.q", f"need {n_tr} couplings, got {len(q)}")
        q = [_number(src, f"propagation.q[{i}]", v, nonneg=True) for i, v in enumerate(q)]
    else:
        q = [_number(src, "propagation.q", q, nonneg=True)] * n_tr
    if "length" not in raw:
        raise src.error("propagation.length", "missing")
    out = {
        "method": method,
        "regime": None,
        "q": q,
        "length": _number(src, "propagation.length", raw["length"], nonneg=True),
        "dx": None,
        "dtau": _number(src, "propagation.dtau", raw.get("dtau", 0.01), positive=True),
        "tau": None,
        "n_store": _integer(src, "propagation.n_store", raw.get("n_store", 21), 2),
        "stop_on_shock": _boolean(src, "propagation.stop_on_shock", raw.get("stop_on_shock", True)),
        "stop_on_breakdown": _boolean(src, "propagation.stop_on_breakdown", raw.get("stop_on_breakdown", False)),
        "area_floor": _number(src, "propagation.area_floor", raw.get("area_floor", 0.05 if method == "w_transport" else 0.0),
                              nonneg=True),
        "entrance": {"kind": "transitions"},
    }
    if raw.get("dx") is not None:
        out["dx"] = _number(src, "propagation.dx", raw["dx"], positive=True)
    elif method == "reduced":
        raise src.error("propagation.dx", "missing (required by the reduced solver)")
    tau = raw.get("tau", {"start": tree["time"]["start"], "stop": tree["time"]["stop"]})
    _check_keys(src, "propagation.tau", tau, ("start", "stop"))
    t0 = _number(src, "propagation.tau.start", tau.get("start", tree["time"]["start"]))
    t1 = _number(src, "propagation.tau.stop", tau.get("stop", tree["time"]["stop"]))
    if not t1 > t0:
        raise src.error("propagation.tau", "needs stop > start")
    out["tau"] = {"start": t0, "stop": t1}
    if method in ("reduced",):
        name = raw.get("regime")
        if name is None:
            raise src.error("propagation.regime", "missing (the closure regime of the reduced solver)")
        try:
            out["regime"] = get_regime(str(name)).name
        except ContractViolation as exc:
            raise src.error("propagation.regime", str(exc)) from None
    elif "regime" in raw:
        out["regime"] = {"m_transport": "a", "w_transport": "b"}[method]
        if get_regime(str(raw["regime"])).name != out["regime"]:
            raise src.error("propagation.regime", f"{method} always uses regime {out['regime']}")
    else:
        out["regime"] = {"m_transport": "a", "w_transport": "b"}[method]
    ent = raw.get("entrance", {"kind": "transitions"})
    if isinstance(ent, str):
        ent = {"kind": ent}
    _check_keys(src, "propagation.entrance", ent, ENTRANCE_KEYS)
    kind = ent.get("kind", "transitions")
    if kind == "transitions":
        extra = set(ent) - {"kind"}
        if extra:
            raise src.error(f"propagation.entrance.{sorted(extra)[0]}", "not used by entrance kind 'transitions'")
        out["entrance"] = {"kind": kind}
    elif kind == "w_sech":
        if method != "w_transport":
            raise src.error("propagation.entrance.kind", "w_sech entrances need method w_transport")
        out["entrance"] = {
            "kind": kind,
            "omega1": _number(src, "propagation.entrance.omega1", ent.get("omega1"), positive=True),
            "omega0": _number(src, "propagation.entrance.omega0", ent.get("omega0"), positive=True),
            "width": _number(src, "propagation.entrance.width", ent.get("width", 8.0), positive=True),
            "ramp": _number(src, "propagation.entrance.ramp", ent.get("ramp", 4.0), positive=True),
        }
    else:
        raise src.error("propagation.entrance.kind", f"unknown entrance kind {kind!r}; expected transitions or w_sech")
    if method == "m_transport" and tree["scheme"] != "M":
        raise src.error("propagation.method", "m_transport needs the M scheme")
    if method == "w_transport" and tree["scheme"] != "W":
        raise src.error("propagation.method", "w_transport needs the W scheme")
    return out


def validate(data: dict, src: _Source | None = None) -> dict:
    """Resolved scenario tree from a raw mapping."""
    src = src or _Source(None, {})
    _check_keys(src, "", data, TOP_KEYS)
    scheme = _scheme(src, data)
    raw_tr = data.get("transitions")
    if not isinstance(raw_tr, list):
        raise src.error("transitions", "must be a list with one entry per transition")
    if len(raw_tr) != scheme.n_transitions:
        raise src.error("transitions", f"scheme {scheme.name} needs {scheme.n_transitions} transitions, got {len(raw_tr)}")
    transitions = [_transition(src, f"transitions[{i}]", t) for i, t in enumerate(raw_tr)]
    for g in scheme.fields:
        ref = {k: v for k, v in transitions[g[0] - 1].items() if k != "delta"}
        for i in g[1:]:
            other = {k: v for k, v in transitions[i - 1].items() if k != "delta"}
            if other != ref:
                raise src.error(f"transitions[{i - 1}]", f"transition {i} is degenerate with {g[0]} and must share its pulse")
    one_photon = [t["delta"] for t in transitions]
    tree = {
        "name": str(data.get("name", "scenario")),
        "description": str(data.get("description", "")),
        "scheme": scheme.name,
        "levels": scheme.n_levels,
        "orientation": [o.value for o in scheme.orientation],
        "degeneracy": [list(g) for g in scheme.fields if len(g) > 1],
        "transitions": transitions,
        "multiphoton": [float(v) for v in multiphoton_detunings(scheme, one_photon)],
    }
    time = data.get("time")
    if time is None:
        raise src.error("time", "missing")
    _check_keys(src, "time", time, TIME_KEYS)
    start = _number(src, "time.start", time.get("start", 0.0))
    if "stop" not in time:
        raise src.error("time.stop", "missing")
    stop = _number(src, "time.stop", time["stop"])
    if not stop > start:
        raise src.error("time", "needs stop > start")
    train = _train(tree, scheme)
    step = time.get("step")
    step = DEFAULT_STEP_FACTOR / max_frequency(train) if step is None else _number(src, "time.step", step, positive=True)
    tree["time"] = {"start": start, "stop": stop, "step": step}
    tree["initial_state"] = _integer(src, "initial_state", data.get("initial_state", 1), 1, scheme.n_levels)
    tree["threshold"] = _number(src, "threshold", data.get("threshold", RATIO_THRESHOLD), positive=True)
    tree["propagation"] = _propagation(src, data["propagation"], tree) if data.get("propagation") is not None else None
    return tree


def _train(tree: dict, scheme: LevelScheme | None = None) -> PulseTrain:
    scheme = scheme or scheme_of(tree)
    envs = tuple(_envelope(t) for t in tree["transitions"])
    return PulseTrain(scheme, envs, tuple(t["delta"] for t in tree["transitions"]))


def parse_config(path) -> dict:
    """Read and validate a scenario file; returns the resolved tree."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc.strerror}", path, None) from None
    data, src = load_yaml(text, path)
    return validate(data, src)


def parse_text(text: str) -> dict:
    data, src = load_yaml(text, "<string>")
    return validate(data, src)


# ---------------------------------------------------------------------------
# construction


def scheme_of(tree: dict) -> LevelScheme:
    base = LevelScheme(tree["levels"], tuple(tree["orientation"]), tuple(map(tuple, tree["degeneracy"])), tree["scheme"])
    return base


def build_scenario(tree: dict) -> Scenario:
    train = _train(tree)
    t = tree["time"]
    grid = TimeGrid(t["start"], t["stop"], t["step"])
    psi0 = basis_state(tree["levels"], tree["initial_state"])
    return Scenario(tree["name"], train, psi0, grid, tree["description"])


def scenario_tree(sc: Scenario) -> dict:
    """The resolved tree of an in-code scenario, comparable with parse_config output."""
    scheme = sc.scheme
    transitions = []
    for i in range(1, scheme.n_levels):
        env = sc.train.envelope_for(i)
        t = {"shape": env.shape, "peak": float(env.peak_rabi), "center": float(env.center),
             "width": float(env.width), "delta": float(sc.train.one_photon[i - 1])}
        if env.shape == "piecewise_linear":
            t["points"] = [list(p) for p in env.points]
        transitions.append(t)
    level = int(np.argmax(np.abs(sc.psi0))) + 1
    return {
        "name": sc.name,
        "description": sc.description,
        "scheme": scheme.name,
        "levels": scheme.n_levels,
        "orientation": [o.value for o in scheme.orientation],
        "degeneracy": [list(g) for g in scheme.fields if len(g) > 1],
        "transitions": transitions,
        "multiphoton": [float(v) for v in sc.train.detunings.multi_photon],
        "time": {"start": float(sc.grid.start), "stop": float(sc.grid.stop), "step": float(sc.grid.step)},
        "initial_state": level,
        "threshold": RATIO_THRESHOLD,
        "propagation": None,
    }


def shipped_scenarios() -> list[Path]:
    return sorted(SCENARIO_DIR.glob("*.yaml"))


def shipped(name: str) -> Path:
    path = SCENARIO_DIR / f"{name}.yaml"
    if not path.exists():
        known = ", ".join(p.stem for p in shipped_scenarios())
        raise ConfigError(f"no shipped scenario {name!r}; known: {known}")
    return path


def set_path(tree: dict, path: str, value) -> dict:
    """Copy of a raw mapping with ``path`` (dots, [i] and [*]) set to ``value``."""
    out = copy.deepcopy(tree)
    parts = []
    for chunk in path.split("."):
        while "[" in chunk:
            head, rest = chunk.split("[", 1)
            if head:
                parts.append(head)
            idx, chunk = rest.split("]", 1)
            parts.append("*" if idx == "*" else int(idx))
        if chunk:
            parts.append(chunk)
    if not parts:
        raise ConfigError(f"empty parameter path {path!r}")

    def assign(node, keys):
        key, rest = keys[0], keys[1:]
        if key == "*":
            if not isinstance(node, list):
                raise ConfigError(f"parameter path {path!r}: [*] needs a list")
            targets = range(len(node))
        else:
            if isinstance(key, int):
                if not isinstance(node, list) or not -len(node) <= key < len(node):
                    raise ConfigError(f"parameter path {path!r}: index {key} out of range")
            elif not isinstance(node, dict):
                raise ConfigError(f"parameter path {path!r}: {key!r} is not inside a mapping")
            targets = [key]
        for k in targets:
            if rest:
                if isinstance(node, dict) and k not in node:
                    node[k] = {}
                assign(node[k], rest)
            else:
                node[k] = value

    assign(out, parts)
    return out
