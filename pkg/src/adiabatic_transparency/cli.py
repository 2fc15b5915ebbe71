"""Command-line entry point ``adtrans``.

Exit status: 0 when every invariant check of the run passes, 1 when a check
fails, 2 for invalid input (bad flags or scenario files), 3 when a solver
gives up.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import load_yaml, set_path, shipped, shipped_scenarios, validate
from .errors import ConfigError, ContractViolation, TransparencyError
from .output import write_csv, write_json
from .regimes import CATALOG, VARIANTS
from .runs import RunOutput, run_conditions, run_evolve, run_propagate, run_quasienergies
from .scan import SCAN_COMMANDS, ScanAxis, scan

OUT_ENV = "ADTRANS_OUT"
DEFAULT_OUT = "adtrans_out"

EPILOG = f"""\
Output goes to --out, else to ${OUT_ENV}/<command>, else to ./{DEFAULT_OUT}/<command>.
Every run writes CSV tables (units in the headers) and manifest.json, which
echoes the resolved scenario, the grids and the invariant checks.  Outputs are
byte-identical between runs unless --timing adds the wall time.
"""


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT) / args.command


def _raw_scenario(args) -> tuple[dict, object]:
    if bool(args.config) == bool(args.scenario):
        raise ConfigError("give exactly one of --config or --scenario")
    path = Path(args.config) if args.config else shipped(args.scenario)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc.strerror}", path, None) from None
    return load_yaml(text, path)


def _overrides(args) -> dict:
    return {f"propagation.{k}": getattr(args, k) for k in ("length", "dx", "dtau") if getattr(args, k, None) is not None}


def _tree(args) -> dict:
    raw, src = _raw_scenario(args)
    for path, value in _overrides(args).items():
        if not isinstance(raw.get("propagation"), dict):
            raise ConfigError(f"--{path.split('.')[1]} needs a scenario with a propagation section")
        raw = set_path(raw, path, value)
    return validate(raw, src)


def _emit(args, out: RunOutput, started: float) -> int:
    if args.timing:
        out.manifest.wall_time = time.perf_counter() - started
    if not args.check:
        d = _out_dir(args)
        for name, (header, rows) in out.tables.items():
            write_csv(d / name, header, rows)
        for name, doc in out.documents.items():
            target = Path(args.report) if name == "report" and getattr(args, "report", None) else d / f"{name}.json"
            write_json(target, doc)
        out.manifest.write(d / "manifest.json")
        print(f"wrote {len(out.tables)} table(s) and manifest.json to {d}")
    for name, c in out.manifest.checks.items():
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {name}: {c['value']:.6g} (limit {c['limit']:.6g})")
    return 0 if out.passed else 1


def _cmd_conditions(args) -> RunOutput:
    return run_conditions(args.regime or ["all"], args.trials, args.seed, args.threads)


def _cmd_scan(args) -> RunOutput:
    raw, src = _raw_scenario(args)
    validate(raw, src)  # fail early on a broken base scenario
    if args.values is not None:
        axis = ScanAxis(args.param, tuple(args.values))
    elif None not in (args.start, args.stop, args.count):
        axis = ScanAxis.from_range(args.param, args.start, args.stop, args.count, args.log)
    else:
        raise ConfigError("scan needs --values or all of --start, --stop, --count")
    header, rows = scan(args.run, raw, axis, args.threads)
    from .output import RunManifest

    errors = [r[-1] for r in rows if r[-1]]
    ok_col = header.index("checks_pass") if "checks_pass" in header else None
    failed = sum(1 for r in rows if ok_col is not None and not r[ok_col])
    checks = {"points_ok": {"value": failed, "limit": 0, "pass": failed == 0}}
    manifest = RunManifest(
        "scan", {"base": validate(raw, src), "run": args.run, "param": args.param}, __version__, args.seed,
        {"values": list(axis.values)}, checks, {"points": len(rows), "errors": errors},
    )
    return RunOutput(manifest, {"scan.csv": (header, rows)})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="adtrans", description="Adiabatic transparency toolkit for chain-coupled multilevel atoms.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, scenario=True):
        if scenario:
            g = sp.add_argument_group("scenario")
            g.add_argument("--config", help="scenario YAML file")
            g.add_argument("--scenario", help="name of a shipped scenario (see 'adtrans list')")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or ./{DEFAULT_OUT}/<command>)")
        sp.add_argument("--seed", type=int, default=0, help="random seed, recorded in the manifest (default 0)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for trials or scan points (default 1)")
        sp.add_argument("--check", action="store_true", help="run the invariant checks only; write no files")
        sp.add_argument("--timing", action="store_true", help="record the wall time in the manifest")

    sp = sub.add_parser("conditions", help="eigenvalue pinning and transparency of the regime catalog",
                        description="Random trials per regime: is the pinned quasienergy an eigenvalue, and do the "
                                    "summed induced dipoles of every field vanish?")
    common(sp, scenario=False)
    sp.add_argument("--regime", action="append",
                    help=f"regime name, repeatable (default: all of {', '.join(CATALOG)}; variants: {', '.join(VARIANTS)})")
    sp.add_argument("--trials", type=int, default=200, help="random draws per regime (default 200)")
    sp.add_argument("--report", help="path of the per-trial JSON report (default <out>/report.json)")

    sp = sub.add_parser("quasienergies", help="tracked eigenvalue branches of H(t)")
    common(sp)
    sp = sub.add_parser("evolve", help="integrate the Schroedinger equation and monitor adiabaticity")
    common(sp)
    sp = sub.add_parser("propagate", help="march the reduced propagation equations through the medium")
    common(sp)
    sp.add_argument("--length", type=float, help="medium length (overrides propagation.length)")
    sp.add_argument("--dx", type=float, help="x step (overrides propagation.dx)")
    sp.add_argument("--dtau", type=float, help="tau step (overrides propagation.dtau)")

    sp = sub.add_parser("scan", help="repeat evolve or propagate along one parameter",
                        description="The parameter is a path into the scenario file, e.g. "
                                    "'transitions[*].peak' or 'propagation.length'.")
    common(sp)
    sp.add_argument("--run", choices=SCAN_COMMANDS, default="evolve", help="subcommand per point (default evolve)")
    sp.add_argument("--param", required=True, help="parameter path")
    sp.add_argument("--values", type=float, nargs="*", help="explicit values")
    sp.add_argument("--start", type=float)
    sp.add_argument("--stop", type=float)
    sp.add_argument("--count", type=int, help="number of points; 0 gives an empty table")
    sp.add_argument("--log", action="store_true", help="geometric spacing")

    sub.add_parser("list", help="list shipped scenarios")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version and bad flags
        return exc.code if isinstance(exc.code, int) else 2
    if args.command == "list":
        for path in shipped_scenarios():
            print(path.stem)
        return 0
    started = time.perf_counter()
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "conditions":
            out = _cmd_conditions(args)
        elif args.command == "scan":
            out = _cmd_scan(args)
        else:
            tree = _tree(args)
            out = {"evolve": run_evolve, "propagate": run_propagate, "quasienergies": run_quasienergies}[
                args.command](tree)
        return _emit(args, out, started)
    except (ConfigError, ContractViolation) as exc:
        print(f"adtrans: error: {exc}", file=sys.stderr)
        return 2
    except TransparencyError as exc:
        print(f"adtrans: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
