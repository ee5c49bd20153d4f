"""Command line entry point.

Exit codes: 0 success, 1 a proven inequality failed numerically, 2 invalid
input. Errors go to stderr as one JSON object with ``category``, ``field``
and ``message``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .driving import INEQUALITY_RTOL, work_report
from .errors import InequalityViolation, OpworkError, ValidationError
from .io import (
    METER_COLUMNS,
    VERIFY_COLUMNS,
    RunReport,
    Scenario,
    apply_sweep_value,
    build_decomposition,
    build_meter,
    build_optimization_config,
    build_schedule,
    build_unitary,
    emit_report,
    load_scenario,
    parse_scenario,
    work_row,
)
from .meter import convergence_scan, loglog_slope, stroboscopic_run
from .openthermo import open_work_report
from .optimize import minimize_bound, report_at
from .suites import SUITES, run_all

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID = 0, 1, 2


def _meta(sc: Scenario, seed) -> dict:
    raw = sc.raw
    return {"scenario_id": sc.id, "seed": seed,
            "decomposition": raw.get("decomposition", {"type": "eigen"}).get("type"),
            "unitary": raw.get("unitary", {}).get("type", "protocol" if sc.protocol else "identity")}


def _bound(sc: Scenario, tol: float):
    rep = work_report(build_decomposition(sc), build_unitary(sc), sc.h0, sc.ht, sc.beta,
                      _meta(sc, sc.seed), check=False)
    return rep, rep.violations(tol)


def _open(sc: Scenario, tol: float):
    if sc.protocol is None:
        raise ValidationError("open-run needs a protocol block", field="protocol")
    rep = open_work_report(build_decomposition(sc), build_schedule(sc), sc.protocol, sc.beta,
                           steps=sc.steps, metadata=_meta(sc, sc.seed), check=False)
    return rep, rep.violations(tol)


def cmd_bound(sc: Scenario, args) -> RunReport:
    rep, bad = _bound(sc, args.tol or INEQUALITY_RTOL)
    return RunReport("bound", sc.id, sc.seed, rep.to_dict(), sc.digest,
                     rows=[work_row(rep, sc.id, sc.seed)], violations=bad)


def cmd_open_run(sc: Scenario, args) -> RunReport:
    rep, bad = _open(sc, args.tol or INEQUALITY_RTOL)
    return RunReport("open-run", sc.id, sc.seed, rep.to_dict(), sc.digest,
                     rows=[work_row(rep, sc.id, sc.seed)], violations=bad)


def cmd_meter(sc: Scenario, args) -> RunReport:
    if "meter" not in sc.raw:
        raise ValidationError("scenario has no meter block", field="meter")
    setup = build_meter(sc)
    rows = convergence_scan(setup.rho0, setup.joint, setup.protocol, setup.step_counts,
                            shots=setup.shots, seed=setup.seed)
    record = stroboscopic_run(setup.rho0, setup.joint, setup.protocol.with_steps(setup.step_counts[-1]))
    payload = {"scan": [r.to_dict() for r in rows], "record": record.to_dict(), "shots": setup.shots}
    if len(rows) >= 2:
        dts = [r.dt for r in rows]
        payload["error_slope"] = loglog_slope(dts, [r.error for r in rows])
        payload["variance_slope"] = loglog_slope(dts, [r.variance for r in rows])
    return RunReport("meter", sc.id, sc.seed, payload, sc.digest,
                     rows=[r.to_dict() for r in rows], columns=METER_COLUMNS)


def cmd_optimize(sc: Scenario, args) -> RunReport:
    cfg = build_optimization_config(sc, jobs=args.jobs)
    result = minimize_bound(sc.h0, sc.ht, sc.beta, cfg)
    rep = report_at(sc.h0, sc.ht, sc.beta, result, cfg.povm_outcomes)
    payload = {"result": result.to_dict(), "report": rep.to_dict(), "config": cfg.__dict__}
    return RunReport("optimize", sc.id, sc.seed, payload, sc.digest,
                     rows=[work_row(rep, sc.id, cfg.seed)], violations=rep.violations(args.tol or INEQUALITY_RTOL))


def _sweep_point(task):
    raw, parameter, value, seed, command, tol = task
    sc = parse_scenario(apply_sweep_value(raw, parameter, value), None if parameter == "seed" else seed)
    rep, bad = (_bound if command == "bound" else _open)(sc, tol)
    sid = f"{sc.id}@{parameter}={json.dumps(value)}"
    return work_row(rep, sid, sc.seed), {"value": value, "report": rep.to_dict()}, bad


def cmd_sweep(sc: Scenario, args) -> RunReport:
    block = sc.raw.get("sweep")
    if not isinstance(block, dict):
        raise ValidationError("scenario has no sweep block", field="sweep")
    parameter = block.get("parameter")
    values = block.get("values")
    command = block.get("command", "bound")
    if not isinstance(parameter, str):
        raise ValidationError("expected a string", field="sweep.parameter")
    if not isinstance(values, list) or not values:
        raise ValidationError("expected a non-empty list", field="sweep.values")
    if command not in ("bound", "open-run"):
        raise ValidationError("expected 'bound' or 'open-run'", field="sweep.command")
    tol = args.tol or INEQUALITY_RTOL
    tasks = [(sc.raw, parameter, v, args.seed, command, tol) for v in values]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            # map preserves grid order regardless of completion order
            out = list(pool.map(_sweep_point, tasks))
    else:
        out = [_sweep_point(t) for t in tasks]
    bad = [f"point {k}: {msg}" for k, (_, _, b) in enumerate(out) for msg in b]
    payload = {"parameter": parameter, "command": command, "points": [p for _, p, _ in out]}
    return RunReport("sweep", sc.id, sc.seed, payload, sc.digest, rows=[r for r, _, _ in out],
                     violations=bad)


def cmd_verify(sc: Scenario | None, args) -> RunReport:
    block = (sc.raw.get("verify", {}) if sc else {}) or {}
    probes = args.seeds if args.seeds is not None else int(block.get("probes", 1000))
    dim = args.dim if args.dim is not None else block.get("dim")
    names = args.suites or block.get("suites") or list(SUITES)
    for n in names:
        if n not in SUITES:
            raise ValidationError(f"unknown suite {n!r}; known: {', '.join(SUITES)}", field="suites")
    if probes < 1:
        raise ValidationError("must be >= 1", field="seeds")
    if dim is not None and not 1 <= int(dim) <= 8:
        raise ValidationError("expected a dimension between 1 and 8", field="dim")
    seed = sc.seed if sc else (args.seed or 0)
    results = run_all(probes, seed=seed, dim=dim, rtol=args.tol, jobs=args.jobs, names=names)
    rows = [{"suite": r.name, "probes": r.probes, "violations": r.violations, "worst_margin": r.worst}
            for r in results]
    bad = [f"{r.name}: {r.violations} of {r.probes}" for r in results if r.violations]
    payload = {"suites": [r.to_dict() for r in results], "probes": probes, "dim": dim}
    return RunReport("verify", sc.id if sc else "verify", seed, payload, sc.digest if sc else "",
                     rows=rows, columns=VERIFY_COLUMNS, violations=bad)


COMMANDS = {
    "verify": cmd_verify,
    "bound": cmd_bound,
    "open-run": cmd_open_run,
    "meter": cmd_meter,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario's base seed")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tol", type=float, default=None, help="relative inequality tolerance")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for verify/sweep/optimize")
    common.add_argument("--timing", action="store_true", help="include wall time in JSON output")

    parser = argparse.ArgumentParser(prog="opwork", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"opwork {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("scenario", nargs="?", default=None)
            p.add_argument("--seeds", type=int, default=None, help="probes per suite")
            p.add_argument("--dim", type=int, default=None, help="fixed Hilbert-space dimension")
            p.add_argument("--suites", nargs="+", default=None, choices=list(SUITES))
        else:
            p.add_argument("scenario")
    return parser


def _error(category: str, message: str, field=None) -> None:
    print(json.dumps({"category": category, "field": field, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse has printed usage; 0 for --help/--version, 2 for bad arguments
        return EXIT_INVALID if e.code else EXIT_OK
    if args.jobs < 1:
        _error("validation", "must be >= 1", "jobs")
        return EXIT_INVALID
    if args.tol is not None and not args.tol > 0:
        _error("validation", "must be positive", "tol")
        return EXIT_INVALID
    start = time.perf_counter()
    try:
        sc = load_scenario(args.scenario, args.seed) if args.scenario else None
        report = COMMANDS[args.command](sc, args)
    except InequalityViolation as e:
        _error(e.category, str(e))
        return EXIT_VIOLATION
    except OpworkError as e:
        _error(e.category, str(e), getattr(e, "field", None))
        return EXIT_INVALID
    report.wall_time = time.perf_counter() - start
    data = emit_report(report, args.format, timing=args.timing)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    if report.violations:
        _error("inequality-violation", "; ".join(report.violations))
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
