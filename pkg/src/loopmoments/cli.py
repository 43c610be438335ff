"""Command-line front end: check / exact / approx / simulate / compare / bench.

Every command prints a single JSON document to stdout so runs are easy to
archive and diff.  Exit codes: 0 success, 1 numeric-contract failure,
2 input error, 3 unsupported construct.  Stage runtimes are reported in
milliseconds as pce_ms (basis construction + substitution) and engine_ms
(moment closure + recurrence evaluation).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import dsl, engine, pce, simulate, transform
from .errors import (
    ClosureExplosion,
    ConditionsViolated,
    DslSyntaxError,
    IllConditionedBasis,
    ImaginaryResidueTooLarge,
    LoopMomentsError,
    MgfDiverges,
    MomentDiverges,
    NonLinearCycle,
    QuadratureNotConverged,
    UnboundedSupport,
)

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INPUT = 2
EXIT_UNSUPPORTED = 3

_NUMERIC_ERRORS = (
    ImaginaryResidueTooLarge,
    QuadratureNotConverged,
    IllConditionedBasis,
    MgfDiverges,
    MomentDiverges,
    ClosureExplosion,
)
_UNSUPPORTED_ERRORS = (ConditionsViolated, NonLinearCycle, UnboundedSupport)

# One row per shipped benchmark: (stem, target monomial, n, PCE degrees).
BENCH_SUITE = (
    ("turning_vehicle", "x", 20, (3, 5, 9)),
    ("turning_vehicle_trunc", "x", 20, (3, 5, 9)),
    ("rimless_wheel", "x", 2000, (1, 2, 3)),
    ("robotic_arm", "x", 100, (1, 2, 3)),
    ("underwater", "x^2", 10, (3, 5, 8)),
    ("planar_aerial", "y", 10, (6, 8, 10)),
    ("aerial_3d", "x", 20, (3, 5, 8)),
    ("diff_drive", "x^2", 25, (8, 10, 12)),
    ("mobile_arm", "x", 2000, (2, 3, 4)),
    ("taylor_rule", "i", 20, (3, 5, 9)),
    ("stochastic_decay", "m", 10, (6, 8, 10)),
)

_BENCH_CSV_COLUMNS = (
    "benchmark", "classification", "target", "n", "exact",
    "degrees", "pce_values", "sim", "sim_se", "pce_ms", "engine_ms",
)


class _CommandError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


def _classify_error(exc: Exception) -> int:
    if isinstance(exc, _UNSUPPORTED_ERRORS):
        return EXIT_UNSUPPORTED
    if isinstance(exc, _NUMERIC_ERRORS):
        return EXIT_NUMERIC
    if isinstance(exc, (DslSyntaxError, OSError)):
        return EXIT_INPUT
    if isinstance(exc, LoopMomentsError):
        return EXIT_INPUT
    raise exc


def _load(path: str) -> dsl.Program:
    try:
        return dsl.parse_file(path)
    except (DslSyntaxError, LoopMomentsError, OSError) as exc:
        raise _CommandError(EXIT_INPUT, f"{path}: {exc}") from exc


def _auto_mode(p: dsl.Program) -> str:
    """stable when every site argument is an iteration-stable fresh draw,
    otherwise the unconditional standard-normal expansion."""
    stable = dsl.iteration_stable_vars(p)
    for st in p.body:
        for e in st.exprs:
            for call in dsl.nonpoly_calls(e):
                if not dsl.free_vars(call.arg) <= stable:
                    return "unconditional"
    return "stable"


def _parse_mode(text: str):
    if text == "auto" or text in ("stable", "unconditional"):
        return text, 0
    if text.startswith("conditional:"):
        try:
            return "conditional", int(text.split(":", 1)[1])
        except ValueError:
            pass
    raise _CommandError(
        EXIT_INPUT, f"invalid --mode {text!r}: expected auto, stable, "
        "unconditional, or conditional:N")


def _exact_program(p: dsl.Program):
    report = dsl.classify(p)
    if report.klass == "ProbSolvable":
        return p, report
    if report.klass == "ProbSolvableAfterExactRewrite":
        return transform.rewrite_all(p), report
    reasons = "; ".join(f"{loc}: {why}" for loc, why in report.blocking_constructs)
    raise _CommandError(
        EXIT_UNSUPPORTED,
        f"exact method unavailable for class {report.klass}"
        + (f" ({reasons})" if reasons else ""))


def _theorem1_bound(p: dsl.Program, mode: str):
    """Theorem-1 bound per site when every argument support is finite."""
    draw_dist = {}
    for st in p.body:
        for t, e in zip(st.targets, st.exprs):
            if isinstance(e, dsl.DistCall):
                draw_dist[t] = e.dist
    bounds = []
    for st in p.body:
        for e in st.exprs:
            for call in dsl.nonpoly_calls(e):
                variables = sorted(dsl.free_vars(call.arg))
                if mode != "stable" or any(v not in draw_dist for v in variables):
                    bounds.append(None)
                    continue
                supports = [draw_dist[v].support for v in variables]
                g = transform._site_g(call, variables)
                try:
                    bounds.append(pce.error_bound(g, supports))
                except UnboundedSupport:
                    bounds.append(None)
    return bounds


def _run_approx(p: dsl.Program, target: str, n: int, degree: int, mode: str,
                n_iters: int) -> dict:
    t0 = time.perf_counter()
    report = transform.pce_substitute_all(p, degree=degree, mode=mode,
                                          n_iters=n_iters)
    pce_ms = 1e3 * (time.perf_counter() - t0)
    t0 = time.perf_counter()
    value = engine.moments_at(report.program, [target], n)[target]
    engine_ms = 1e3 * (time.perf_counter() - t0)
    ses = [
        (est.se if not isinstance(est, tuple) else max(e.se for e in est))
        for est in report.estimates
    ]
    return {
        "degree": degree,
        "value": value,
        "site_se": ses,
        "theorem1_bound": _theorem1_bound(p, mode),
        "pce_ms": pce_ms,
        "engine_ms": engine_ms,
    }


# --- commands -------------------------------------------------------------


def cmd_check(args) -> dict:
    p = _load(args.file)
    report = dsl.classify(p)
    doc = {
        "command": "check",
        "file": args.file,
        "classification": {
            "klass": report.klass,
            "accumulators": list(report.accumulators),
            "blocking_constructs": [list(b) for b in report.blocking_constructs],
        },
    }
    if report.klass == "Unsupported":
        raise _CommandError(EXIT_UNSUPPORTED, json.dumps(doc, indent=2))
    return doc


def cmd_exact(args) -> dict:
    p = _load(args.file)
    rewritten, report = _exact_program(p)
    t0 = time.perf_counter()
    value = engine.moments_at(rewritten, [args.target], args.n)[args.target]
    engine_ms = 1e3 * (time.perf_counter() - t0)
    doc = {
        "command": "exact",
        "file": args.file,
        "classification": report.klass,
        "target": args.target,
        "n": args.n,
        "value": value,
        "engine_ms": engine_ms,
    }
    if args.emit_rewritten:
        doc["rewritten"] = dsl.pretty_print(rewritten)
    return doc


def cmd_approx(args) -> dict:
    p = _load(args.file)
    mode, n_iters = _parse_mode(args.mode)
    if mode == "auto":
        mode = _auto_mode(p)
    results = [
        _run_approx(p, args.target, args.n, d, mode, n_iters)
        for d in args.degree
    ]
    return {
        "command": "approx",
        "file": args.file,
        "target": args.target,
        "n": args.n,
        "mode": mode,
        "results": results,
    }


def cmd_simulate(args) -> dict:
    p = _load(args.file)
    table = simulate.simulate(p, args.n, args.samples, args.seed, [args.target])
    value = table.value(args.n, args.target)
    se = table.stderrs.get((args.n, args.target))
    return {
        "command": "simulate",
        "file": args.file,
        "target": args.target,
        "n": args.n,
        "samples": args.samples,
        "seed": args.seed,
        "value": value,
        "se": se if se is not None and se == se else None,
    }


def _compare_row(file: str, target: str, n: int, degrees, mode: str,
                 samples: int, seed: int) -> tuple[dict, int]:
    """One benchmark comparison row; partial results survive method failures."""
    p = _load(file)
    report = dsl.classify(p)
    row = {
        "file": file,
        "classification": report.klass,
        "target": target,
        "n": n,
        "exact": None,
        "exact_error": None,
        "pce": [],
        "sim": None,
        "sim_se": None,
        "pce_ms": 0.0,
        "engine_ms": 0.0,
    }
    worst = EXIT_OK
    try:
        rewritten, _ = _exact_program(p)
        t0 = time.perf_counter()
        row["exact"] = engine.moments_at(rewritten, [target], n)[target]
        row["engine_ms"] += 1e3 * (time.perf_counter() - t0)
    except _CommandError as exc:
        row["exact_error"] = exc.message
    except LoopMomentsError as exc:
        row["exact_error"] = str(exc)
        worst = max(worst, _classify_error(exc))
    eff_mode = _auto_mode(p) if mode == "auto" else mode
    for d in degrees:
        try:
            res = _run_approx(p, target, n, d, eff_mode, 0)
            row["pce"].append({"degree": d, "value": res["value"]})
            row["pce_ms"] += res["pce_ms"]
            row["engine_ms"] += res["engine_ms"]
        except LoopMomentsError as exc:
            row["pce"].append({"degree": d, "error": str(exc)})
            worst = max(worst, _classify_error(exc))
    try:
        table = simulate.simulate(p, n, samples, seed, [target])
        row["sim"] = table.value(n, target)
        se = table.stderrs.get((n, target))
        row["sim_se"] = se if se is not None and se == se else None
    except LoopMomentsError as exc:
        row["sim_error"] = str(exc)
        worst = max(worst, _classify_error(exc))
    return row, worst


def cmd_compare(args) -> dict:
    mode, _ = _parse_mode(args.mode)
    row, worst = _compare_row(args.file, args.target, args.n, args.degree,
                              mode, args.samples, args.seed)
    doc = {"command": "compare", **row}
    if worst != EXIT_OK:
        raise _CommandError(worst, json.dumps(doc, indent=2))
    return doc


def cmd_bench(args) -> dict:
    bench_dir = Path(args.dir)
    rows = []
    worst = EXIT_OK
    for stem, target, n, degrees in BENCH_SUITE:
        file = bench_dir / f"{stem}.pp"
        row, code = _compare_row(str(file), target, n, degrees, "auto",
                                 args.samples, args.seed)
        rows.append({"benchmark": stem, **row})
        worst = max(worst, code)
    doc = {"command": "bench", "samples": args.samples, "seed": args.seed,
           "rows": rows}
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_BENCH_CSV_COLUMNS)
            for row in rows:
                writer.writerow([
                    row["benchmark"], row["classification"], row["target"],
                    row["n"],
                    "" if row["exact"] is None else repr(row["exact"]),
                    " ".join(str(c["degree"]) for c in row["pce"]),
                    " ".join("" if "value" not in c else repr(c["value"])
                             for c in row["pce"]),
                    "" if row["sim"] is None else repr(row["sim"]),
                    "" if row["sim_se"] is None else repr(row["sim_se"]),
                    repr(row["pce_ms"]), repr(row["engine_ms"]),
                ])
    if worst != EXIT_OK:
        raise _CommandError(worst, json.dumps(doc, indent=2))
    return doc


# --- argument parsing -------------------------------------------------------


def _add_target_n(sub):
    sub.add_argument("--target", required=True,
                     help="target monomial, e.g. x or x^2")
    sub.add_argument("--n", type=int, required=True, help="iteration index")


def _degree_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid degree list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="loopmoments",
        description="Exact and PCE-approximated moments of probabilistic loops.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_check = sub.add_parser("check", help="classify a program")
    p_check.add_argument("file")
    p_check.set_defaults(func=cmd_check)

    p_exact = sub.add_parser("exact", help="exact moment via rewrite + closure")
    p_exact.add_argument("file")
    _add_target_n(p_exact)
    p_exact.add_argument("--emit-rewritten", action="store_true",
                         help="include the rewritten program source")
    p_exact.set_defaults(func=cmd_exact)

    p_approx = sub.add_parser("approx", help="PCE-approximated moment")
    p_approx.add_argument("file")
    _add_target_n(p_approx)
    p_approx.add_argument("--degree", type=_degree_list, action="extend",
                          required=True, help="degree (repeatable, or comma list)")
    p_approx.add_argument("--mode", default="auto",
                          help="auto | stable | unconditional | conditional:N")
    p_approx.set_defaults(func=cmd_approx)

    p_sim = sub.add_parser("simulate", help="Monte Carlo estimate")
    p_sim.add_argument("file")
    _add_target_n(p_sim)
    p_sim.add_argument("--samples", type=int, default=100000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="all applicable methods, one row")
    p_cmp.add_argument("file")
    _add_target_n(p_cmp)
    p_cmp.add_argument("--degree", type=_degree_list, action="extend",
                       default=None, help="degrees for the PCE columns")
    p_cmp.add_argument("--mode", default="auto")
    p_cmp.add_argument("--samples", type=int, default=100000)
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.set_defaults(func=cmd_compare)

    p_bench = sub.add_parser("bench", help="run the shipped benchmark suite")
    p_bench.add_argument("--dir", default="benchmarks")
    p_bench.add_argument("--samples", type=int, default=100000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default=None, help="write JSON report here")
    p_bench.add_argument("--csv", default=None, help="write CSV report here")
    p_bench.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "degree", None) is None and args.cmd == "compare":
        args.degree = [3, 5, 9]
    try:
        doc = args.func(args)
    except _CommandError as exc:
        print(exc.message, file=sys.stderr)
        return exc.code
    except LoopMomentsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _classify_error(exc)
    print(json.dumps(doc, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
