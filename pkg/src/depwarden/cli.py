"""Command-line entry point.

    depwarden catalog export [--out FILE]
    depwarden validate MODEL.dwm [--format text|json]
    depwarden analyze MODEL.dwm [--satisfice IDS] [--format text|json]
    depwarden transform MODEL.dwm --select IDS --profile P.pdm.json --out DIR
    depwarden simulate --schema S.json --workload W.json [--sweep 1..10] [--weights 1,1]

Exit status: 0 on success, 1 when the model has errors, 2 on usage or
file errors.  Diagnostics go to stderr, results to stdout or files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .catalog import load_catalog
from .dsl import Diagnostic, parse_model, validate_model
from .integration import integrate, tradeoff_matrix
from .sig import Label, SigError, detect_tradeoffs, propagate
from .simulate import (
    DEFAULT_M0,
    DEFAULT_M1,
    DEFAULT_OVERHEAD,
    DEFAULT_SCAN_RATE,
    CostParams,
    SchemaSpec,
    SimulationError,
    build_schema,
    load_workload,
    recommend,
    sweep,
)
from .transform import TransformError, cim_to_pim, load_platform_profile, pim_to_psm, render_psm

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class _Output:
    def __init__(self, stdout, stderr, color):
        self.stdout = stdout
        self.stderr = stderr
        self.color = color

    def out(self, text):
        self.stdout.write(text)

    def diag(self, d: Diagnostic, path):
        line = d.format(str(path))
        if self.color:
            code = "31" if d.is_error else "33"
            line = f"\x1b[{code}m{line}\x1b[0m"
        self.stderr.write(line + "\n")

    def error(self, message):
        self.stderr.write(f"depwarden: error: {message}\n")


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _read_json(path):
    try:
        return json.loads(_read_bytes(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _load(path, io):
    """Parse and validate a model; returns (model, diagnostics)."""
    model, diags = parse_model(_read_bytes(path))
    if model is not None:
        diags = diags + validate_model(model)
    for d in diags:
        io.diag(d, path)
    return model, diags


def _split_ids(values):
    out = []
    for v in values or ():
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def _resolve_op(name, integrated, rows):
    """Accept either an integrated id or a sig-local operationalization id."""
    if name in rows:
        return name
    matches = sorted({node for node, origins in integrated.origins.items()
                      if node in rows and any(orig == name for _, orig in origins)})
    if len(matches) == 1:
        return matches[0]
    if matches:
        raise UsageError(f"operationalization {name!r} is ambiguous: {', '.join(matches)}")
    raise UsageError(f"unknown operationalization {name!r}; valid ids: {', '.join(rows)}")


# -- subcommands ---------------------------------------------------------------------


def cmd_catalog(args, io):
    text = load_catalog().to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        io.out(text)
    return EXIT_OK


def cmd_validate(args, io):
    model, diags = _load(args.model, io)
    errors = sum(d.is_error for d in diags)
    warnings = len(diags) - errors
    if args.format == "json":
        io.out(_dump_json({
            "schema_version": 1,
            "model": model.name if model else None,
            "errors": errors,
            "warnings": warnings,
            "diagnostics": [
                {
                    "severity": d.severity.value,
                    "code": d.code,
                    "message": d.message,
                    "line": d.span.line if d.span else None,
                    "column": d.span.column if d.span else None,
                    "suggestion": d.suggestion,
                }
                for d in diags
            ],
        }))
    else:
        io.out(f"{errors} errors, {warnings} warnings\n")
    return EXIT_INVALID if errors else EXIT_OK


def _analysis(model, satisfice):
    integrated = integrate(model)
    matrix = tradeoff_matrix(integrated)
    initial = {}
    for name in satisfice:
        initial[_resolve_op(name, integrated, integrated.graph.leaves)] = Label.SATISFICED
    labeling = propagate(integrated.graph, initial)
    return integrated, matrix, labeling, detect_tradeoffs(integrated.graph)


def cmd_analyze(args, io):
    model, diags = _load(args.model, io)
    if model is None or any(d.is_error for d in diags):
        return EXIT_INVALID
    try:
        integrated, matrix, labeling, report = _analysis(model, _split_ids(args.satisfice))
    except SigError as exc:
        io.error(f"{args.model}: {exc}")
        return EXIT_INVALID
    if args.format == "json":
        io.out(_dump_json({
            "schema_version": 1,
            "model": model.name,
            "matrix": matrix.to_dict(),
            "tradeoffs": [
                {"id": e.operationalization, "effects": dict(e.effects)} for e in report.entries
            ],
            "labels": {n: l.name.lower() for n, l in labeling.labels.items()},
            "conflicts": [d.describe() for d in labeling.diagnostics],
            "provenance": {n: [g.ident for g in gs] for n, gs in integrated.provenance.items()},
        }))
        return EXIT_OK
    lines = [f"model {model.name}: {len(matrix.rows)} operationalizations x {len(matrix.columns)} roots", ""]
    io.out("\n".join(lines) + "\n" + matrix.format_text())
    if report.entries:
        io.out("\ntrade-offs:\n")
        for e in report.entries:
            effects = ", ".join(f"{k} {v:+d}" for k, v in e.effects.items())
            io.out(f"  {e.operationalization}: {effects}\n")
    roots = integrated.graph.roots
    io.out("\nroot labels:\n")
    for r in roots:
        io.out(f"  {r}: {labeling[r].name.lower()}\n")
    for d in labeling.diagnostics:
        io.out(f"  note: {d.describe()}\n")
    return EXIT_OK


def _parse_settings(values, integrated, rows):
    settings: dict[str, dict[str, str]] = {}
    for item in values or ():
        target, sep, value = item.partition("=")
        op, colon, key = target.rpartition(":")
        if not sep or not colon or not op or not key:
            raise UsageError(f"--set expects OP:PARAM=VALUE, got {item!r}")
        settings.setdefault(_resolve_op(op, integrated, rows), {})[key] = value
    return settings


def cmd_transform(args, io):
    model, diags = _load(args.model, io)
    if model is None or any(d.is_error for d in diags):
        return EXIT_INVALID
    try:
        profile = load_platform_profile(args.profile)
    except OSError as exc:
        raise UsageError(f"cannot read {args.profile}: {exc.strerror or exc}") from None
    except TransformError as exc:
        io.error(str(exc))
        return EXIT_INVALID
    try:
        integrated = integrate(model)
    except SigError as exc:
        io.error(f"{args.model}: {exc}")
        return EXIT_INVALID
    matrix = tradeoff_matrix(integrated)
    chosen = {_resolve_op(n, integrated, matrix.rows) for n in _split_ids(args.select)}
    selections = {op: op in chosen for op in matrix.rows}
    try:
        pim = cim_to_pim(integrated, matrix, selections, _parse_settings(args.set, integrated, matrix.rows))
    except TransformError as exc:
        io.error(str(exc))
        return EXIT_INVALID
    doc = pim_to_psm(pim, profile)
    out_dir = Path(args.out)
    try:
        written = render_psm(doc, out_dir)
        with open(out_dir / "pim.json", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_dump_json(_pim_dict(pim)))
    except OSError as exc:
        raise UsageError(f"cannot write to {out_dir}: {exc.strerror or exc}") from None
    manual = sum(s.status == "manual" for s in doc.sections)
    io.out(f"{len(doc.sections)} sections ({manual} manual) -> {', '.join(p.name for p in written)}\n")
    io.out(f"digest {doc.digest}\n")
    return EXIT_OK


def _pim_dict(pim):
    return {
        "schema_version": 1,
        "source_model": pim.source_model,
        "tactics": [
            {
                "id": t.id,
                "kind": t.kind.value,
                "layer": t.layer.ident,
                "source": t.source,
                "origins": list(t.origins),
                "ref": t.ref,
                "parameters": dict(t.parameters),
                "mapped": t.mapped,
            }
            for t in pim.tactics
        ],
        "decisions": [
            {"operationalization": d.operationalization, "chosen": d.chosen, "rationale": d.rationale}
            for d in pim.decisions
        ],
    }


def _parse_sweep(text):
    lo, sep, hi = text.partition("..")
    try:
        if sep:
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--sweep expects LO..HI or a comma list, got {text!r}") from None


def _parse_weights(text):
    parts = text.split(",")
    try:
        w = tuple(float(p) for p in parts)
    except ValueError:
        w = ()
    if len(w) != 2:
        raise UsageError(f"--weights expects W_AR,W_M, got {text!r}")
    return w


def cmd_simulate(args, io):
    try:
        spec = SchemaSpec.from_dict(_read_json(args.schema))
        workload = load_workload(_read_bytes(args.workload).decode("utf-8"))
    except (SimulationError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        io.error(str(exc))
        return EXIT_INVALID
    counts = _parse_sweep(args.sweep)
    weights = _parse_weights(args.weights)
    try:
        report = sweep(build_schema(spec), workload, args.method, counts, weights,
                       CostParams(args.overhead, args.scan_rate), args.m0, args.m1, args.workers)
    except SimulationError as exc:
        io.error(str(exc))
        return EXIT_INVALID
    pick = recommend(report, args.max_cost, args.max_m)
    doc = report.to_dict()
    doc["tolerances"] = {
        "max_cost": None if math.isinf(args.max_cost) else args.max_cost,
        "max_m": None if math.isinf(args.max_m) else args.max_m,
    }
    doc["recommendation"] = pick
    if args.out:
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            with open(out_dir / "sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(report.to_csv())
            with open(out_dir / "sweep.json", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(_dump_json(doc))
        except OSError as exc:
            raise UsageError(f"cannot write to {out_dir}: {exc.strerror or exc}") from None
    if args.format == "json":
        io.out(_dump_json(doc))
    elif args.format == "csv":
        io.out(report.to_csv())
    else:
        io.out(report.to_csv())
        io.out("recommended F: " + ("no feasible fragment count" if pick is None else str(pick)) + "\n")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depwarden",
        description="Model, analyze and lower data warehouse dependability requirements.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--no-color", action="store_true",
                        help="disable colored diagnostics (also: DEPWARDEN_NO_COLOR)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("catalog", help="dependability parameter catalog")
    csub = p.add_subparsers(dest="catalog_command", metavar="ACTION")
    csub.required = True
    e = csub.add_parser("export", help="write the catalog as JSON")
    e.add_argument("--out", metavar="FILE", help="output file (default: stdout)")
    e.set_defaults(func=cmd_catalog)

    p = sub.add_parser("validate", help="check a .dwm model against the catalog")
    p.add_argument("model", metavar="MODEL", help="model file (.dwm)")
    p.add_argument("--format", choices=("text", "json"), default="text", help="report format")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="propagate labels and print the trade-off matrix")
    p.add_argument("model", metavar="MODEL", help="model file (.dwm)")
    p.add_argument("--satisfice", action="append", metavar="IDS",
                   help="comma-separated leaves to label satisficed before propagation")
    p.add_argument("--format", choices=("text", "json"), default="text", help="report format")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("transform", help="lower a model to PIM tactics and a platform-specific PSM")
    p.add_argument("model", metavar="MODEL", help="model file (.dwm)")
    p.add_argument("--select", action="append", metavar="IDS",
                   help="comma-separated operationalizations to implement (repeatable)")
    p.add_argument("--profile", required=True, metavar="PDM", help="platform profile (.pdm.json)")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory for psm.txt/psm.json")
    p.add_argument("--set", action="append", metavar="OP:PARAM=VALUE",
                   help="override a tactic parameter, e.g. fragmentation:fragment_count=8")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("simulate", help="sweep fragment counts over a synthetic star schema")
    p.add_argument("--schema", required=True, metavar="FILE", help="schema spec (JSON)")
    p.add_argument("--workload", required=True, metavar="FILE", help="workload queries (JSON)")
    p.add_argument("--sweep", default="1..10", metavar="LO..HI", help="fragment counts (default: 1..10)")
    p.add_argument("--weights", default="1,1", metavar="W_AR,W_M",
                   help="objective weights for response cost and maintainability (default: 1,1)")
    p.add_argument("--method", choices=("hash", "range"), default="hash", help="fragmentation method")
    p.add_argument("--overhead", type=float, default=DEFAULT_OVERHEAD, help="cost per fragment touched")
    p.add_argument("--scan-rate", type=float, default=DEFAULT_SCAN_RATE, help="rows scanned per cost unit")
    p.add_argument("--m0", type=float, default=DEFAULT_M0, help="fixed maintenance cost")
    p.add_argument("--m1", type=float, default=DEFAULT_M1, help="maintenance cost per fragment")
    p.add_argument("--max-cost", type=float, default=math.inf, help="tolerated average response cost")
    p.add_argument("--max-m", type=float, default=math.inf, help="tolerated maintenance cost")
    p.add_argument("--workers", type=int, default=1, help="threads evaluating fragment counts")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text", help="stdout format")
    p.add_argument("--out", metavar="DIR", help="also write sweep.csv and sweep.json here")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    color = (not args.no_color and not os.environ.get("DEPWARDEN_NO_COLOR")
             and hasattr(stderr, "isatty") and stderr.isatty())
    io = _Output(stdout, stderr, color)
    try:
        return args.func(args, io)
    except UsageError as exc:
        io.error(str(exc))
        return EXIT_USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
