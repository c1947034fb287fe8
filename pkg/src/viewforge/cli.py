"""Command-line front door.

Reports go to stdout (or --report/--out files), diagnostics to stderr.
Exit codes: 0 all checks pass, 1 a check failed, 2 usage or IO error,
3 an enumeration budget or cap was exceeded.  Universe bounds and the
enumeration budget live in the manifest so results are reproducible
from versioned files alone.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .checker import BUDGET, FAIL, PASS, check_consistency, \
    render_system_config, witness_system
from .errors import BudgetExceeded, CapExceeded, ParseError, ViewforgeError
from .parser import parse_document
from .project import load_project
from .refine import load_script, oracle_refines, replay_script
from .render import render_document
from .sim import EXHAUSTIVE, RANDOM, check_trace, load_scenario, simulate
from .values import render_value


@dataclass
class CommandOutcome:
    exit_code: int
    report_paths: list = field(default_factory=list)


def _verdict_code(verdict: str) -> int:
    return {PASS: 0, FAIL: 1, BUDGET: 3}[verdict]


def _emit_report(report, args, outcome) -> None:
    for line in report.render_lines():
        print(line)
    if getattr(args, "report", None):
        path = Path(args.report)
        with path.open("w") as fp:
            for record in report.render_records():
                fp.write(json.dumps(record, sort_keys=True) + "\n")
        outcome.report_paths.append(str(path))


def _cmd_check(args) -> CommandOutcome:
    outcome = CommandOutcome(0)
    ds = load_project(args.manifest)
    report = check_consistency(ds)
    _emit_report(report, args, outcome)
    if report.verdict == PASS and args.witness:
        w = witness_system(ds, ds.universe(), dict(ds.bounds))
        if w not in (None, BUDGET):
            Path(args.witness).write_text(render_system_config(w))
            outcome.report_paths.append(args.witness)
    outcome.exit_code = _verdict_code(report.verdict)
    return outcome


def _cmd_refine(args) -> CommandOutcome:
    outcome = CommandOutcome(0)
    ds = load_project(args.manifest)
    script = load_script(args.script)
    final, report = replay_script(ds, script)
    _emit_report(report, args, outcome)
    out_dir = Path(args.out) if args.out else Path(args.manifest).parent / "refined"
    if report.verdict == PASS:
        out_dir.mkdir(parents=True, exist_ok=True)
        ext = {"typedocument": ".vtype", "objectmodeldocument": ".vobj",
               "classdocument": ".vclass", "lifecycledocument": ".vlife"}
        from .documents import doc_kind
        for name in sorted(final.docs):
            doc = final.docs[name]
            path = out_dir / (name + ext[doc_kind(doc)])
            path.write_text(render_document(doc))
            outcome.report_paths.append(str(path))
    outcome.exit_code = _verdict_code(report.verdict)
    return outcome


def _cmd_verify(args) -> CommandOutcome:
    ds = load_project(args.manifest)
    old = parse_document(Path(args.old).read_text())
    new = parse_document(Path(args.new).read_text())
    try:
        result = oracle_refines(old, new, ds.signature_env(), ds.universe(),
                                args.horizon, framed=not args.raw)
    except BudgetExceeded as e:
        print(f"BUDGET {e}", file=sys.stderr)
        return CommandOutcome(3)
    if result.refines:
        print(f"REFINES {old.name} -> {new.name} horizon={args.horizon} "
              f"pairs={result.pairs_explored}")
        return CommandOutcome(0)
    print(f"NOT-REFINES {old.name} -> {new.name} horizon={args.horizon}")
    for step in result.trace or ():
        if step[0] == "start":
            _, control, valuation = step
            pretty = " ".join(f"{k}={render_value(v)}"
                              for k, v in sorted(valuation.items()))
            print(f"  start control={control} {pretty}")
        elif step[0] == "step":
            _, msg, seq, control = step
            out = "<unconstrained>" if seq is None else render_value(seq)
            print(f"  input {render_value(msg)} -> output {out} "
                  f"control={control or '-'}")
        else:
            print(f"  {step}")
    return CommandOutcome(1)


def _cmd_simulate(args) -> CommandOutcome:
    outcome = CommandOutcome(0)
    ds = load_project(args.manifest)
    scenario_path = ds.scenarios.get(args.scenario, args.scenario)
    sc = load_scenario(scenario_path, ds)
    if args.exhaustive:
        try:
            traces = simulate(ds, sc, EXHAUSTIVE)
        except CapExceeded as e:
            print(f"CAP {e}", file=sys.stderr)
            return CommandOutcome(3)
        text = f"# {len(traces)} traces\n" + "\n".join(
            t.render() for t in traces)
    else:
        trace = simulate(ds, sc, RANDOM, args.seed)
        report = check_trace(trace)
        if report.verdict != PASS:
            for line in report.render_lines():
                print(line, file=sys.stderr)
            return CommandOutcome(1)
        text = trace.render()
    if args.out:
        Path(args.out).write_text(text)
        outcome.report_paths.append(args.out)
    else:
        print(text, end="")
    return outcome


def _cmd_fmt(args) -> CommandOutcome:
    doc = parse_document(Path(args.document).read_text())
    print(render_document(doc), end="")
    return CommandOutcome(0)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="viewforge",
        description="check, refine and simulate view-document projects")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="context conditions + consistency")
    c.add_argument("manifest")
    c.add_argument("--report", help="write machine-readable records here")
    c.add_argument("--witness", help="write the witness configuration here")
    c.set_defaults(fn=_cmd_check)

    r = sub.add_parser("refine", help="replay a refinement script")
    r.add_argument("manifest")
    r.add_argument("script")
    r.add_argument("--out", help="directory for the resulting documents")
    r.add_argument("--report")
    r.set_defaults(fn=_cmd_refine)

    v = sub.add_parser("verify", help="semantic refinement oracle")
    v.add_argument("manifest")
    v.add_argument("old", help="path to the old lifecycle document")
    v.add_argument("new", help="path to the new lifecycle document")
    v.add_argument("--horizon", type=int, required=True)
    v.add_argument("--raw", action="store_true",
                   help="frame-free postcondition semantics")
    v.set_defaults(fn=_cmd_verify)

    s = sub.add_parser("simulate", help="run a scenario")
    s.add_argument("manifest")
    s.add_argument("scenario", help="scenario name from the manifest or a path")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--out", help="write the trace here instead of stdout")
    s.set_defaults(fn=_cmd_simulate)

    f = sub.add_parser("fmt", help="canonical document rendering")
    f.add_argument("document")
    f.set_defaults(fn=_cmd_fmt)
    return p


def run(argv=None) -> CommandOutcome:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return CommandOutcome(2 if e.code not in (0, None) else 0)
    try:
        return args.fn(args)
    except (ParseError, ViewforgeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return CommandOutcome(2)


def main() -> None:
    sys.exit(run().exit_code)
