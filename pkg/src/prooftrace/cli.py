"""Command-line entry point: ``prooftrace {solve,eval,score,check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .engine import (SearchConfig, Strategy, check_proof, proof_from_dict, solution_to_dict, solve)
from .harness import (FORMATS, GeneratedSource, MetricsConfig, OfflineSource, emit_report,
                      load_dataset, render_summary, report_to_dict, run_eval, score_predictions)
from .metrics import tree_to_dag
from .parser import ParseError, SourceProgram, parse_program, parse_query
from .terms import canonical_render


def _engine_args(p):
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.IDS.value)
    p.add_argument("--max-depth", type=int, default=20)
    p.add_argument("--max-solutions", type=int, default=20)
    p.add_argument("--step-budget", type=int, default=1_000_000)
    p.add_argument("--occurs-check", action="store_true")


def _cfg(args) -> SearchConfig:
    return SearchConfig(Strategy(args.strategy), args.max_depth, args.max_solutions,
                        args.step_budget, args.occurs_check)


def _read_program(path):
    text = Path(path).read_text(encoding="utf-8")
    return parse_program(SourceProgram(text, str(path)))


def cmd_solve(args) -> int:
    kb = _read_program(args.program)
    if args.query:
        query = parse_query(args.query)
    elif kb.queries:
        query = kb.queries[0]
    else:
        print("no query given and the program has none", file=sys.stderr)
        return 2
    result = solve(kb, query, _cfg(args))
    if args.format == "json":
        out = {
            "solutions": [solution_to_dict(s) for s in result],
            "budget_exhausted": result.budget_exhausted,
            "depth_exhausted": result.depth_exhausted,
            "steps": result.steps,
            "diagnostics": list(result.diagnostics),
        }
        if args.graph:
            for d, s in zip(out["solutions"], result):
                d["graph"] = tree_to_dag(s.proof, args.graph).to_dict()
        print(json.dumps(out, indent=2, ensure_ascii=False))
    else:
        if not result.solutions:
            print("no")
        for s in result:
            binds = ", ".join(f"{canonical_render(k)} = {canonical_render(v)}"
                              for k, v in s.answer_bindings.items())
            print(binds or "yes", f"(depth {s.depth_found})")
        if result.budget_exhausted:
            print("% step budget exhausted")
        if result.depth_exhausted:
            print("% depth limit reached")
    return 0 if result.solutions else 1


def _report_out(report, args):
    if args.report_dir:
        emit_report(report, args.report_dir)
    if args.format == "json":
        print(json.dumps(report_to_dict(report), indent=2))
    else:
        sys.stdout.write(render_summary(report))


def _load(args):
    loaded = load_dataset(args.dataset, args.dataset_format)
    for d in loaded.diagnostics:
        print(f"% {d}", file=sys.stderr)
    return loaded.records


def cmd_eval(args) -> int:
    records = _load(args)
    if args.programs_dir:
        source = OfflineSource(args.programs_dir)
    elif args.service_config:
        from .symgen import HttpCompletionService, ServiceConfig
        from .templates import TEMPLATES

        source = GeneratedSource(HttpCompletionService(ServiceConfig.load(args.service_config)),
                                 TEMPLATES, args.retries)
    else:
        print("need --programs-dir or --service-config", file=sys.stderr)
        return 2
    report = run_eval(records, source, _cfg(args), MetricsConfig(labeling=args.labeling), args.workers)
    _report_out(report, args)
    return 0


def cmd_score(args) -> int:
    records = _load(args)
    predictions = {}
    with open(args.predictions, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                p = json.loads(line)
                predictions[str(p["id"])] = p
    report = score_predictions(records, predictions, MetricsConfig(labeling=args.labeling))
    _report_out(report, args)
    return 0


def cmd_check(args) -> int:
    kb = _read_program(args.program)
    with open(args.proof, encoding="utf-8") as fh:
        data = json.load(fh)
    # accept a bare proof, a solution record, or solve's json output
    if "solutions" in data:
        data = data["solutions"][0]
    if "proof" in data:
        data = data["proof"]
    verdict = check_proof(kb, proof_from_dict(data), _cfg(args))
    print("ok" if verdict else f"rejected: {verdict.reason}")
    return 0 if verdict else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prooftrace")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a query and print answers with proofs")
    p.add_argument("program")
    p.add_argument("query", nargs="?")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--graph", choices=["by_provenance", "by_render"])
    _engine_args(p)
    p.set_defaults(func=cmd_solve)

    for name, func, help_ in (("eval", cmd_eval, "evaluate a dataset"),
                              ("score", cmd_score, "score precomputed predictions")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("dataset")
        p.add_argument("--dataset-format", choices=FORMATS, required=True)
        p.add_argument("--report-dir")
        p.add_argument("--format", choices=["text", "json"], default="text")
        p.add_argument("--labeling", choices=["by_provenance", "by_render"])
        if name == "eval":
            p.add_argument("--programs-dir")
            p.add_argument("--service-config")
            p.add_argument("--retries", type=int, default=2)
            p.add_argument("--workers", type=int, default=1)
            _engine_args(p)
        else:
            p.add_argument("--predictions", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("check", help="replay a proof against a program")
    p.add_argument("program")
    p.add_argument("proof")
    _engine_args(p)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        for d in exc.diagnostics:
            print(f"{d.line}:{d.column} {d.kind}: {d.message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
