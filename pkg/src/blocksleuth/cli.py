"""Command-line entry point: ``blocksleuth {detect,simulate,oracle,corpus}``.

Exit codes
    detect    0 no findings, 1 at least one finding, 2 ingestion error
    simulate  0 trace written, 2 bad model or schedule
    oracle    0 no deadlock reachable, 1 deadlock reachable, 2 inconclusive or error
    corpus    0 every case passes, 1 otherwise
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .analysis import Config, analyze
from .corpus import format_schedule, run_corpus
from .detectors import COND_ANY_SIGNAL, COND_WAKEUP
from .model import ModelError, load_model
from .oracle import DEFAULT_DEPTH, enumerate_schedules
from .report import render_report
from .simulator import DEFAULT_STEP_BOUND, RoundRobin, ScheduleError, Script, SeededRandom, run
from .trace_io import TraceFormatError, UnsupportedVersion, load_semantic_table, read_trace, save_trace


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _config(args: argparse.Namespace) -> Config:
    return Config(
        select_mode=args.select_mode,
        cycle_bound=args.cycle_bound,
        step_bound=getattr(args, "step_bound", DEFAULT_STEP_BOUND),
        format=args.format,
        semantic_table_version=args.semantic_table,
        cond_mode=args.cond_mode,
        hb_filter=not args.no_hb_filter,
    )


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--select-mode", choices=("any", "all"), default="any",
                   help="report a select if any (default) or all of its candidate channels can deadlock")
    p.add_argument("--cycle-bound", type=_positive, default=4, help="longest lock cycle searched (default 4)")
    p.add_argument("--format", choices=("json", "text"), default="text", help="report format")
    p.add_argument("--semantic-table", default="1.17.3", metavar="VERSION",
                   help="runtime version of the function->semantic table (default 1.17.3)")
    p.add_argument("--cond-mode", choices=(COND_WAKEUP, COND_ANY_SIGNAL), default=COND_WAKEUP,
                   help="how a CondWait counts as released")
    p.add_argument("--no-hb-filter", action="store_true", help="disable the happens-before feasibility filter")


def cmd_detect(args: argparse.Namespace) -> int:
    config = _config(args)
    try:
        table = load_semantic_table(config.semantic_table_version)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            trace = read_trace(args.trace, table)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except (OSError, TraceFormatError, UnsupportedVersion, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = analyze(trace, config)
    out = render_report(result.findings, trace, config.format, result.warnings, result.informational)
    if args.output:
        Path(args.output).write_bytes(out)
    else:
        sys.stdout.buffer.write(out)
        sys.stdout.flush()
    return 1 if result.findings else 0


def _schedule(args: argparse.Namespace):
    if args.script:
        return Script.parse(Path(args.script).read_text(encoding="utf-8"))
    if args.seed is not None:
        return SeededRandom(args.seed)
    return RoundRobin()


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        model = load_model(args.model)
        schedule = _schedule(args)
        trace, gt = run(model, schedule, args.step_bound)
    except (OSError, ModelError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.output or str(Path(args.model).with_suffix(".trace"))
    save_trace(trace, out)
    summary = {"completed": "completed", "global_block": "globally blocked", "step_bound": "step bound reached"}
    print(f"{model.name}: {summary[gt.outcome]} after {gt.steps} steps under {format_schedule(schedule)}")
    print(f"trace: {out} ({len(trace)} events)")
    print("completed: " + (" ".join(str(g) for g in sorted(gt.completed)) or "-"))
    for g, (pc, reason) in sorted(gt.blocked.items()):
        print(f"blocked: goroutine {g} at op {pc} ({reason})")
    if gt.leaked:
        print("leaked: " + " ".join(str(g) for g in sorted(gt.leaked)))
    for f in gt.faults:
        print(f"fault: goroutine {f.gid} at op {f.op_index}: {f.message}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        model = load_model(args.model)
    except (OSError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    v = enumerate_schedules(model, args.depth, strict=False)
    if v.deadlock_reachable:
        print(f"{model.name}: deadlock reachable ({v.outcome_count} terminal states, {v.states} states explored)")
        print("witness: " + (v.witness.format().strip() or "(default schedule)"))
        if args.witness:
            Path(args.witness).write_text(v.witness.format(), encoding="utf-8")
            print(f"witness written to {args.witness}")
        return 1
    if v.inconclusive:
        print(f"{model.name}: inconclusive, exploration truncated at depth {v.depth_bound}")
        return 2
    print(f"{model.name}: no deadlock ({v.outcome_count} terminal states, {v.states} states explored)")
    return 0


def cmd_corpus(args: argparse.Namespace) -> int:
    result = run_corpus(config=_config(args))
    for c in result.cases:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.category:<21} {c.name}")
        for d in c.diffs:
            print(f"     {d}")
    for p in result.problems:
        print(f"FAIL {p}")
    counts = ", ".join(f"{k} {v}" for k, v in result.category_counts().items())
    n_ok = sum(c.passed for c in result.cases)
    print(f"{n_ok}/{len(result.cases)} cases pass ({counts})")
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blocksleuth", description="Detect and predict blocking bugs in sync-event traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="analyze a trace file")
    p.add_argument("trace")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="run a model and write its trace")
    p.add_argument("model")
    p.add_argument("-o", "--output", help="trace path (default: model path with .trace)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--seed", type=int, help="seeded random schedule")
    group.add_argument("--script", metavar="FILE", help="scripted schedule (gid or gid:case picks)")
    p.add_argument("--step-bound", type=_positive, default=DEFAULT_STEP_BOUND)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="explore every interleaving of a model")
    p.add_argument("model")
    p.add_argument("--depth", type=_positive, default=DEFAULT_DEPTH)
    p.add_argument("--witness", metavar="FILE", help="write the witness script here")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("corpus", help="run the bundled kernel corpus")
    _add_analysis_flags(p)
    p.add_argument("--step-bound", type=_positive, default=DEFAULT_STEP_BOUND)
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
