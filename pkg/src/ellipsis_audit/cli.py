"""Command-line front end.

Subcommands compose via files so every pipeline stage is reproducible and
inspectable: generate -> learn -> reduce -> reconstruct, plus the buffer
simulator and the closed-form analyzer.  Exit codes: 0 success, 2 bad
configuration or flags, 3 unreadable or malformed input data, 4 a
verification that ran and failed.  Set ELLIPSIS_LOG=debug|info|warning
for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from types import SimpleNamespace

from . import buffer_sim, formulas
from .learning import (DEFAULT_BOUNDARY_SYSCALLS, NoMatchingInstances,
                       TemporalPolicy, learn_templates)
from .records import MalformedRecord, parse_lines, serialize_record
from .reconstruction import (RepInvalid, RetentionViolation, UnknownTemplate,
                             reconstruct, verify_retention)
from .reduction import (EngineUnavailable, OutOfOrderTimestamp,
                        PrefixConflict, reduce_stream)
from .templates import (CountMismatch, DuplicateName, MalformedEntry,
                        TemplateSet)
from .workloads import SpecInvalid, generate, inject, load_spec

log = logging.getLogger("ellipsis_audit")

_CONFIG_ERRORS = (SpecInvalid, buffer_sim.ConfigInvalid, formulas.ParamsInvalid,
                  EngineUnavailable)
_INPUT_ERRORS = (MalformedRecord, MalformedEntry, CountMismatch, DuplicateName,
                 PrefixConflict, UnknownTemplate, RepInvalid,
                 OutOfOrderTimestamp, NoMatchingInstances, FileNotFoundError,
                 IsADirectoryError)


def _setup_logging() -> None:
    level = os.environ.get("ELLIPSIS_LOG", "warning").upper()
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s %(message)s")


def _read_records(path: str):
    with open(path, encoding="utf-8") as fh:
        yield from parse_lines(fh)


def _write_records(path: str, records) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(serialize_record(r))
            fh.write("\n")
            n += 1
    return n


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_boundaries(text: str) -> frozenset[int]:
    try:
        nums = frozenset(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad syscall list {text!r}")
    if not nums:
        raise argparse.ArgumentTypeError("boundary set must be nonempty")
    return nums


def _parse_policy(text: str) -> TemporalPolicy:
    try:
        return TemporalPolicy.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


# ------------------------------------------------------------- subcommands

def _cmd_generate(args) -> int:
    spec = load_spec(args.spec)
    stream = generate(spec, seed=args.seed)
    if args.inject_spec:
        with open(args.inject_spec, encoding="utf-8") as fh:
            from .workloads import AnomalyRecordSpec, AnomalySpec
            d = json.load(fh)
            anomaly = AnomalySpec(
                records=tuple(AnomalyRecordSpec(*row) for row in d["records"]),
                times_ns=tuple(d["times_ns"]),
                **{k: d[k] for k in ("comm", "pid", "tid", "exe", "gap_ns",
                                     "serial_base") if k in d})
        stream = inject(stream, anomaly)
    n = _write_records(args.out, stream)
    log.info("generate: %d records -> %s", n, args.out)
    return 0


def _cmd_learn(args) -> int:
    tset, report = learn_templates(
        _read_records(args.trace), top_n=args.top_n, policy=args.policy,
        boundary_syscalls=args.boundaries,
        include_low_support=args.include_low_support)
    os.makedirs(args.out_dir, exist_ok=True)
    tset.save_dir(args.out_dir)
    _write_json(os.path.join(args.out_dir, "stats.json"), report)
    log.info("learn: %d templates from %d tasks -> %s",
             len(tset), len(report["tasks"]), args.out_dir)
    for row in report["tasks"]:
        print(f"{row['task']} pid={row['pid']} tid={row['tid']} "
              f"N={row['N']} I={row['I']} f={row['f']} "
              f"templates={','.join(row['templates']) or '-'}")
    return 0


def _cmd_reduce(args) -> int:
    tset = TemplateSet.load_dir(args.templates)
    result = reduce_stream(_read_records(args.infile), tset, mode=args.mode,
                           engine=args.engine,
                           enforce_temporal=not args.no_temporal)
    _write_records(args.out, result.records())
    payload = dict(schema_version=1, mode=args.mode, engine=result.engine,
                   **result.counters.to_dict())
    _write_json(args.counters, payload)
    log.info("reduce: %d -> %d events (%s)", result.counters.events_in,
             result.counters.events_out, result.engine)
    return 0


def _cmd_reconstruct(args) -> int:
    tset = TemplateSet.load_dir(args.templates)
    expanded = reconstruct(_read_records(args.infile), tset,
                           synthesize_serials=args.synthesize_serials)
    n = _write_records(args.out, expanded)
    log.info("reconstruct: %d records -> %s", n, args.out)
    if args.verify_against:
        report = verify_retention(_read_records(args.verify_against),
                                  _read_records(args.infile), tset)
        _write_json(None, report.to_dict())
    return 0


def _load_arrivals(args) -> list[int]:
    if args.arrivals:
        with open(args.arrivals, encoding="utf-8") as fh:
            return [int(line) for line in fh if line.strip()]
    return [r.ts_ns for r in _read_records(args.from_log)]


def _cmd_simulate(args) -> int:
    arrivals = _load_arrivals(args)
    cfg = buffer_sim.BufferConfig(
        capacity=args.capacity, drain_period_ns=args.drain_period,
        drain_burst=args.drain_burst, drain_jitter_ns=args.drain_jitter,
        seed=args.seed)
    result = buffer_sim.simulate(arrivals, cfg,
                                 sample_period_ns=args.sample_period,
                                 engine=args.engine)
    payload = result.to_dict()
    if args.find_min_capacity:
        payload["min_capacity_for_lossless"] = buffer_sim.min_capacity_for_lossless(
            arrivals, cfg, engine=args.engine)
    if args.samples:
        with open(args.samples, "w", encoding="utf-8") as fh:
            fh.write("t_ns,occupancy\n")
            for t, occ in result.occupancy_samples:
                fh.write(f"{t},{occ}\n")
    _write_json(None, payload)
    return 0


def _cmd_analyze(args) -> int:
    rows = formulas.load_params(args.params)
    for tp in rows:
        print(f"{tp.name or '(unnamed)'}: "
              f"E_A={formulas.events_audit(tp):.1f} "
              f"E_E={formulas.events_ellipsis(tp):.1f} "
              f"dE={formulas.event_reduction(tp):.1f} "
              f"E_HP={formulas.events_hp_best(tp):.1f} "
              f"L_A={formulas.log_size_audit(tp):.0f} "
              f"L_E={formulas.log_size_ellipsis(tp):.0f} "
              f"dL={formulas.size_reduction(tp):.0f}")
    if not args.counters:
        return 0
    with open(args.counters, encoding="utf-8") as fh:
        counters = SimpleNamespace(**json.load(fh))
    tp = rows[0]
    if args.task:
        matches = [r for r in rows if r.name == args.task]
        if not matches:
            raise formulas.ParamsInvalid(f"no params row named {args.task!r}")
        tp = matches[0]
    report = formulas.compare(tp, counters, mode=args.mode,
                              tolerance=args.tolerance)
    _write_json(None, report.to_dict())
    if report.flags:
        print("verification failed: " + "; ".join(report.flags),
              file=sys.stderr)
        return 4
    return 0


# ------------------------------------------------------------------ parser

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ellipsis-audit",
        description="Audit-stream reduction toolkit: generate, learn, "
                    "reduce, reconstruct, simulate, analyze.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a workload spec to a log file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--inject-spec", default=None,
                   help="JSON anomaly description merged into the stream")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("learn", help="create templates from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--top-n", type=int, default=1)
    p.add_argument("--policy", type=_parse_policy,
                   default=TemporalPolicy.max_observed(),
                   help="none, max, or musigma[:K] (default max)")
    p.add_argument("--boundaries", type=_parse_boundaries,
                   default=DEFAULT_BOUNDARY_SYSCALLS,
                   help="comma-separated boundary syscall numbers")
    p.add_argument("--include-low-support", action="store_true")
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("reduce", help="reduce a log against templates")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--templates", required=True)
    p.add_argument("--mode", choices=("ellipsis", "hp"), default="ellipsis")
    p.add_argument("--out", required=True)
    p.add_argument("--counters", default=None,
                   help="write counters JSON here instead of stdout")
    p.add_argument("--engine", choices=("auto", "python", "native"),
                   default="auto")
    p.add_argument("--no-temporal", action="store_true",
                   help="ignore runtime/inter-arrival constraints")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("reconstruct", help="expand a reduced log")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--templates", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--verify-against", default=None,
                   help="original log; exits 4 on retention violation")
    p.add_argument("--synthesize-serials", action="store_true")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("simulate", help="bounded-buffer loss simulation")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--arrivals", help="file with one arrival ns per line")
    src.add_argument("--from-log", help="audit log; arrivals are record times")
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--drain-period", type=int, required=True)
    p.add_argument("--drain-burst", type=int, required=True)
    p.add_argument("--drain-jitter", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", default=None, help="occupancy CSV output")
    p.add_argument("--sample-period", type=int, default=0)
    p.add_argument("--find-min-capacity", action="store_true")
    p.add_argument("--engine", choices=("auto", "python", "native"),
                   default="auto")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="closed-form predictions and checks")
    p.add_argument("--params", required=True)
    p.add_argument("--counters", default=None,
                   help="reduce counters JSON to compare against")
    p.add_argument("--task", default=None,
                   help="params row to compare (default: first)")
    p.add_argument("--mode", choices=("ellipsis", "hp"), default="ellipsis")
    p.add_argument("--tolerance", type=float, default=0.03)
    p.set_defaults(func=_cmd_analyze)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except _INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except RetentionViolation as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
