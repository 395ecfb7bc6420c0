#!/usr/bin/env python3
"""Throughput comparison of the pure-Python and compiled matching kernels.

Generates a seeded flight-controller-style workload in memory, then times
the stream reducer (both modes) and the buffer simulator under each
available engine.  Rates are end-to-end events per second, best of
--repeat runs.
"""

import argparse
import time
from dataclasses import replace

from ellipsis_audit.buffer_sim import BufferConfig, simulate
from ellipsis_audit.reduction import native_available, reduce_stream
from ellipsis_audit.templates import Template, TemplateSet
from ellipsis_audit.workloads import WorkloadSpec, example_spec, generate


def build_workload(iterations: int, seed: int):
    spec = example_spec("arducopter")
    task = replace(spec.tasks[0], iterations=iterations, emit_boundary=False)
    w = WorkloadSpec(tasks=(task,), seed=seed, epoch_ns=spec.epoch_ns)
    top = task.sequences[0]
    tset = TemplateSet()
    tset.add(Template(name="arducopter", entries=top.entries,
                      expected_runtime_ns=top.duration_ns,
                      expected_interarrival_ns=task.period_ns))
    return list(generate(w)), tset


def best_of(repeat, fn):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, default=10_000,
                    help="loop instances to generate (default 10000)")
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"building workload: {args.iterations} instances, seed {args.seed}")
    records, tset = build_workload(args.iterations, args.seed)
    arrivals = [r.ts_ns for r in records]
    print(f"{len(records)} records\n")

    engines = ["python"]
    if native_available():
        engines.append("native")
    else:
        print("compiled extension not importable; timing pure Python only\n")

    baselines = {}
    print(f"{'benchmark':<22} {'engine':<8} {'best':>9} {'rate':>16}")
    for mode in ("ellipsis", "hp"):
        for engine in engines:
            dt = best_of(args.repeat,
                         lambda: reduce_stream(iter(records), tset, mode=mode,
                                               engine=engine))
            rate = len(records) / dt
            key = f"reduce --mode {mode}"
            speedup = ""
            if engine == "python":
                baselines[key] = dt
            else:
                speedup = f"  ({baselines[key] / dt:.2f}x vs python)"
            print(f"{key:<22} {engine:<8} {dt:>8.3f}s {rate:>11,.0f} ev/s"
                  + speedup)

    cfg = BufferConfig(capacity=8192, drain_period_ns=2_000_000, drain_burst=8)
    for engine in engines:
        dt = best_of(args.repeat, lambda: simulate(arrivals, cfg,
                                                   engine=engine))
        rate = len(arrivals) / dt
        speedup = ""
        if engine == "python":
            baselines["simulate"] = dt
        else:
            speedup = f"  ({baselines['simulate'] / dt:.2f}x vs python)"
        print(f"{'simulate':<22} {engine:<8} {dt:>8.3f}s {rate:>11,.0f} ev/s"
              + speedup)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
