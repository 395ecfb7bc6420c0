"""Acceptance gate: nine end-to-end criteria, one test and one printed
PASS/FAIL line each (run with ``pytest -s`` to see them).

Each test states its claim, runs at the stated scale, and asserts its
wall-clock budget.  Everything is seeded; there is no network or
machine-speed dependence beyond the budgets.
"""

import random
import time
from contextlib import contextmanager
from dataclasses import replace
from importlib.resources import files

from ellipsis_audit import buffer_sim, formulas
from ellipsis_audit.formulas import TaskParams
from ellipsis_audit.learning import TemporalPolicy, learn_templates
from ellipsis_audit.records import RecordKind, serialize_record
from ellipsis_audit.reconstruction import verify_retention
from ellipsis_audit.reduction import reduce_stream
from ellipsis_audit.templates import Template, TemplateEntry, TemplateSet, memory_cost
from ellipsis_audit.workloads import (AnomalyRecordSpec, AnomalySpec,
                                      SequenceSpec, TaskSpec, WorkloadSpec,
                                      example_spec, generate, inject)

PARAMS_PATH = files("ellipsis_audit") / "specs" / "case-study-params.json"


@contextmanager
def criterion(num: int, title: str, budget_s: float | None = None):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {num}: {title}")
        raise
    dt = time.perf_counter() - t0
    if budget_s is not None and dt > budget_s:
        print(f"[FAIL] criterion {num}: {title} ({dt:.1f}s > {budget_s:.0f}s)")
        raise AssertionError(
            f"criterion {num} exceeded its {budget_s:.0f}s budget: {dt:.1f}s")
    timing = f" ({dt:.1f}s)" if budget_s is not None else ""
    print(f"[PASS] criterion {num}: {title}{timing}")


def _close(a: float, b: float, rel: float = 1e-6) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def test_c1_template_memory():
    with criterion(1, "three case-study templates cost 2084 bytes"):
        tpls = []
        for name in ("arducopter", "ap-rcin", "ap-spi-0"):
            seq = example_spec(name).tasks[0].sequences[0]
            tpls.append(Template(name=name, entries=seq.entries))
        assert [len(t) for t in tpls] == [14, 16, 1]
        assert memory_cost(tpls) == 2084  # 116*3 + 56*31, under 2 KB


def test_c2_formula_oracles_and_identities():
    with criterion(2, "closed forms hit the case-study values and the "
                      "reduction identities hold on 1000 random params",
                   budget_s=1.0):
        rows = {tp.name: tp for tp in formulas.load_params(str(PARAMS_PATH))}
        ardu = rows["arducopter"]
        assert _close(formulas.events_audit(ardu), 2091)
        # 100*(0.95 + (0.02*15 + 0.01*17 + 0.01*17 + 0.01*18)) + 679
        assert _close(formulas.events_ellipsis(ardu), 856)
        assert _close(formulas.events_hp_best(ardu), 762)
        assert _close(formulas.log_size_audit(ardu), 1_101_957)
        assert _close(formulas.log_size_ellipsis(ardu), 433_632)
        rcin = rows["ap-rcin"]
        assert _close(formulas.events_audit(rcin), 2914)
        assert _close(formulas.events_ellipsis(rcin), 184)
        assert _close(formulas.events_hp_best(rcin), 3)

        rng = random.Random(4242)
        for _ in range(1000):
            N = rng.randint(1, 6)
            lengths = tuple(rng.randint(1, 40) for _ in range(N))
            raw = [rng.random() + 1e-9 for _ in range(N)]
            s = sum(raw)
            p = [x / s for x in raw]
            p[-1] = max(0.0, 1.0 - sum(p[:-1]))
            tp = TaskParams(N=N, I=rng.randint(0, 10**6), lengths=lengths,
                            p=tuple(p), f=rng.uniform(0, 2000),
                            n=rng.randint(0, N))
            # 1e-6 relative to the operands, not to the (possibly ~0) gap
            e_a, e_e = formulas.events_audit(tp), formulas.events_ellipsis(tp)
            assert abs(formulas.event_reduction(tp) - (e_a - e_e)) \
                <= 1e-6 * max(1.0, e_a, e_e)
            l_a = formulas.log_size_audit(tp)
            l_e = formulas.log_size_ellipsis(tp)
            assert abs(formulas.size_reduction(tp) - (l_a - l_e)) \
                <= 1e-6 * max(1.0, l_a, l_e)


def _arducopter_workload(iterations: int, seed: int) -> tuple[WorkloadSpec,
                                                              TemplateSet]:
    spec = example_spec("arducopter")
    task = replace(spec.tasks[0], iterations=iterations, emit_boundary=False)
    w = WorkloadSpec(tasks=(task,), seed=seed, epoch_ns=spec.epoch_ns)
    top = task.sequences[0]
    tset = TemplateSet()
    tset.add(Template(name="arducopter", entries=top.entries,
                      expected_runtime_ns=top.duration_ns,
                      expected_interarrival_ns=task.period_ns))
    return w, tset


def test_c3_end_to_end_reduction_ratio():
    with criterion(3, "I=100000 flight-controller stream shrinks >=78% "
                      "(base) and >=90% (aggregating)", budget_s=60.0):
        w, tset = _arducopter_workload(iterations=100_000, seed=13)
        reductions = {}
        for mode in ("ellipsis", "hp"):
            c = reduce_stream(generate(w), tset, mode=mode).counters
            assert c.failures == 0
            reductions[mode] = 1.0 - c.bytes_out / c.bytes_in
        assert reductions["ellipsis"] >= 0.78, reductions
        assert reductions["hp"] >= 0.90, reductions


def test_c4_hp_best_case():
    with criterion(4, "single-sequence I=100000 stream folds to one "
                      "aggregate record plus the init records",
                   budget_s=30.0):
        task = TaskSpec(
            comm="steady", pid=820, tid=820,
            sequences=(SequenceSpec(entries=(TemplateEntry(4, 3, -1, 1, -1),
                                             TemplateEntry(4, 4, -1, 1, -1),
                                             TemplateEntry(3, 5, -1, 16, -1)),
                                    probability=1.0, duration_ns=400_000),),
            iterations=100_000, period_ns=2_000_000, f=3, emit_boundary=False)
        w = WorkloadSpec(tasks=(task,), seed=19)
        tset = TemplateSet()
        tset.add(Template(name="steady", entries=task.sequences[0].entries))
        result = reduce_stream(generate(w), tset, mode="hp",
                               enforce_temporal=False)
        out = list(result.records())
        assert len(out) == 4
        assert [r.kind for r in out[:3]] == [RecordKind.SYSCALL] * 3
        assert out[3].kind is RecordKind.TEMPLATE_MATCH
        assert out[3].rep == 100_000
        assert result.counters.matches == 100_000


def test_c5_nr_worst_case():
    with criterion(5, "a template that fails at its final entry leaves "
                      "the stream byte-identical"):
        task = TaskSpec(
            comm="steady", pid=821, tid=821,
            sequences=(SequenceSpec(entries=(TemplateEntry(4, 3, -1, 1, -1),
                                             TemplateEntry(4, 4, -1, 1, -1),
                                             TemplateEntry(3, 5, -1, 16, -1)),
                                    probability=1.0, duration_ns=400_000),),
            iterations=1000, period_ns=2_000_000, f=3, emit_boundary=False)
        recs = list(generate(WorkloadSpec(tasks=(task,), seed=31)))
        tset = TemplateSet()
        tset.add(Template(name="steady",
                          entries=(TemplateEntry(4, 3, -1, 1, -1),
                                   TemplateEntry(4, 4, -1, 1, -1),
                                   TemplateEntry(3, 99, -1, 16, -1))))
        result = reduce_stream(iter(recs), tset, mode="ellipsis")
        in_lines = [serialize_record(r) for r in recs]
        out_lines = [serialize_record(r) for r in result.records()]
        assert out_lines == in_lines
        assert result.counters.matches == 0


def _random_workload(rng: random.Random, tag: int
                     ) -> tuple[WorkloadSpec, TemplateSet, AnomalySpec]:
    pool = (3, 4, 6, 11, 180, 322)
    period = 2_000_000
    tasks = []
    tset = TemplateSet()
    for j in range(rng.randint(1, 3)):
        seqs = []
        raw = [rng.random() + 0.05 for _ in range(rng.randint(1, 3))]
        total = sum(raw)
        probs = [x / total for x in raw]
        probs[-1] = max(0.0, 1.0 - sum(probs[:-1]))
        for p in probs:
            entries = tuple(
                TemplateEntry(rng.choice(pool),
                              *(rng.choice((-1, rng.randint(0, 40)))
                                for _ in range(4)))
                for _ in range(rng.randint(1, 6)))
            seqs.append(SequenceSpec(entries=entries, probability=p,
                                     duration_ns=rng.randrange(0, period // 2)))
        task = TaskSpec(comm=f"rnd{tag}-{j}", pid=700 + j, tid=700 + j,
                        sequences=tuple(seqs),
                        iterations=rng.randint(20, 60),
                        period_ns=period, f=rng.randint(0, 5),
                        jitter_ns=rng.choice((0, 100_000)),
                        emit_boundary=rng.random() < 0.5)
        tasks.append(task)
        best = max(task.sequences,
                   key=lambda s: (s.probability * (len(s.entries) - 1),
                                  len(s.entries)))
        tset.add(Template(name=f"tpl{tag}-{j}", entries=best.entries),
                 comm=task.comm)
    horizon = period * 70
    anomaly = AnomalySpec(
        records=tuple(AnomalyRecordSpec(rng.choice(pool),
                                        a0=rng.randint(0, 99),
                                        exit_code=rng.choice((0, -13)))
                      for _ in range(rng.randint(1, 3))),
        times_ns=tuple(sorted(rng.randrange(0, horizon)
                              for _ in range(rng.randint(2, 4)))))
    return WorkloadSpec(tasks=tuple(tasks), seed=rng.randrange(2**32)), \
        tset, anomaly


def test_c6_retention_round_trip():
    with criterion(6, "100 random mixed workloads with injected anomalies "
                      "survive reduce->reconstruct retention checks",
                   budget_s=120.0):
        for i in range(100):
            rng = random.Random(1000 + i)
            w, tset, anomaly = _random_workload(rng, i)
            orig = list(inject(generate(w), anomaly))
            mode = "hp" if i % 2 else "ellipsis"
            result = reduce_stream(iter(orig), tset, mode=mode)
            report = verify_retention(orig, result.records(), tset)
            assert report.events == len(orig)


def test_c7_buffer_dynamics():
    with criterion(7, "drain rate between raw and reduced arrival rates "
                      "loses raw events only; reduced stream stays under "
                      "2% of a 50k buffer", budget_s=30.0):
        w, tset = _arducopter_workload(iterations=4000, seed=17)
        raw_arrivals = [r.ts_ns for r in generate(w)]
        reduced_arrivals = [
            r.ts_ns for r in reduce_stream(generate(w), tset,
                                           mode="ellipsis").records()]
        # 8 messages per 2 ms = 4000/s, between ~708/s reduced and
        # ~5670/s raw offered rates
        kernel_cfg = buffer_sim.BufferConfig(capacity=8192,
                                             drain_period_ns=2_000_000,
                                             drain_burst=8)
        raw_sim = buffer_sim.simulate(raw_arrivals, kernel_cfg)
        reduced_sim = buffer_sim.simulate(reduced_arrivals, kernel_cfg)
        assert raw_sim.lost_events > 0
        assert reduced_sim.lost_events == 0

        wide_cfg = replace(kernel_cfg, capacity=50_000)
        wide = buffer_sim.simulate(reduced_arrivals, wide_cfg)
        assert wide.lost_events == 0
        assert wide.max_occupancy <= 0.02 * 50_000

        need_reduced = buffer_sim.min_capacity_for_lossless(reduced_arrivals,
                                                            kernel_cfg)
        need_raw = buffer_sim.min_capacity_for_lossless(raw_arrivals,
                                                        kernel_cfg)
        assert need_reduced < need_raw


def _chain_workload(length: int, final_a0: int | None = None
                    ) -> tuple[WorkloadSpec, TemplateSet]:
    entries = tuple(TemplateEntry(4, pos + 1, -1, 1, -1)
                    for pos in range(length))
    task = TaskSpec(comm="chain", pid=830, tid=830,
                    sequences=(SequenceSpec(entries=entries, probability=1.0,
                                            duration_ns=1_000_000),),
                    iterations=40, period_ns=2_500_000, f=0,
                    emit_boundary=False)
    tpl_entries = entries
    if final_a0 is not None:
        tpl_entries = entries[:-1] + (TemplateEntry(4, final_a0, -1, 1, -1),)
    tset = TemplateSet()
    tset.add(Template(name="chain", entries=tpl_entries))
    return WorkloadSpec(tasks=(task,), seed=37), tset


def test_c8_constant_matching_work():
    with criterion(8, "per-event comparison bound is flat across template "
                      "lengths 10..300, matching and worst case alike"):
        lengths = (10, 50, 100, 200, 300)
        matching, worst = [], []
        for L in lengths:
            w, tset = _chain_workload(L)
            c = reduce_stream(generate(w), tset, mode="ellipsis").counters
            assert c.matches == 40
            matching.append(c.max_comparisons_per_step)

            w, tset = _chain_workload(L, final_a0=10**6)
            c = reduce_stream(generate(w), tset, mode="ellipsis").counters
            assert c.matches == 0
            worst.append(c.max_comparisons_per_step)
        assert matching == [1] * len(lengths)
        assert worst == [2] * len(lengths)


def _policy_workload(durations, probs, iterations, seed) -> WorkloadSpec:
    entries = (TemplateEntry(4, 3, -1, 1, -1),
               TemplateEntry(4, 4, -1, 1, -1),
               TemplateEntry(3, 5, -1, 16, -1))
    seqs = tuple(SequenceSpec(entries=entries, probability=p, duration_ns=d)
                 for d, p in zip(durations, probs))
    task = TaskSpec(comm="policy", pid=810, tid=810, sequences=seqs,
                    iterations=iterations, period_ns=4_000_000, f=3)
    return WorkloadSpec(tasks=(task,), seed=seed)


def _bytes_per_policy(trace, policies) -> dict[str, int]:
    out = {}
    for text in policies:
        tset, _ = learn_templates(iter(trace),
                                  policy=TemporalPolicy.parse(text))
        c = reduce_stream(iter(trace), tset, mode="ellipsis").counters
        out[text] = c.bytes_out
    return out


def test_c9_temporal_policy_ordering():
    with criterion(9, "reduced size is nondecreasing as the runtime policy "
                      "tightens, and none==max on constant durations",
                   budget_s=60.0):
        # one sequence shape at three speeds: 1.0 ms (95%), 1.5 ms (3%),
        # 3.0 ms (2%); mean+1*sigma ~= 1.35 ms cuts both slow modes,
        # mean+4*sigma ~= 2.22 ms cuts only the slowest
        w = _policy_workload((1_000_000, 1_500_000, 3_000_000),
                             (0.95, 0.03, 0.02), iterations=5000, seed=23)
        trace = list(generate(w))
        sizes = _bytes_per_policy(
            trace, ("none", "max", "musigma:4", "musigma:1"))
        assert sizes["none"] == sizes["max"]
        assert sizes["max"] <= sizes["musigma:4"] <= sizes["musigma:1"]
        assert sizes["max"] < sizes["musigma:4"] < sizes["musigma:1"]

        const = _policy_workload((1_000_000,), (1.0,), iterations=500,
                                 seed=24)
        const_trace = list(generate(const))
        const_sizes = _bytes_per_policy(
            const_trace, ("none", "max", "musigma:4", "musigma:1"))
        assert len(set(const_sizes.values())) == 1
