"""Offline template creation from recorded audit traces.

The pipeline has two passes over a trace.  Pass one segments each task's
records at scheduling-boundary syscalls, groups the resulting loop
instances by syscall shape, induces per-position argument constraints,
and ranks the candidate sequences by how many events templating each one
would save.  Pass two replays the trace against the chosen structural
templates and fits their runtime and inter-arrival bounds under a
configurable policy.

Tasks are independent throughout; statistics never mix across (pid, tid).
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace

from .records import AuditRecord, RecordKind
from .templates import Template, TemplateEntry, TemplateSet, entry_matches

# select, sched_yield, nanosleep, epoll_wait on the 32-bit ARM table
DEFAULT_BOUNDARY_SYSCALLS = frozenset({142, 158, 162, 252})

SCHEMA_VERSION = 1


class NoMatchingInstances(ValueError):
    """A template matched nothing in the profiling trace."""


@dataclass(slots=True)
class TaskSegments:
    """One task's trace split at boundary records.

    ``instances`` holds every boundary-closed run in order; boundary
    records belong to no run.  ``trailing`` is the unterminated run at
    the end of the trace, kept apart because it is partial: it never
    enters statistics.  A task that never hits a boundary cannot be
    segmented, so everything lands in ``trailing``.

    The records before the task's first boundary are its one-time startup
    phase.  Segmentation keeps that run in ``instances`` (it is a closed
    run like any other) and flags it; the statistics layer reads the
    startup count through ``f`` and iterates loop instances through
    ``loop_instances``.
    """
    pid: int
    tid: int
    comm: str
    instances: list[list[AuditRecord]] = field(default_factory=list)
    trailing: list[AuditRecord] = field(default_factory=list)
    saw_boundary: bool = False
    first_run_is_init: bool = False

    @property
    def f(self) -> int:
        return len(self.instances[0]) if self.first_run_is_init else 0

    @property
    def loop_instances(self) -> list[list[AuditRecord]]:
        return self.instances[1:] if self.first_run_is_init else self.instances


def segment_trace(records, boundary_syscalls=DEFAULT_BOUNDARY_SYSCALLS
                  ) -> dict[tuple[int, int], TaskSegments]:
    """Split per-task record streams at boundary syscalls.

    Only syscall records participate; tasks appear in first-seen order.
    Empty runs (consecutive boundaries) are dropped.
    """
    boundary = frozenset(boundary_syscalls)
    out: dict[tuple[int, int], TaskSegments] = {}
    open_runs: dict[tuple[int, int], list[AuditRecord]] = {}
    for r in records:
        if r.kind is not RecordKind.SYSCALL:
            continue
        key = r.task_key
        seg = out.get(key)
        if seg is None:
            seg = TaskSegments(pid=r.pid or 0, tid=r.tid or 0, comm=r.comm or "")
            out[key] = seg
            open_runs[key] = []
        if r.comm:
            seg.comm = r.comm
        run = open_runs[key]
        if r.syscall_no in boundary:
            if run:
                if not seg.saw_boundary:
                    seg.first_run_is_init = True
                seg.instances.append(run)
            seg.saw_boundary = True
            open_runs[key] = []
        else:
            run.append(r)
    for key, run in open_runs.items():
        out[key].trailing = run
    return out


def induce_arguments(instances: list[list[AuditRecord]]) -> list[TemplateEntry]:
    """Positionwise constraint induction over instances of one shape.

    An argument slot that holds the same integer in every instance keeps
    it; a varying, absent, or unparseable slot becomes a wildcard.
    Idempotent and order-insensitive by construction.
    """
    if not instances:
        raise ValueError("induce_arguments needs at least one instance")
    length = len(instances[0])
    for run in instances:
        if len(run) != length or any(
                a.syscall_no != b.syscall_no for a, b in zip(run, instances[0])):
            raise ValueError("instances must share one syscall shape")
    entries = []
    for pos in range(length):
        slots = []
        for name in ("a0", "a1", "a2", "a3"):
            vals = {getattr(run[pos], name) for run in instances}
            v = vals.pop() if len(vals) == 1 else None
            slots.append(v if isinstance(v, int) else -1)
        entries.append(TemplateEntry(instances[0][pos].syscall_no, *slots))
    return entries


@dataclass(slots=True)
class SequenceStats:
    """One candidate sequence of a task, with its observed samples."""
    sequence: tuple[TemplateEntry, ...]
    count: int
    probability: float
    durations_ns: list[int]
    interarrivals_ns: list[int]

    @property
    def length(self) -> int:
        return len(self.sequence)

    @property
    def low_support(self) -> bool:
        return self.count < 2

    @property
    def score(self) -> float:
        """Expected events saved per loop iteration by templating this
        sequence: probability * (length - 1)."""
        return self.probability * (self.length - 1)

    def to_dict(self) -> dict:
        return {"sequence": [e.to_text() for e in self.sequence],
                "count": self.count, "probability": self.probability,
                "length": self.length, "low_support": self.low_support}


def sequence_stats(instances: list[list[AuditRecord]]) -> list[SequenceStats]:
    """Group one task's complete instances by syscall shape, induce the
    argument constraints per group, and attach duration and inter-arrival
    samples.  Probabilities are counts over all complete instances."""
    groups: dict[tuple[int, ...], list[list[AuditRecord]]] = {}
    for run in instances:
        groups.setdefault(tuple(r.syscall_no for r in run), []).append(run)
    total = len(instances)
    out = []
    for runs in groups.values():
        starts = [run[0].ts_ns for run in runs]
        out.append(SequenceStats(
            sequence=tuple(induce_arguments(runs)),
            count=len(runs),
            probability=len(runs) / total,
            durations_ns=[run[-1].ts_ns - run[0].ts_ns for run in runs],
            interarrivals_ns=[b - a for a, b in zip(starts, starts[1:])],
        ))
    return out


def select_top_n(stats: list[SequenceStats], n: int,
                 include_low_support: bool = False) -> list[SequenceStats]:
    """Pick the n sequences that save the most events per iteration.

    Ties prefer longer sequences, then the lexicographically smaller
    entry list.  Sequences seen only once are skipped unless asked for.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    pool = [s for s in stats if include_low_support or not s.low_support]
    pool.sort(key=lambda s: (-s.score, -s.length,
                             tuple((e.syscall_no, *e.args) for e in s.sequence)))
    return pool[:n]


@dataclass(frozen=True, slots=True)
class TemporalPolicy:
    """Rule turning observed samples into a temporal bound.

    ``none`` disables the bound (0), ``max`` takes the sample maximum,
    ``musigma`` takes ceil(mean + k * population sigma).
    """
    kind: str = "max"
    k: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "max", "musigma"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not math.isfinite(self.k) or self.k < 0:
            raise ValueError("k must be finite and >= 0")

    @classmethod
    def none(cls) -> "TemporalPolicy":
        return cls("none")

    @classmethod
    def max_observed(cls) -> "TemporalPolicy":
        return cls("max")

    @classmethod
    def mean_plus_sigma(cls, k: float = 4.0) -> "TemporalPolicy":
        return cls("musigma", float(k))

    @classmethod
    def parse(cls, text: str) -> "TemporalPolicy":
        """Accepts "none", "max", "musigma" or "musigma:K"."""
        body, _, arg = text.partition(":")
        if body == "musigma":
            return cls.mean_plus_sigma(float(arg) if arg else 4.0)
        if arg:
            raise ValueError(f"policy {body!r} takes no argument")
        return cls(body)

    def bound(self, samples: list[int]) -> int:
        if self.kind == "none" or not samples:
            return 0
        if self.kind == "max":
            return max(samples)
        return math.ceil(statistics.fmean(samples)
                         + self.k * statistics.pstdev(samples))


def _match_run(run: list[AuditRecord], candidates: list[Template]) -> Template | None:
    for t in candidates:
        if len(t.entries) == len(run) and all(
                entry_matches(e, r) for e, r in zip(t.entries, run)):
            return t
    return None


def _rebind(template_set: TemplateSet, new_by_name: dict) -> TemplateSet:
    out = TemplateSet()
    for comm, pid, tid, tlist in template_set.bindings():
        for t in tlist:
            out.add(new_by_name[t.name], comm=comm, pid=pid, tid=tid)
    return out


def _profile_segments(segments: dict[tuple[int, int], TaskSegments],
                      template_set: TemplateSet,
                      policy: TemporalPolicy) -> TemplateSet:
    durations: dict[str, list[int]] = {n: [] for n in template_set.names()}
    gaps: dict[str, list[int]] = {n: [] for n in template_set.names()}
    for seg in segments.values():
        candidates = template_set.for_task(seg.pid, seg.tid, seg.comm)
        if not candidates:
            continue
        last_start: dict[str, int] = {}
        for run in seg.loop_instances:
            t = _match_run(run, candidates)
            if t is None:
                continue
            start = run[0].ts_ns
            durations[t.name].append(run[-1].ts_ns - start)
            if t.name in last_start:
                gaps[t.name].append(start - last_start[t.name])
            last_start[t.name] = start
    new_by_name = {}
    for t in template_set:
        if not durations[t.name]:
            raise NoMatchingInstances(t.name)
        new_by_name[t.name] = replace(
            t, expected_runtime_ns=policy.bound(durations[t.name]),
            expected_interarrival_ns=policy.bound(gaps[t.name]))
    return _rebind(template_set, new_by_name)


def temporal_profile(records, template_set: TemplateSet,
                     policy: TemporalPolicy = TemporalPolicy.max_observed(),
                     boundary_syscalls=DEFAULT_BOUNDARY_SYSCALLS) -> TemplateSet:
    """Refit every template's runtime and inter-arrival bounds from a
    trace.

    Runtime samples are last-minus-first timestamps of the instances each
    template matches; inter-arrival samples are gaps between successive
    matching-instance starts within a task.  A template that matches no
    instance raises NoMatchingInstances.  Policy ``none`` skips the scan
    and zeroes both bounds.
    """
    if policy.kind == "none":
        return _rebind(template_set, {
            t.name: replace(t, expected_runtime_ns=0, expected_interarrival_ns=0)
            for t in template_set})
    return _profile_segments(segment_trace(records, boundary_syscalls),
                             template_set, policy)


def learn_templates(records, top_n: int = 1,
                    policy: TemporalPolicy = TemporalPolicy.max_observed(),
                    boundary_syscalls=DEFAULT_BOUNDARY_SYSCALLS,
                    include_low_support: bool = False
                    ) -> tuple[TemplateSet, dict]:
    """Run the whole pipeline on one trace.

    Returns the learned TemplateSet plus a per-task stats report carrying
    N (distinct sequences), I (complete instances), f, and the per
    sequence lengths and probabilities.  Template names derive from the
    task comm; a second task with the same comm falls back to
    comm-pid-tid names and (pid, tid) binding.
    """
    segments = segment_trace(records, boundary_syscalls)
    comm_seen: dict[str, int] = {}
    for seg in segments.values():
        comm_seen[seg.comm] = comm_seen.get(seg.comm, 0) + 1

    tset = TemplateSet()
    report_tasks = []
    for seg in segments.values():
        stats = sequence_stats(seg.loop_instances)
        chosen = select_top_n(stats, top_n, include_low_support)
        unique_comm = comm_seen[seg.comm] == 1 and seg.comm
        base = seg.comm if unique_comm else f"{seg.comm}-{seg.pid}-{seg.tid}"
        names = []
        for i, s in enumerate(chosen):
            name = base if i == 0 else f"{base}.{i + 1}"
            names.append(name)
            if unique_comm:
                tset.add(Template(name=name, entries=s.sequence), comm=seg.comm)
            else:
                tset.add(Template(name=name, entries=s.sequence),
                         pid=seg.pid, tid=seg.tid)
        selected = {id(s) for s in chosen}
        report_tasks.append({
            "task": seg.comm, "pid": seg.pid, "tid": seg.tid,
            "N": len(stats), "I": len(seg.loop_instances), "f": seg.f,
            "len": [s.length for s in stats],
            "p": [s.probability for s in stats],
            "sequences": [dict(s.to_dict(), selected=id(s) in selected)
                          for s in stats],
            "templates": names,
        })

    if policy.kind == "none":
        learned = _rebind(tset, {
            t.name: replace(t, expected_runtime_ns=0, expected_interarrival_ns=0)
            for t in tset})
    elif len(tset):
        learned = _profile_segments(segments, tset, policy)
    else:
        learned = tset
    report = {"schema_version": SCHEMA_VERSION,
              "policy": {"kind": policy.kind, "k": policy.k},
              "tasks": report_tasks}
    return learned, report
