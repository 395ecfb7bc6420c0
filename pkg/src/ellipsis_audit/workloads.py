"""Synthetic periodic-task audit workloads and anomaly injection.

A workload is a set of tasks.  Each task emits ``f`` initialization
records, then ``iterations`` loop instances at a fixed period (plus
optional uniform start jitter).  Every instance draws one sequence by
probability and spaces its records uniformly over the sequence's
duration.  Sequence entries use template syntax: an argument >= 0 is
emitted verbatim, -1 draws a fresh per-record value, so learned templates
recover exactly the constant slots.

With ``emit_boundary`` on, the task emits its boundary syscall once after
the init phase (the task sleeping until its first period) and once after
every instance, which makes f and the instance count exactly recoverable
from the trace.  With it off the stream mimics a runtime audit ruleset
that does not capture scheduling syscalls: instances run back to back.

Per-task record sizes are tuned by padding the exe path until a typical
serialized record hits ``target_record_bytes`` (0 disables padding).
"""

from __future__ import annotations

import heapq
import importlib.resources
import json
import random
from dataclasses import dataclass

from .records import NS_PER_SEC, AuditRecord, RecordKind, record_size_bytes
from .templates import TemplateEntry

SCHEMA_VERSION = 1

# arm32 numbering, matching arch=40000028 streams
SYS_READ = 3
SYS_WRITE = 4
SYS_CLOSE = 6
SYS_EXECVE = 11
SYS_SELECT = 142
SYS_SCHED_YIELD = 158
SYS_NANOSLEEP = 162
SYS_PREAD64 = 180
SYS_EPOLL_WAIT = 252
SYS_OPENAT = 322

_INIT_SYSCALLS = (SYS_OPENAT, SYS_CLOSE, SYS_EXECVE)
_VARY_LO, _VARY_HI = 0x100000, 0xFFFFFF  # six hex digits, stable record width


class SpecInvalid(ValueError):
    pass


@dataclass(frozen=True)
class SequenceSpec:
    entries: tuple[TemplateEntry, ...]
    probability: float
    duration_ns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise SpecInvalid("sequence needs at least one entry")
        if not 0.0 <= self.probability <= 1.0:
            raise SpecInvalid("sequence probability must lie in [0, 1]")
        if self.duration_ns < 0:
            raise SpecInvalid("sequence duration must be >= 0")


@dataclass(frozen=True)
class TaskSpec:
    comm: str
    pid: int
    tid: int
    sequences: tuple[SequenceSpec, ...]
    iterations: int
    period_ns: int
    f: int = 0
    jitter_ns: int = 0
    boundary_syscall: int = SYS_NANOSLEEP
    emit_boundary: bool = True
    init_spacing_ns: int = 50_000
    target_record_bytes: int = 0
    exe: str = ""
    key: str = "(null)"

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if not self.comm:
            raise SpecInvalid("task needs a comm")
        if not self.sequences:
            raise SpecInvalid("task needs at least one sequence")
        if self.iterations < 0 or self.f < 0:
            raise SpecInvalid("iterations and f must be >= 0")
        if self.period_ns < 1:
            raise SpecInvalid("period must be >= 1 ns")
        if self.init_spacing_ns < 1:
            raise SpecInvalid("init spacing must be >= 1 ns")
        total_p = sum(s.probability for s in self.sequences)
        if abs(total_p - 1.0) > 1e-9:
            raise SpecInvalid(f"sequence probabilities sum to {total_p}, not 1")
        for s in self.sequences:
            if s.duration_ns > self.period_ns:
                raise SpecInvalid("sequence duration exceeds the period")
            if s.duration_ns + self.jitter_ns + 2 > self.period_ns:
                raise SpecInvalid("period too small for duration + jitter")
            if self.emit_boundary and any(
                    e.syscall_no == self.boundary_syscall for e in s.entries):
                raise SpecInvalid("sequence uses the boundary syscall")

    @property
    def expected_events_per_instance(self) -> float:
        return sum(s.probability * len(s.entries) for s in self.sequences)


@dataclass(frozen=True)
class WorkloadSpec:
    tasks: tuple[TaskSpec, ...]
    seed: int = 0
    epoch_ns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise SpecInvalid("workload needs at least one task")
        keys = [(t.pid, t.tid) for t in self.tasks]
        if len(set(keys)) != len(keys):
            raise SpecInvalid("tasks must have distinct (pid, tid)")
        if self.epoch_ns < 0:
            raise SpecInvalid("epoch must be >= 0")


# ---------------------------------------------------------------- json io

def spec_from_dict(data: dict) -> WorkloadSpec:
    try:
        tasks = []
        for td in data["tasks"]:
            seqs = tuple(
                SequenceSpec(
                    entries=tuple(TemplateEntry(*e) for e in sd["entries"]),
                    probability=float(sd["probability"]),
                    duration_ns=int(sd.get("duration_ns", 0)),
                )
                for sd in td["sequences"]
            )
            tasks.append(TaskSpec(
                comm=td["comm"], pid=int(td["pid"]), tid=int(td["tid"]),
                sequences=seqs, iterations=int(td["iterations"]),
                period_ns=int(td["period_ns"]), f=int(td.get("f", 0)),
                jitter_ns=int(td.get("jitter_ns", 0)),
                boundary_syscall=int(td.get("boundary_syscall", SYS_NANOSLEEP)),
                emit_boundary=bool(td.get("emit_boundary", True)),
                init_spacing_ns=int(td.get("init_spacing_ns", 50_000)),
                target_record_bytes=int(td.get("target_record_bytes", 0)),
                exe=str(td.get("exe", "")), key=str(td.get("key", "(null)")),
            ))
        return WorkloadSpec(tasks=tuple(tasks), seed=int(data.get("seed", 0)),
                            epoch_ns=int(data.get("epoch_ns", 0)))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SpecInvalid):
            raise
        raise SpecInvalid(f"bad workload spec: {e}") from e


def spec_to_dict(spec: WorkloadSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION, "seed": spec.seed, "epoch_ns": spec.epoch_ns,
        "tasks": [
            {
                "comm": t.comm, "pid": t.pid, "tid": t.tid, "f": t.f,
                "iterations": t.iterations, "period_ns": t.period_ns,
                "jitter_ns": t.jitter_ns, "boundary_syscall": t.boundary_syscall,
                "emit_boundary": t.emit_boundary,
                "init_spacing_ns": t.init_spacing_ns,
                "target_record_bytes": t.target_record_bytes,
                "exe": t.exe, "key": t.key,
                "sequences": [
                    {"probability": s.probability, "duration_ns": s.duration_ns,
                     "entries": [[e.syscall_no, e.a0, e.a1, e.a2, e.a3]
                                 for e in s.entries]}
                    for s in t.sequences
                ],
            }
            for t in spec.tasks
        ],
    }


def load_spec(path: str) -> WorkloadSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            return spec_from_dict(json.load(fh))
    except FileNotFoundError as e:
        raise SpecInvalid(f"spec file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise SpecInvalid(f"spec is not valid JSON: {e}") from e


def save_spec(spec: WorkloadSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")


def example_spec(name: str) -> WorkloadSpec:
    """Load one of the bundled specs by stem, e.g. "arducopter"."""
    res = importlib.resources.files("ellipsis_audit") / "specs" / f"{name}.json"
    return spec_from_dict(json.loads(res.read_text(encoding="utf-8")))


def list_example_specs() -> list[str]:
    res = importlib.resources.files("ellipsis_audit").joinpath("specs")
    return sorted(p.name[:-5] for p in res.iterdir() if p.name.endswith(".json"))


# -------------------------------------------------------------- generation

def _task_exe(task: TaskSpec, epoch_ns: int) -> str:
    exe = task.exe or f"/opt/rt/bin/{task.comm}"
    if task.target_record_bytes:
        probe = _make_record(task, exe, ts_ns=epoch_ns + task.period_ns,
                             serial=1_000_000, entry=task.sequences[0].entries[0],
                             a_fill=0x800000)
        pad = task.target_record_bytes - record_size_bytes(probe)
        if pad > 0:
            exe = exe + "." + "x" * (pad - 1) if pad > 1 else exe + "x"
    return exe


def _make_record(task: TaskSpec, exe: str, ts_ns: int, serial: int | None,
                 entry: TemplateEntry, a_fill: int | None = None,
                 rng: random.Random | None = None,
                 exit_code: int = 0) -> AuditRecord:
    def arg(c: int):
        if c >= 0:
            return c
        if a_fill is not None:
            return a_fill
        return rng.randint(_VARY_LO, _VARY_HI)

    sec, nanos = divmod(ts_ns, NS_PER_SEC)
    return AuditRecord(
        kind=RecordKind.SYSCALL, ts_sec=sec, ts_nanos=nanos, ts_frac_digits=9,
        serial=serial, arch="40000028", syscall_no=entry.syscall_no,
        per="800000", success=True, exit_code=exit_code,
        a0=arg(entry.a0), a1=arg(entry.a1), a2=arg(entry.a2), a3=arg(entry.a3),
        items=0, ppid=task.pid - 13, pid=task.pid, tid=task.tid,
        auid=1000, uid=0, gid=0, euid=0, suid=0, fsuid=0, egid=0, sgid=0,
        fsgid=0, tty="pts0", ses="1", comm=task.comm, exe=exe, key=task.key,
    )


_BOUNDARY_ENTRY_ARGS = (-1, 0, 0, 0)  # a0 varies like a struct pointer


def _task_stream(task: TaskSpec, seed: int, epoch_ns: int):
    """Yield the task's records in time order (serials assigned at merge)."""
    rng = random.Random(seed)
    exe = _task_exe(task, epoch_ns)
    boundary_entry = TemplateEntry(task.boundary_syscall, *_BOUNDARY_ENTRY_ARGS)

    t = epoch_ns
    for j in range(task.f):
        entry = TemplateEntry(_INIT_SYSCALLS[j % len(_INIT_SYSCALLS)], -1, -1, 0, 0)
        yield _make_record(task, exe, epoch_ns + j * task.init_spacing_ns,
                           None, entry, rng=rng)
    init_end = epoch_ns + task.f * task.init_spacing_ns
    if task.iterations == 0:
        return
    if task.emit_boundary:
        yield _make_record(task, exe, init_end, None, boundary_entry, rng=rng)

    seq_cum = []
    acc = 0.0
    for s in task.sequences:
        acc += s.probability
        seq_cum.append(acc)

    loop_base = init_end + task.period_ns
    for k in range(task.iterations):
        jitter = rng.randint(0, task.jitter_ns) if task.jitter_ns else 0
        start = loop_base + k * task.period_ns + jitter
        x = rng.random()
        si = 0
        while si < len(seq_cum) - 1 and x >= seq_cum[si]:
            si += 1
        seq = task.sequences[si]
        L = len(seq.entries)
        for j, entry in enumerate(seq.entries):
            t = start + (j * seq.duration_ns) // (L - 1) if L > 1 else start
            yield _make_record(task, exe, t, None, entry, rng=rng)
        if task.emit_boundary:
            yield _make_record(task, exe, start + seq.duration_ns + 1, None,
                               boundary_entry, rng=rng)


def generate(spec: WorkloadSpec, seed: int | None = None,
             serial_start: int = 1):
    """Yield the merged multi-task stream, timestamp-sorted, with stream
    serials assigned in merge order.  Deterministic for a given seed."""
    base_seed = spec.seed if seed is None else seed

    def keyed(task: TaskSpec, idx: int):
        # key carries (idx, j) so timestamp ties never compare records
        task_seed = base_seed * 1_000_003 + idx
        for j, r in enumerate(_task_stream(task, task_seed, spec.epoch_ns)):
            yield (r.ts_ns, idx, j), r

    streams = [keyed(task, idx) for idx, task in enumerate(spec.tasks)]
    serial = serial_start
    for _, r in heapq.merge(*streams):
        r.serial = serial
        serial += 1
        yield r


# -------------------------------------------------------------- anomalies

@dataclass(frozen=True)
class AnomalyRecordSpec:
    syscall_no: int
    a0: int = 0
    a1: int = 0
    a2: int = 0
    a3: int = 0
    exit_code: int = 0


@dataclass(frozen=True)
class AnomalySpec:
    """Records to splice into a stream at explicit times.

    Each time in ``times_ns`` starts one burst: the record specs fire
    ``gap_ns`` apart.  Original records are untouched; injected records
    carry their own serial range so the merged stream stays parseable.
    """
    records: tuple[AnomalyRecordSpec, ...]
    times_ns: tuple[int, ...]
    comm: str = "intruder"
    pid: int = 6666
    tid: int = 6666
    exe: str = "/tmp/intruder"
    gap_ns: int = 1_000
    serial_base: int = 9_000_000

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "times_ns", tuple(self.times_ns))
        if not self.records or not self.times_ns:
            raise SpecInvalid("anomaly needs records and times")
        if self.gap_ns < 1:
            raise SpecInvalid("anomaly gap must be >= 1 ns")


def anomaly_records(anomaly: AnomalySpec) -> list[AuditRecord]:
    task = TaskSpec(
        comm=anomaly.comm, pid=anomaly.pid, tid=anomaly.tid,
        sequences=(SequenceSpec(entries=(TemplateEntry(SYS_OPENAT),), probability=1.0),),
        iterations=0, period_ns=1_000_000, exe=anomaly.exe)
    out = []
    serial = anomaly.serial_base
    for t0 in sorted(anomaly.times_ns):
        for j, rs in enumerate(anomaly.records):
            entry = TemplateEntry(rs.syscall_no, rs.a0, rs.a1, rs.a2, rs.a3)
            out.append(_make_record(task, anomaly.exe, t0 + j * anomaly.gap_ns,
                                    serial, entry, exit_code=rs.exit_code,
                                    a_fill=0))
            serial += 1
    return out


def inject(stream, anomaly: AnomalySpec):
    """Merge anomaly records into a timestamp-sorted stream; original
    records keep their bytes, ties favor the original."""
    extra = anomaly_records(anomaly)
    extra.sort(key=lambda r: r.ts_ns)
    it = iter(stream)
    j = 0
    for r in it:
        while j < len(extra) and extra[j].ts_ns < r.ts_ns:
            yield extra[j]
            j += 1
        yield r
    while j < len(extra):
        yield extra[j]
        j += 1
