"""Online per-task reduction of audit streams against loaded templates.

Templates compile into a prefix-tree automaton per task.  Each incoming
syscall record either advances the task's automaton (and is buffered) or
fails it (buffered records flush as raw output, then the record gets one
re-attempt from the root).  A completed instance that satisfies the
template's runtime constraint is replaced by a single template-match
record; in consecutive-aggregation mode ("hp") back-to-back instances of
the same template fold into one record with a repetition count, gated by
the inter-arrival constraint between successive instance starts
(inclusive).  Base mode enforces the runtime constraint only.

Per-task emission order always equals coverage order: any raw emission or
new aggregate first closes the open aggregate, so a reconstructed stream
aligns with the original task stream position by position.
"""

from __future__ import annotations

import os
from array import array
from dataclasses import dataclass, field

from .records import NS_PER_SEC, AuditRecord, RecordKind, record_size_bytes
from .templates import DuplicateName, Template, TemplateSet, entry_matches


class PrefixConflict(ValueError):
    """One template is a (possibly equal) prefix of another; the accept
    state would be ambiguous."""


class OutOfOrderTimestamp(ValueError):
    """A task's records must carry nondecreasing timestamps."""


class EngineUnavailable(RuntimeError):
    pass


@dataclass(slots=True)
class Emission:
    record: AuditRecord
    is_match: bool


class _Node:
    __slots__ = ("children", "accept", "depth", "names")

    def __init__(self, depth: int):
        self.children: list[tuple] = []  # [(TemplateEntry, _Node)], insertion order
        self.accept: Template | None = None
        self.depth = depth
        self.names: set[str] = set()


class Automaton:
    """Prefix tree over template entries; children resolve in template
    insertion order, first match wins."""

    def __init__(self, root: _Node, templates: list[Template]):
        self.root = root
        self.templates = templates
        self._flat = None
        self._flat_built = False

    def flatten(self):
        """Arrays for the native stepper; None when a constraint exceeds
        the native int64 range (pure engine handles those)."""
        if self._flat_built:
            return self._flat
        self._flat_built = True
        nodes: list[_Node] = []
        index: dict[int, int] = {}
        stack = [self.root]
        while stack:
            n = stack.pop()
            index[id(n)] = len(nodes)
            nodes.append(n)
            for _, c in reversed(n.children):
                stack.append(c)
        nd_start, nd_count, nd_accept = array("q"), array("q"), array("q")
        ch_sys, ch_a0, ch_a1, ch_a2, ch_a3, ch_next = (array("q") for _ in range(6))
        t_index = {t.name: i for i, t in enumerate(self.templates)}
        for n in nodes:
            nd_start.append(len(ch_sys))
            nd_count.append(len(n.children))
            nd_accept.append(t_index[n.accept.name] if n.accept is not None else -1)
            for entry, child in n.children:
                for v in (entry.syscall_no, entry.a0, entry.a1, entry.a2, entry.a3):
                    if v >= 2 ** 63:
                        self._flat = None
                        return None
                ch_sys.append(entry.syscall_no)
                ch_a0.append(entry.a0)
                ch_a1.append(entry.a1)
                ch_a2.append(entry.a2)
                ch_a3.append(entry.a3)
                ch_next.append(index[id(child)])
        t_rt = array("q", (t.expected_runtime_ns for t in self.templates))
        t_ia = array("q", (t.expected_interarrival_ns for t in self.templates))
        t_len = array("q", (len(t) for t in self.templates))
        self._flat = {
            "nd_start": nd_start, "nd_count": nd_count, "nd_accept": nd_accept,
            "ch_sys": ch_sys, "ch_a0": ch_a0, "ch_a1": ch_a1, "ch_a2": ch_a2,
            "ch_a3": ch_a3, "ch_next": ch_next,
            "t_rt": t_rt, "t_ia": t_ia, "t_len": t_len,
        }
        return self._flat


def build_automaton(templates) -> Automaton:
    """Compile templates into one prefix tree.

    Raises DuplicateName for repeated names and PrefixConflict when any
    template's entry list is a prefix of (or equal to) another's.
    """
    tpls = list(templates)
    seen: set[str] = set()
    for t in tpls:
        if t.name in seen:
            raise DuplicateName(t.name)
        seen.add(t.name)
    root = _Node(0)
    for t in tpls:
        node = root
        node.names.add(t.name)
        for i, entry in enumerate(t.entries):
            if node.accept is not None:
                raise PrefixConflict(
                    f"{node.accept.name!r} is a prefix of {t.name!r}")
            nxt = None
            for e, child in node.children:
                if e == entry:
                    nxt = child
                    break
            if nxt is None:
                nxt = _Node(i + 1)
                node.children.append((entry, nxt))
            nxt.names.add(t.name)
            node = nxt
        if node.accept is not None:
            raise PrefixConflict(
                f"{t.name!r} duplicates the entry list of {node.accept.name!r}")
        if node.children:
            longer = sorted(node.names - {t.name})
            raise PrefixConflict(f"{t.name!r} is a prefix of {longer}")
        node.accept = t
    return Automaton(root, tpls)


def make_template_record(template: Template, rep: int, stime: int, etime: int,
                         head: AuditRecord, now_ns: int) -> AuditRecord:
    """One reduced record standing for ``rep`` instances; metadata comes
    from the first covered record, the prefix timestamp is the emission
    time, and the serial stays unassigned until the output stream is
    assembled."""
    sec, nanos = divmod(now_ns, NS_PER_SEC)
    return AuditRecord(
        kind=RecordKind.TEMPLATE_MATCH, ts_sec=sec, ts_nanos=nanos,
        ts_frac_digits=9, serial=None, rtype="SYSCALL",
        arch=head.arch, per=head.per,
        template_name=template.name, rep=rep, stime=stime, etime=etime,
        ppid=head.ppid, pid=head.pid, tid=head.tid, auid=head.auid,
        uid=head.uid, gid=head.gid, euid=head.euid, suid=head.suid,
        fsuid=head.fsuid, egid=head.egid, sgid=head.sgid, fsgid=head.fsgid,
        tty=head.tty, ses=head.ses,
        comm=head.comm, comm_quoted=head.comm_quoted,
        exe=head.exe, exe_quoted=head.exe_quoted, key=head.key,
    )


@dataclass(slots=True)
class _HpState:
    template: Template
    rep: int
    stime: int
    etime: int
    head: AuditRecord
    last_start: int


@dataclass
class ReduceCounters:
    events_in: int = 0
    events_out: int = 0
    bytes_in: int = 0
    bytes_out: int = 0
    matches: int = 0
    failures: int = 0
    comparisons_total: int = 0
    max_comparisons_per_step: int = 0

    def to_dict(self) -> dict:
        return {"events_in": self.events_in, "events_out": self.events_out,
                "bytes_in": self.bytes_in, "bytes_out": self.bytes_out,
                "matches": self.matches, "failures": self.failures,
                "comparisons_total": self.comparisons_total,
                "max_comparisons_per_step": self.max_comparisons_per_step}


class TaskReducer:
    """Reference stepper for one task's record stream.

    ``step`` consumes one syscall record and returns the emissions it
    triggered (usually none while an instance is in flight); ``finish``
    drains the open aggregate and any partial instance at end of stream.
    """

    def __init__(self, automaton: Automaton, mode: str = "ellipsis",
                 enforce_temporal: bool = True):
        if mode not in ("ellipsis", "hp"):
            raise ValueError(f"unknown mode {mode!r}")
        self.automaton = automaton
        self.mode = mode
        self.enforce_temporal = enforce_temporal
        self.matches = 0
        self.failures = 0
        self.comparisons_total = 0
        self.max_comparisons_per_step = 0
        self._root = automaton.root
        self._node = automaton.root
        self._pending: list[AuditRecord] = []
        self._hp: _HpState | None = None
        self._last_ts: int | None = None
        self._cmp = 0

    # ------------------------------------------------------------ stepping

    def step(self, record: AuditRecord, now_ns: int | None = None) -> list[Emission]:
        ts = record.ts_ns
        if self._last_ts is not None and ts < self._last_ts:
            raise OutOfOrderTimestamp(
                f"timestamp {ts} after {self._last_ts} for task {record.task_key}")
        self._last_ts = ts
        now = ts if now_ns is None else now_ns
        self._cmp = 0
        out: list[Emission] = []
        child = self._match_child(self._node, record)
        if child is not None:
            self._advance(record, child, now, out)
        else:
            self._fail(record, now, out)
        if self._cmp > self.max_comparisons_per_step:
            self.max_comparisons_per_step = self._cmp
        self.comparisons_total += self._cmp
        return out

    def finish(self, now_ns: int | None = None) -> list[Emission]:
        now = now_ns if now_ns is not None else (self._last_ts or 0)
        out: list[Emission] = []
        self._flush_hp(now, out)
        if self._pending:
            self.failures += 1
            out.extend(Emission(r, False) for r in self._pending)
            self._pending = []
        self._node = self._root
        return out

    # ------------------------------------------------------------ internals

    def _match_child(self, node: _Node, record: AuditRecord):
        for entry, child in node.children:
            self._cmp += 1
            if entry_matches(entry, record):
                return child
        return None

    def _advance(self, record: AuditRecord, node: _Node, now: int,
                 out: list[Emission]) -> None:
        self._pending.append(record)
        tpl = node.accept
        if tpl is None:
            self._node = node
            return
        stime = self._pending[0].ts_ns
        etime = record.ts_ns
        rt = tpl.expected_runtime_ns
        if not self.enforce_temporal or rt == 0 or (etime - stime) <= rt:
            self.matches += 1
            self._complete(tpl, stime, etime, now, out)
        else:
            self.failures += 1
            self._flush_hp(now, out)
            out.extend(Emission(r, False) for r in self._pending)
            self._pending = []
        self._node = self._root

    def _complete(self, tpl: Template, stime: int, etime: int, now: int,
                  out: list[Emission]) -> None:
        head = self._pending[0]
        self._pending = []
        if self.mode != "hp":
            out.append(Emission(make_template_record(tpl, 1, stime, etime, head, now), True))
            return
        hp = self._hp
        if hp is not None and hp.template is tpl:
            ia = tpl.expected_interarrival_ns
            if not self.enforce_temporal or ia == 0 or (stime - hp.last_start) <= ia:
                hp.rep += 1
                hp.etime = etime
                hp.last_start = stime
                return
        self._flush_hp(now, out)
        self._hp = _HpState(template=tpl, rep=1, stime=stime, etime=etime,
                            head=head, last_start=stime)

    def _fail(self, record: AuditRecord, now: int, out: list[Emission]) -> None:
        self._flush_hp(now, out)
        if self._pending:
            self.failures += 1
            out.extend(Emission(r, False) for r in self._pending)
            self._pending = []
        self._node = self._root
        child = self._match_child(self._root, record)  # one re-attempt
        if child is not None:
            self._advance(record, child, now, out)
        else:
            out.append(Emission(record, False))

    def _flush_hp(self, now: int, out: list[Emission]) -> None:
        hp = self._hp
        if hp is not None:
            out.append(Emission(make_template_record(
                hp.template, hp.rep, hp.stime, hp.etime, hp.head, now), True))
            self._hp = None


# ------------------------------------------------------------------ engine

def native_available() -> bool:
    if os.environ.get("ELLIPSIS_AUDIT_PURE"):
        return False
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_engine(engine: str = "auto") -> str:
    if engine not in ("auto", "python", "native"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "python":
        return "python"
    if native_available():
        return "native"
    if engine == "native":
        raise EngineUnavailable("native core not built for this install")
    return "python"


def _make_stepper(automaton: Automaton, mode: str, enforce_temporal: bool, engine: str):
    if engine == "native":
        flat = automaton.flatten()
        if flat is not None:
            from . import _core
            return _core.NativeTaskStepper(
                flat, automaton.templates, mode == "hp", enforce_temporal,
                Emission, make_template_record, OutOfOrderTimestamp,
                RecordKind.SYSCALL)
    return TaskReducer(automaton, mode=mode, enforce_temporal=enforce_temporal)


@dataclass
class ReduceResult:
    emissions: list[Emission]
    counters: ReduceCounters
    engine: str = "python"

    def records(self):
        return (e.record for e in self.emissions)


def reduce_stream(records, template_set: TemplateSet | None,
                  mode: str = "ellipsis", engine: str = "auto",
                  enforce_temporal: bool = True,
                  serial_start: int = 1) -> ReduceResult:
    """Reduce a merged multi-task stream.

    Records demultiplex by (pid, tid); each task runs its own stepper over
    the templates bound to it (no templates = raw pass-through).  Emissions
    merge in input arrival order, tasks are finished in first-seen order,
    and template-match serials are assigned monotonically over the final
    output.
    """
    if mode not in ("ellipsis", "hp"):
        raise ValueError(f"unknown mode {mode!r}")
    eng = resolve_engine(engine)
    counters = ReduceCounters()
    emissions: list[Emission] = []
    steppers: dict = {}
    automata: dict = {}
    for r in records:
        counters.events_in += 1
        counters.bytes_in += record_size_bytes(r)
        key = (r.pid, r.tid)
        stepper = steppers.get(key, False)
        if stepper is False:
            tpls = template_set.for_task(r.pid, r.tid, r.comm) if template_set is not None else []
            if tpls:
                akey = tuple(t.name for t in tpls)
                auto = automata.get(akey)
                if auto is None:
                    auto = build_automaton(tpls)
                    automata[akey] = auto
                stepper = _make_stepper(auto, mode, enforce_temporal, eng)
            else:
                stepper = None
            steppers[key] = stepper
        if stepper is None:
            emissions.append(Emission(r, False))
            continue
        try:
            got = stepper.step(r)
        except OutOfOrderTimestamp as exc:
            raise OutOfOrderTimestamp(
                f"record {counters.events_in - 1}: {exc}") from None
        if got:
            emissions.extend(got)
    for stepper in steppers.values():
        if stepper is not None:
            got = stepper.finish()
            if got:
                emissions.extend(got)
            counters.matches += stepper.matches
            counters.failures += stepper.failures
            counters.comparisons_total += stepper.comparisons_total
            if stepper.max_comparisons_per_step > counters.max_comparisons_per_step:
                counters.max_comparisons_per_step = stepper.max_comparisons_per_step
    serial = serial_start
    for e in emissions:
        if e.is_match:
            e.record.serial = serial
            serial += 1
    counters.events_out = len(emissions)
    counters.bytes_out = sum(record_size_bytes(e.record) for e in emissions)
    return ReduceResult(emissions=emissions, counters=counters, engine=eng)
