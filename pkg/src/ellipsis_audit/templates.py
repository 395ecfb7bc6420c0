"""Syscall-sequence templates and the on-disk template file format.

A template is a named, ordered list of entries, each constraining the
syscall number and up to four register-sized arguments (-1 = wildcard),
plus two temporal constraints in nanoseconds (0 = disabled):

    arducopter        <- name
    3                 <- entry count
    1303419           <- expected runtime (first..last record of an instance)
    5012313           <- expected inter-arrival (instance start to start)
    4:3:-1:1:-1       <- syscall:a0:a1:a2:a3
    4:4:-1:1:-1
    4:5:-1:1:-1

A TemplateSet binds templates to tasks, by comm by default or by explicit
pid/tid, and answers lookups from the reducer and the reconstructor.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .records import AuditRecord, RecordKind

# kernel-side cost model for a loaded template set (32-bit kernel struct sizes)
FIXED_BYTES_PER_TEMPLATE = 116
BYTES_PER_SYSCALL_ENTRY = 56

MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = 1


class MalformedEntry(ValueError):
    pass


class CountMismatch(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class TemplateEntry:
    syscall_no: int
    a0: int = -1
    a1: int = -1
    a2: int = -1
    a3: int = -1

    def __post_init__(self):
        if self.syscall_no < 0:
            raise MalformedEntry(f"negative syscall number {self.syscall_no}")
        for slot in (self.a0, self.a1, self.a2, self.a3):
            if slot < -1:
                raise MalformedEntry(f"argument constraint below -1: {slot}")

    @property
    def args(self) -> tuple[int, int, int, int]:
        return (self.a0, self.a1, self.a2, self.a3)

    def to_text(self) -> str:
        return ":".join(str(v) for v in (self.syscall_no, self.a0, self.a1, self.a2, self.a3))

    @classmethod
    def from_text(cls, text: str) -> "TemplateEntry":
        parts = text.strip().split(":")
        if len(parts) != 5:
            raise MalformedEntry(f"expected 5 colon-separated fields: {text!r}")
        try:
            nums = [int(p) for p in parts]
        except ValueError as e:
            raise MalformedEntry(f"non-integer field in {text!r}") from e
        return cls(*nums)


def entry_matches(entry: TemplateEntry, record: AuditRecord) -> bool:
    """True when the record satisfies every constraint of the entry.

    Only syscall records can match.  A constrained argument requires the
    record's argument to be present and equal; -1 matches anything,
    including an absent or unrecoverable argument.
    """
    if record.kind is not RecordKind.SYSCALL or record.syscall_no != entry.syscall_no:
        return False
    for want, got in ((entry.a0, record.a0), (entry.a1, record.a1),
                      (entry.a2, record.a2), (entry.a3, record.a3)):
        if want != -1 and got != want:
            return False
    return True


@dataclass(frozen=True, slots=True)
class Template:
    name: str
    entries: tuple[TemplateEntry, ...]
    expected_runtime_ns: int = 0
    expected_interarrival_ns: int = 0

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise MalformedEntry(f"template name must be one non-empty token: {self.name!r}")
        if not self.entries:
            raise MalformedEntry("template needs at least one entry")
        if self.expected_runtime_ns < 0 or self.expected_interarrival_ns < 0:
            raise MalformedEntry("temporal constraints must be >= 0")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)


def serialize_template(t: Template) -> str:
    lines = [t.name, str(len(t.entries)), str(t.expected_runtime_ns),
             str(t.expected_interarrival_ns)]
    lines.extend(e.to_text() for e in t.entries)
    return "\n".join(lines) + "\n"


def parse_template_file(text: str) -> Template:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 5:
        raise MalformedEntry("template file needs name, count, runtime, inter-arrival and entries")
    name = lines[0]
    try:
        count = int(lines[1])
        runtime = int(lines[2])
        interarrival = int(lines[3])
    except ValueError as e:
        raise MalformedEntry(f"bad header line: {e}") from e
    entries = [TemplateEntry.from_text(ln) for ln in lines[4:]]
    if count != len(entries):
        raise CountMismatch(f"header says {count} entries, file has {len(entries)}")
    return Template(name=name, entries=tuple(entries),
                    expected_runtime_ns=runtime, expected_interarrival_ns=interarrival)


@dataclass(slots=True)
class _Binding:
    templates: list[Template]
    comm: str | None = None
    pid: int | None = None
    tid: int | None = None

    def matches(self, pid: int | None, tid: int | None, comm: str | None) -> bool:
        if self.pid is not None or self.tid is not None:
            return (self.pid is None or self.pid == pid) and (self.tid is None or self.tid == tid)
        return self.comm is not None and self.comm == comm


class DuplicateName(ValueError):
    pass


class TemplateSet:
    """Templates plus their task bindings; template names are set-unique."""

    def __init__(self):
        self._bindings: list[_Binding] = []
        self._by_name: dict[str, Template] = {}

    def add(self, template: Template, comm: str | None = None,
            pid: int | None = None, tid: int | None = None) -> None:
        if template.name in self._by_name:
            raise DuplicateName(template.name)
        if comm is None and pid is None and tid is None:
            comm = template.name
        self._by_name[template.name] = template
        for b in self._bindings:
            if b.comm == comm and b.pid == pid and b.tid == tid:
                b.templates.append(template)
                return
        self._bindings.append(_Binding(templates=[template], comm=comm, pid=pid, tid=tid))

    def for_task(self, pid: int | None, tid: int | None,
                 comm: str | None) -> list[Template]:
        out: list[Template] = []
        for b in self._bindings:
            if b.matches(pid, tid, comm):
                out.extend(b.templates)
        return out

    def by_name(self, name: str) -> Template | None:
        return self._by_name.get(name)

    def names(self) -> list[str]:
        return list(self._by_name)

    def all_templates(self) -> list[Template]:
        return list(self._by_name.values())

    def bindings(self) -> list[tuple[str | None, int | None, int | None, list[Template]]]:
        return [(b.comm, b.pid, b.tid, list(b.templates)) for b in self._bindings]

    def __len__(self) -> int:
        return len(self._by_name)

    def __iter__(self):
        return iter(self._by_name.values())

    # ------------------------------------------------------------- disk io

    def save_dir(self, path: str) -> None:
        os.makedirs(path, exist_ok=True)
        manifest = {"schema_version": SCHEMA_VERSION, "tasks": []}
        for b in self._bindings:
            files = []
            for t in b.templates:
                fname = f"{t.name}.tpl"
                with open(os.path.join(path, fname), "w", encoding="utf-8") as fh:
                    fh.write(serialize_template(t))
                files.append(fname)
            entry: dict = {"templates": files}
            if b.comm is not None:
                entry["comm"] = b.comm
            if b.pid is not None:
                entry["pid"] = b.pid
            if b.tid is not None:
                entry["tid"] = b.tid
            manifest["tasks"].append(entry)
        with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load_dir(cls, path: str) -> "TemplateSet":
        ts = cls()
        manifest_path = os.path.join(path, MANIFEST_NAME)
        if os.path.exists(manifest_path):
            with open(manifest_path, encoding="utf-8") as fh:
                manifest = json.load(fh)
            for task in manifest.get("tasks", []):
                for fname in task["templates"]:
                    with open(os.path.join(path, fname), encoding="utf-8") as fh:
                        t = parse_template_file(fh.read())
                    ts.add(t, comm=task.get("comm"), pid=task.get("pid"), tid=task.get("tid"))
            return ts
        for fname in sorted(os.listdir(path)):
            if fname.endswith(".tpl"):
                with open(os.path.join(path, fname), encoding="utf-8") as fh:
                    ts.add(parse_template_file(fh.read()))
        return ts

    @classmethod
    def load_files(cls, paths: list[str]) -> "TemplateSet":
        ts = cls()
        for p in paths:
            with open(p, encoding="utf-8") as fh:
                ts.add(parse_template_file(fh.read()))
        return ts


def memory_cost(templates, task: "str | tuple[int | None, int | None] | None" = None, *,
                fixed_bytes: int = FIXED_BYTES_PER_TEMPLATE,
                per_syscall_bytes: int = BYTES_PER_SYSCALL_ENTRY) -> int:
    """Kernel-side bytes for holding the given templates.

    Cost = fixed_bytes * n + per_syscall_bytes * total entries.  ``templates``
    may be a TemplateSet (optionally narrowed to one task by comm or by a
    (pid, tid) pair) or any iterable of Template.
    """
    if isinstance(templates, TemplateSet):
        if task is None:
            chosen = templates.all_templates()
        elif isinstance(task, str):
            chosen = templates.for_task(None, None, task)
        else:
            pid, tid = task
            chosen = templates.for_task(pid, tid, None)
    else:
        chosen = list(templates)
    return fixed_bytes * len(chosen) + per_syscall_bytes * sum(len(t) for t in chosen)
