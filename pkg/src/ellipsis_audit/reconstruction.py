"""Expansion of reduced logs back into per-syscall records, and the
retention check that proves the round trip loses only what it must.

A template-match record with repetition r over a template of length L
expands to r*L syscall records.  Constrained arguments come back exactly;
wildcard arguments, serials, and the success/exit/items status fields are
gone and render as the unknown marker.  Only the first and last record of
the whole span carry exact timestamps, everything between gets the
bounded range [stime, etime].  Records that passed through reduction raw
are returned untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

from .records import (NS_PER_SEC, UNKNOWN, AuditRecord, RecordKind,
                      serialize_record)
from .templates import TemplateSet

SCHEMA_VERSION = 1

SYNTH_SERIAL_KEY = "serial_origin"
SYNTH_SERIAL_VALUE = "synthetic"


class UnknownTemplate(KeyError):
    pass


class RepInvalid(ValueError):
    pass


class RetentionViolation(ValueError):
    """Round-trip divergence; ``index`` is the position in the original
    stream of the first record that could not be accounted for."""

    def __init__(self, message: str, index: int):
        super().__init__(f"record {index}: {message}")
        self.index = index


def _expand_one(r: AuditRecord, entry, ts_lo: int, ts_hi: int | None,
                serial) -> AuditRecord:
    sec, nanos = divmod(ts_lo, NS_PER_SEC)
    rec = AuditRecord(
        kind=RecordKind.SYSCALL, ts_sec=sec, ts_nanos=nanos, ts_frac_digits=9,
        serial=serial, arch=r.arch, syscall_no=entry.syscall_no, per=r.per,
        success=UNKNOWN, exit_code=UNKNOWN,
        a0=entry.a0 if entry.a0 >= 0 else UNKNOWN,
        a1=entry.a1 if entry.a1 >= 0 else UNKNOWN,
        a2=entry.a2 if entry.a2 >= 0 else UNKNOWN,
        a3=entry.a3 if entry.a3 >= 0 else UNKNOWN,
        items=UNKNOWN, ppid=r.ppid, pid=r.pid, tid=r.tid, auid=r.auid,
        uid=r.uid, gid=r.gid, euid=r.euid, suid=r.suid, fsuid=r.fsuid,
        egid=r.egid, sgid=r.sgid, fsgid=r.fsgid, tty=r.tty, ses=r.ses,
        comm=r.comm, comm_quoted=r.comm_quoted, exe=r.exe,
        exe_quoted=r.exe_quoted, key=r.key)
    if ts_hi is not None:
        rec.ts2_sec, rec.ts2_nanos = divmod(ts_hi, NS_PER_SEC)
        rec.ts2_frac_digits = 9
    return rec


def reconstruct(records, template_set: TemplateSet,
                synthesize_serials: bool = False, serial_start: int = 1):
    """Yield the expanded stream for an iterable of reduced records.

    Serials of expanded records are unknown; with ``synthesize_serials``
    they are numbered monotonically instead and each record carries a
    trailing marker token identifying the serial as synthetic.
    """
    synth = serial_start
    for r in records:
        if r.kind is not RecordKind.TEMPLATE_MATCH:
            yield r
            continue
        tpl = template_set.by_name(r.template_name)
        if tpl is None:
            raise UnknownTemplate(r.template_name)
        if r.rep is None or r.rep < 1:
            raise RepInvalid(f"rep={r.rep} on template {r.template_name!r}")
        total = r.rep * len(tpl.entries)
        for i in range(total):
            entry = tpl.entries[i % len(tpl.entries)]
            if i == 0:
                lo, hi = r.stime, None
            elif i == total - 1:
                lo, hi = r.etime, None
            else:
                lo, hi = r.stime, r.etime
            serial = UNKNOWN
            if synthesize_serials:
                serial = synth
                synth += 1
            rec = _expand_one(r, entry, lo, hi, serial)
            if synthesize_serials:
                rec.extras.append(("key", SYNTH_SERIAL_KEY, SYNTH_SERIAL_VALUE))
            yield rec


# ------------------------------------------------------------- verification

_IDENTITY_FIELDS = ("arch", "per", "ppid", "pid", "tid", "auid", "uid", "gid",
                    "euid", "suid", "fsuid", "egid", "sgid", "fsgid",
                    "comm", "exe")


@dataclass
class RetentionReport:
    events: int = 0
    raw_exact: int = 0
    reconstructed: int = 0
    serials_lost: int = 0
    args_lost: int = 0
    status_fields_lost: int = 0
    ranged_timestamps: int = 0
    lost = ("serials", "wildcard arguments", "success/exit/items",
            "exact timestamps of interior records",
            "exact inter-task interleaving")

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "events": self.events,
                "raw_exact": self.raw_exact,
                "reconstructed": self.reconstructed,
                "serials_lost": self.serials_lost,
                "args_lost": self.args_lost,
                "status_fields_lost": self.status_fields_lost,
                "ranged_timestamps": self.ranged_timestamps,
                "lost": list(self.lost)}


def _is_reconstructed(r: AuditRecord) -> bool:
    if r.serial is UNKNOWN:
        return True
    return any(k == SYNTH_SERIAL_KEY for _, k, _ in r.extras)


def _check_pair(orig: AuditRecord, rec: AuditRecord, index: int,
                report: RetentionReport) -> None:
    if not _is_reconstructed(rec):
        if serialize_record(orig) != serialize_record(rec):
            raise RetentionViolation("raw record not byte-identical", index)
        report.raw_exact += 1
        return
    report.reconstructed += 1
    report.serials_lost += 1
    report.status_fields_lost += 3
    if rec.syscall_no != orig.syscall_no:
        raise RetentionViolation(
            f"syscall {rec.syscall_no} != original {orig.syscall_no}", index)
    for name in ("a0", "a1", "a2", "a3"):
        got = getattr(rec, name)
        if got is UNKNOWN:
            report.args_lost += 1
        elif got != getattr(orig, name):
            raise RetentionViolation(
                f"constrained {name}={got} != original {getattr(orig, name)}",
                index)
    ts = orig.ts_ns
    if rec.ts2_sec is None:
        if rec.ts_ns != ts:
            raise RetentionViolation(
                f"exact timestamp {rec.ts_ns} != original {ts}", index)
    else:
        report.ranged_timestamps += 1
        if not rec.ts_ns <= ts <= rec.ts2_ns:
            raise RetentionViolation(
                f"original timestamp {ts} outside [{rec.ts_ns}, {rec.ts2_ns}]",
                index)
    for name in _IDENTITY_FIELDS:
        if getattr(rec, name) != getattr(orig, name):
            raise RetentionViolation(f"identity field {name} differs", index)


def verify_retention(original, reduced, template_set: TemplateSet
                     ) -> RetentionReport:
    """Prove that reduce followed by reconstruct kept everything except
    the documented lost set.

    Original records are matched positionally per task: a raw survivor
    must be byte-identical, a reconstructed record must agree on syscall,
    constrained arguments, identity fields, and contain the original
    timestamp.  Raises RetentionViolation at the first divergence.
    """
    orig = list(original)
    per_task_orig: dict = {}
    for i, r in enumerate(orig):
        per_task_orig.setdefault(r.task_key, []).append((i, r))
    per_task_rec: dict = {}
    n_rec = 0
    for r in reconstruct(reduced, template_set):
        per_task_rec.setdefault(r.task_key, []).append(r)
        n_rec += 1

    report = RetentionReport(events=len(orig))
    for key, olist in per_task_orig.items():
        rlist = per_task_rec.get(key, [])
        for (i, o), r in zip(olist, rlist):
            _check_pair(o, r, i, report)
        if len(rlist) < len(olist):
            raise RetentionViolation("missing reconstructed record",
                                     olist[len(rlist)][0])
        if len(rlist) > len(olist):
            raise RetentionViolation(
                f"task {key}: {len(rlist) - len(olist)} extra records",
                len(orig))
    for key in per_task_rec:
        if key not in per_task_orig:
            raise RetentionViolation(f"unexpected task {key}", len(orig))
    if n_rec != len(orig):
        raise RetentionViolation(
            f"event count {n_rec} != original {len(orig)}", len(orig))
    return report
