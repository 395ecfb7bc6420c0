"""Single-line audit record model: parsing, serialization, byte accounting.

Two record shapes share one line grammar.  A syscall record is the familiar
kernel audit line::

    type=SYSCALL msg=audit(SECS.FRAC:SERIAL): arch=.. syscall=4 per=.. \
success=yes exit=8 a0=3 .. key=(null)

A template-match record is the reduced form emitted in place of a matched
sequence.  It drops syscall/success/exit/args/items and carries
template/rep/stime/etime after ``per=`` (with the canonical double space
where ``syscall=`` would have been)::

    type=SYSCALL msg=audit(SECS.FRAC:SERIAL): arch=..  per=.. \
template=NAME rep=10 stime=NS etime=NS ppid=.. .. key=(null)

Reconstructed records may carry the ``∅`` marker for values that cannot be
recovered (serial, wildcard args, success/exit/items) and a timestamp range
``[SECS.FRAC, SECS.FRAC]`` when only bounds are known.  Both forms parse
back into this model, and serialization is byte-exact for every line the
canonical grammar can produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

NS_PER_SEC = 1_000_000_000

UNKNOWN_TOKEN = "∅"


class _UnknownValue:
    """Marker for a field that exists but whose value was not recoverable."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return UNKNOWN_TOKEN

    def __bool__(self) -> bool:
        return False


UNKNOWN = _UnknownValue()

# int value, absent, or ∅
MaybeInt = "int | None | _UnknownValue"


class RecordKind(Enum):
    SYSCALL = "SYSCALL"
    TEMPLATE_MATCH = "TEMPLATE_MATCH"
    OTHER = "OTHER"  # pass-through for non-syscall audit types


class MalformedRecord(ValueError):
    """Unparseable line; ``offset`` is the byte position of the failure."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class InvariantViolation(ValueError):
    """Record state that the serializer refuses to render."""


_ID_FIELDS = (
    "ppid", "pid", "tid", "auid", "uid", "gid",
    "euid", "suid", "fsuid", "egid", "sgid", "fsgid",
)

# serialization slots, in canonical order, per kind
_SYSCALL_SLOTS = (
    ("arch",), ("syscall",), ("per",), ("success",), ("exit",),
    ("a0",), ("a1",), ("a2",), ("a3",), ("items",),
) + tuple((f,) for f in _ID_FIELDS) + (("tty",), ("ses",), ("comm",), ("exe",), ("key",))

_TEMPLATE_SLOTS = (
    ("arch",), ("per",), ("template",), ("rep",), ("stime",), ("etime",),
) + tuple((f,) for f in _ID_FIELDS) + (("tty",), ("ses",), ("comm",), ("exe",), ("key",))


@dataclass(slots=True)
class AuditRecord:
    kind: RecordKind
    ts_sec: int
    ts_nanos: int  # full nanosecond value (scaled from the printed fraction)
    ts_frac_digits: int = 9
    # range end for reconstructed [min, max] timestamps; None = exact
    ts2_sec: int | None = None
    ts2_nanos: int | None = None
    ts2_frac_digits: int = 9
    serial: "int | None | _UnknownValue" = None
    rtype: str = "SYSCALL"
    arch: str | None = None
    syscall_no: int | None = None
    per: str | None = None
    success: "bool | None | _UnknownValue" = None
    exit_code: "int | None | _UnknownValue" = None
    a0: "int | None | _UnknownValue" = None
    a1: "int | None | _UnknownValue" = None
    a2: "int | None | _UnknownValue" = None
    a3: "int | None | _UnknownValue" = None
    items: "int | None | _UnknownValue" = None
    ppid: int | None = None
    pid: int | None = None
    tid: int | None = None
    auid: int | None = None
    uid: int | None = None
    gid: int | None = None
    euid: int | None = None
    suid: int | None = None
    fsuid: int | None = None
    egid: int | None = None
    sgid: int | None = None
    fsgid: int | None = None
    tty: str | None = None
    ses: str | None = None
    comm: str | None = None
    comm_quoted: bool = True
    exe: str | None = None
    exe_quoted: bool = True
    key: str | None = None  # raw token value, e.g. (null) or "backup"
    template_name: str | None = None
    rep: int | None = None
    stime: int | None = None  # ns
    etime: int | None = None  # ns
    # unknown key=value tokens: (anchor slot name, key, raw value)
    extras: list[tuple[str, str, str]] = field(default_factory=list)

    @property
    def ts_ns(self) -> int:
        return self.ts_sec * 1_000_000_000 + self.ts_nanos

    @property
    def ts2_ns(self) -> int | None:
        if self.ts2_sec is None:
            return None
        return self.ts2_sec * 1_000_000_000 + (self.ts2_nanos or 0)

    @property
    def task_key(self) -> tuple[int | None, int | None]:
        return (self.pid, self.tid)


def _format_time(sec: int, nanos: int, digits: int) -> str:
    frac = nanos // (10 ** (9 - digits))
    return f"{sec}.{frac:0{digits}d}"


def _fmt_int(v) -> str:
    return UNKNOWN_TOKEN if v is UNKNOWN else str(v)


def _byte_offset(line: str, pos: int) -> int:
    return len(line[:pos].encode("utf-8"))


_FRAC_DIV = tuple(10 ** (9 - d) for d in range(10))


def serialize_record(r: AuditRecord) -> str:
    """Render the canonical single-line form (no trailing newline)."""
    # Straight-line path for the dominant shape: a fully populated syscall
    # record with an exact timestamp and no extras.  Byte-identical to the
    # general renderer below; reduction sizes every record, so this is hot.
    if (r.kind is RecordKind.SYSCALL and not r.extras and r.ts2_sec is None
            and type(r.serial) is int and type(r.success) is bool
            and type(r.exit_code) is int and type(r.items) is int
            and type(r.a0) is int and type(r.a1) is int
            and type(r.a2) is int and type(r.a3) is int
            and type(r.syscall_no) is int
            and r.arch is not None and r.per is not None
            and type(r.ppid) is int and type(r.pid) is int
            and type(r.tid) is int and type(r.auid) is int
            and type(r.uid) is int and type(r.gid) is int
            and type(r.euid) is int and type(r.suid) is int
            and type(r.fsuid) is int and type(r.egid) is int
            and type(r.sgid) is int and type(r.fsgid) is int
            and r.tty is not None and r.ses is not None
            and r.comm is not None and r.comm_quoted
            and r.exe is not None and r.exe_quoted and r.key is not None
            and r.template_name is None and r.rep is None
            and r.stime is None and r.etime is None
            and 1 <= r.ts_frac_digits <= 9):
        frac = r.ts_nanos // _FRAC_DIV[r.ts_frac_digits]
        return (
            f"type={r.rtype} msg=audit({r.ts_sec}.{frac:0{r.ts_frac_digits}d}"
            f":{r.serial}): arch={r.arch} syscall={r.syscall_no} per={r.per} "
            f"success={'yes' if r.success else 'no'} exit={r.exit_code} "
            f"a0={r.a0:x} a1={r.a1:x} a2={r.a2:x} a3={r.a3:x} "
            f"items={r.items} ppid={r.ppid} pid={r.pid} tid={r.tid} "
            f"auid={r.auid} uid={r.uid} gid={r.gid} euid={r.euid} "
            f"suid={r.suid} fsuid={r.fsuid} egid={r.egid} sgid={r.sgid} "
            f"fsgid={r.fsgid} tty={r.tty} ses={r.ses} comm=\"{r.comm}\" "
            f"exe=\"{r.exe}\" key={r.key}")
    return _serialize_general(r)


def _serialize_general(r: AuditRecord) -> str:
    _check_invariants(r)
    ts = _format_time(r.ts_sec, r.ts_nanos, r.ts_frac_digits)
    if r.ts2_sec is not None:
        ts = f"[{ts}, {_format_time(r.ts2_sec, r.ts2_nanos or 0, r.ts2_frac_digits)}]"
    serial = UNKNOWN_TOKEN if (r.serial is None or r.serial is UNKNOWN) else str(r.serial)
    parts = [f"type={r.rtype}", f"msg=audit({ts}:{serial}):"]

    extras_by_anchor: dict[str, list[tuple[str, str]]] = {}
    for anchor, k, v in r.extras:
        extras_by_anchor.setdefault(anchor, []).append((k, v))
    for k, v in extras_by_anchor.pop("msg", ()):
        parts.append(f"{k}={v}")

    slots = {
        RecordKind.SYSCALL: _SYSCALL_SLOTS,
        RecordKind.TEMPLATE_MATCH: _TEMPLATE_SLOTS,
        RecordKind.OTHER: (),
    }[r.kind]
    for (name,) in slots:
        tok = _render_slot(r, name)
        if tok is not None:
            if r.kind is RecordKind.TEMPLATE_MATCH and name == "per" and r.arch is not None:
                # canonical quirk: the dropped syscall= slot leaves a double space
                parts[-1] = parts[-1] + " "
            parts.append(tok)
        for k, v in extras_by_anchor.pop(name, ()):
            parts.append(f"{k}={v}")
    # extras anchored at slots this kind never renders keep their order at the tail
    for anchor, pairs in extras_by_anchor.items():
        for k, v in pairs:
            parts.append(f"{k}={v}")
    return " ".join(parts)


def _render_slot(r: AuditRecord, name: str) -> str | None:
    v = getattr(r, name if name not in ("syscall", "exit", "template") else
                {"syscall": "syscall_no", "exit": "exit_code", "template": "template_name"}[name])
    if v is None:
        return None
    if name == "success":
        txt = UNKNOWN_TOKEN if v is UNKNOWN else ("yes" if v else "no")
        return f"success={txt}"
    if name in ("a0", "a1", "a2", "a3"):
        txt = UNKNOWN_TOKEN if v is UNKNOWN else format(v, "x")
        return f"{name}={txt}"
    if name in ("exit", "items"):
        return f"{name}={_fmt_int(v)}"
    if name == "comm":
        return f'comm="{v}"' if r.comm_quoted else f"comm={v}"
    if name == "exe":
        return f'exe="{v}"' if r.exe_quoted else f"exe={v}"
    if v is UNKNOWN:
        return f"{name}={UNKNOWN_TOKEN}"
    return f"{name}={v}"


def _check_invariants(r: AuditRecord) -> None:
    if r.ts_frac_digits < 1 or r.ts_frac_digits > 9:
        raise InvariantViolation("timestamp fraction must carry 1..9 digits")
    if r.ts2_sec is not None and r.ts2_ns < r.ts_ns:
        raise InvariantViolation("timestamp range end precedes start")
    if r.kind is RecordKind.SYSCALL:
        if r.syscall_no is None:
            raise InvariantViolation("syscall record without syscall number")
        if r.template_name is not None or r.rep is not None or r.stime is not None or r.etime is not None:
            raise InvariantViolation("syscall record with template fields")
    elif r.kind is RecordKind.TEMPLATE_MATCH:
        if not r.template_name:
            raise InvariantViolation("template record without a template name")
        if r.rep is None or r.rep < 1:
            raise InvariantViolation("template record rep must be >= 1")
        if r.stime is None or r.etime is None or r.stime > r.etime:
            raise InvariantViolation("template record needs stime <= etime")
        if r.syscall_no is not None:
            raise InvariantViolation("template record with a syscall number")
        for f_ in ("success", "exit_code", "a0", "a1", "a2", "a3", "items"):
            if getattr(r, f_) is not None:
                raise InvariantViolation(f"template record with {f_} set")
    else:
        for f_ in ("syscall_no", "template_name", "a0", "a1", "a2", "a3"):
            if getattr(r, f_) is not None:
                raise InvariantViolation("pass-through record with structured fields")


def record_size_bytes(r: AuditRecord) -> int:
    """Stored size of the record: serialized UTF-8 bytes plus the newline."""
    return len(serialize_record(r).encode("utf-8")) + 1


# ---------------------------------------------------------------- parsing

def _parse_time_atom(atom: str, line: str, base: int) -> tuple[int, int, int]:
    dot = atom.find(".")
    if dot <= 0 or dot == len(atom) - 1:
        raise MalformedRecord(f"bad timestamp {atom!r}", _byte_offset(line, base))
    sec_s, frac_s = atom[:dot], atom[dot + 1:]
    if not sec_s.isdigit() or not frac_s.isdigit() or len(frac_s) > 9:
        raise MalformedRecord(f"bad timestamp {atom!r}", _byte_offset(line, base))
    return int(sec_s), int(frac_s) * 10 ** (9 - len(frac_s)), len(frac_s)


def _tokens(rest: str, start: int) -> Iterator[tuple[int, str]]:
    i, n = start, len(rest)
    while i < n:
        while i < n and rest[i] == " ":
            i += 1
        if i >= n:
            return
        tok_start = i
        in_quotes = False
        while i < n and (in_quotes or rest[i] != " "):
            if rest[i] == '"':
                in_quotes = not in_quotes
            i += 1
        yield tok_start, rest[tok_start:i]


def _parse_hex_word(v: str, line: str, off: int):
    if v == UNKNOWN_TOKEN:
        return UNKNOWN
    if not v or len(v) > 16 or any(c not in "0123456789abcdef" for c in v):
        raise MalformedRecord(f"bad hex word {v!r}", _byte_offset(line, off))
    return int(v, 16)


def _parse_dec(v: str, line: str, off: int, signed: bool = False):
    if v == UNKNOWN_TOKEN:
        return UNKNOWN
    body = v[1:] if (signed and v.startswith("-")) else v
    if not body.isdigit():
        raise MalformedRecord(f"bad integer {v!r}", _byte_offset(line, off))
    return int(v)


def parse_record(line: str) -> AuditRecord:
    """Parse one line.  Raises MalformedRecord (never anything else) on bad
    input; unknown key=value tokens are preserved in order for lossless
    round-trips.
    """
    if not isinstance(line, str):
        line = bytes(line).decode("utf-8", errors="replace")
    s = line.rstrip("\n")
    stripped = s.lstrip(" ")
    lead = len(s) - len(stripped)
    if not stripped.startswith("type="):
        raise MalformedRecord("missing type= prefix", _byte_offset(s, lead))
    type_end = stripped.find(" ")
    if type_end < 0:
        raise MalformedRecord("record ends after type=", _byte_offset(s, lead))
    rtype = stripped[5:type_end]
    if not rtype:
        raise MalformedRecord("empty type=", _byte_offset(s, lead + 5))

    rest = stripped[type_end:].lstrip(" ")
    base = lead + type_end + (len(stripped) - type_end - len(rest))
    if not rest.startswith("msg=audit("):
        raise MalformedRecord("missing msg=audit(..) prefix", _byte_offset(s, base))
    close = rest.find("):", len("msg=audit("))
    if close < 0:
        raise MalformedRecord("unterminated msg=audit(", _byte_offset(s, base))
    inner = rest[len("msg=audit("):close]
    inner_off = base + len("msg=audit(")

    time_part, sep, serial_part = inner.rpartition(":")
    if not sep:
        raise MalformedRecord("msg=audit missing :serial", _byte_offset(s, inner_off))
    if serial_part == UNKNOWN_TOKEN:
        serial = UNKNOWN
    elif serial_part.isdigit():
        serial = int(serial_part)
    else:
        raise MalformedRecord(f"bad serial {serial_part!r}",
                              _byte_offset(s, inner_off + len(time_part) + 1))

    ts2 = None
    if time_part.startswith("["):
        if not time_part.endswith("]") or ", " not in time_part:
            raise MalformedRecord("bad timestamp range", _byte_offset(s, inner_off))
        lo_s, hi_s = time_part[1:-1].split(", ", 1)
        lo = _parse_time_atom(lo_s, s, inner_off + 1)
        hi = _parse_time_atom(hi_s, s, inner_off + 1 + len(lo_s) + 2)
        ts2 = hi
    else:
        lo = _parse_time_atom(time_part, s, inner_off)

    r = AuditRecord(kind=RecordKind.OTHER, ts_sec=lo[0], ts_nanos=lo[1],
                    ts_frac_digits=lo[2], serial=serial, rtype=rtype)
    if ts2 is not None:
        r.ts2_sec, r.ts2_nanos, r.ts2_frac_digits = ts2

    anchor = "msg"
    for off, tok in _tokens(rest, close + 2):
        toff = base + off
        key, eq, val = tok.partition("=")
        if not eq or not key:
            raise MalformedRecord(f"token without key=value: {tok!r}", _byte_offset(s, toff))
        voff = toff + len(key) + 1
        if key in ("arch", "per"):
            if val != UNKNOWN_TOKEN and (not val or len(val) > 16 or
                                         any(c not in "0123456789abcdef" for c in val)):
                raise MalformedRecord(f"bad hex word {val!r}", _byte_offset(s, voff))
            setattr(r, key, val)
        elif key == "syscall":
            v = _parse_dec(val, s, voff)
            r.syscall_no = None if v is UNKNOWN else v
        elif key == "success":
            if val == "yes":
                r.success = True
            elif val == "no":
                r.success = False
            elif val == UNKNOWN_TOKEN:
                r.success = UNKNOWN
            else:
                raise MalformedRecord(f"bad success value {val!r}", _byte_offset(s, voff))
        elif key == "exit":
            r.exit_code = _parse_dec(val, s, voff, signed=True)
        elif key in ("a0", "a1", "a2", "a3"):
            setattr(r, key, _parse_hex_word(val, s, voff))
        elif key == "items":
            r.items = _parse_dec(val, s, voff)
        elif key in _ID_FIELDS:
            v = _parse_dec(val, s, voff)
            setattr(r, key, None if v is UNKNOWN else v)
        elif key in ("tty", "ses"):
            setattr(r, key, val)
        elif key in ("comm", "exe"):
            if len(val) >= 2 and val.startswith('"') and val.endswith('"'):
                setattr(r, key, val[1:-1])
                setattr(r, key + "_quoted", True)
            else:
                setattr(r, key, val)
                setattr(r, key + "_quoted", False)
        elif key == "key":
            r.key = val
        elif key == "template":
            if not val:
                raise MalformedRecord("empty template name", _byte_offset(s, voff))
            r.template_name = val
        elif key == "rep":
            v = _parse_dec(val, s, voff)
            r.rep = None if v is UNKNOWN else v
        elif key in ("stime", "etime"):
            v = _parse_dec(val, s, voff)
            setattr(r, key, None if v is UNKNOWN else v)
        else:
            r.extras.append((anchor, key, val))
            continue
        anchor = key
    if r.template_name is not None:
        r.kind = RecordKind.TEMPLATE_MATCH
    elif r.syscall_no is not None:
        r.kind = RecordKind.SYSCALL
    return r


def parse_lines(lines: Iterable[str]) -> Iterator[AuditRecord]:
    """Parse an iterable of lines, skipping blank ones."""
    for line in lines:
        if line.strip():
            yield parse_record(line)
