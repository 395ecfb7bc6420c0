"""Closed-form event and byte models for periodic-task audit streams.

A task is parameterized by the number of distinct loop sequences N, loop
iteration count I, per-sequence lengths len_i and probabilities p_i, the
one-off initialization event count f, and mean stored record sizes: B_A for
an ordinary syscall record, B_E for a template-match record.  With the top
n sequences templated:

    events_audit      = I * sum(p_i * len_i)                      + f
    events_ellipsis   = I * (sum_{i<=n} p_i
                             + sum_{i>n} p_i * len_i)             + f
    events_hp_best    = n + I * sum_{i>n} p_i * len_i             + f
    log sizes         = the same sums weighted by B_A / B_E

All results are reals; callers round if they need counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

DEFAULT_RECORD_BYTES = 527.0  # mean stored size of one syscall record
DEFAULT_TEMPLATE_RECORD_BYTES = 343.0  # stored size of one template-match record


class ParamsInvalid(ValueError):
    pass


@dataclass(frozen=True)
class TaskParams:
    N: int
    I: int
    lengths: tuple[int, ...]
    p: tuple[float, ...]
    f: float
    n: int = 1
    B_A: float = DEFAULT_RECORD_BYTES
    B_E: float = DEFAULT_TEMPLATE_RECORD_BYTES
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(self.lengths))
        object.__setattr__(self, "p", tuple(self.p))
        if self.N != len(self.lengths) or self.N != len(self.p):
            raise ParamsInvalid("N must match len(lengths) and len(p)")
        if self.N < 0 or self.I < 0 or self.f < 0:
            raise ParamsInvalid("N, I and f must be nonnegative")
        if not 0 <= self.n <= self.N:
            raise ParamsInvalid("need 0 <= n <= N")
        if any(l <= 0 for l in self.lengths):
            raise ParamsInvalid("sequence lengths must be positive")
        if any(not 0.0 <= pi <= 1.0 for pi in self.p):
            raise ParamsInvalid("probabilities must lie in [0, 1]")
        if self.p and not math.isclose(sum(self.p), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ParamsInvalid(f"probabilities sum to {sum(self.p)}, not 1")
        if self.B_A <= 0 or self.B_E <= 0:
            raise ParamsInvalid("record sizes must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TaskParams":
        try:
            return cls(
                N=int(d["N"]), I=int(d["I"]), lengths=tuple(d["len"]),
                p=tuple(float(x) for x in d["p"]), f=float(d["f"]),
                n=int(d.get("n", 1)),
                B_A=float(d.get("B_A", DEFAULT_RECORD_BYTES)),
                B_E=float(d.get("B_E", DEFAULT_TEMPLATE_RECORD_BYTES)),
                name=str(d.get("task", d.get("name", ""))),
            )
        except KeyError as e:
            raise ParamsInvalid(f"missing parameter {e}") from e

    def to_dict(self) -> dict:
        return {"task": self.name, "N": self.N, "I": self.I,
                "len": list(self.lengths), "p": list(self.p), "f": self.f,
                "n": self.n, "B_A": self.B_A, "B_E": self.B_E}


def _weighted_len(tp: TaskParams, lo: int, hi: int) -> float:
    return sum(tp.p[i] * tp.lengths[i] for i in range(lo, hi))


def events_audit(tp: TaskParams) -> float:
    return tp.I * _weighted_len(tp, 0, tp.N) + tp.f


def events_ellipsis(tp: TaskParams) -> float:
    return tp.I * (sum(tp.p[:tp.n]) + _weighted_len(tp, tp.n, tp.N)) + tp.f


def event_reduction(tp: TaskParams) -> float:
    return tp.I * (_weighted_len(tp, 0, tp.n) - sum(tp.p[:tp.n]))


def events_hp_best(tp: TaskParams) -> float:
    """Floor for consecutive-aggregation: each templated sequence collapses
    to a single record over the whole run."""
    return tp.n + tp.I * _weighted_len(tp, tp.n, tp.N) + tp.f


def log_size_audit(tp: TaskParams) -> float:
    return tp.I * tp.B_A * _weighted_len(tp, 0, tp.N) + tp.f * tp.B_A


def log_size_ellipsis(tp: TaskParams) -> float:
    return (tp.I * (tp.B_E * sum(tp.p[:tp.n]) + tp.B_A * _weighted_len(tp, tp.n, tp.N))
            + tp.f * tp.B_A)


def size_reduction(tp: TaskParams) -> float:
    return tp.I * (tp.B_A * _weighted_len(tp, 0, tp.n) - tp.B_E * sum(tp.p[:tp.n]))


@dataclass
class CompareReport:
    mode: str
    predicted_events_in: float
    predicted_events_out: float
    measured_events_in: int
    measured_events_out: int
    predicted_bytes_in: float
    predicted_bytes_out: float
    measured_bytes_in: int
    measured_bytes_out: int
    tolerance: float
    flags: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "mode": self.mode,
                "events": {"predicted_in": self.predicted_events_in,
                           "predicted_out": self.predicted_events_out,
                           "measured_in": self.measured_events_in,
                           "measured_out": self.measured_events_out},
                "bytes": {"predicted_in": self.predicted_bytes_in,
                          "predicted_out": self.predicted_bytes_out,
                          "measured_in": self.measured_bytes_in,
                          "measured_out": self.measured_bytes_out},
                "tolerance": self.tolerance, "flags": self.flags, "ok": self.ok}


def _rel_err(predicted: float, measured: float) -> float:
    if predicted == 0:
        return 0.0 if measured == 0 else math.inf
    return abs(measured - predicted) / abs(predicted)


def compare(tp: TaskParams, counters, mode: str = "ellipsis",
            tolerance: float = 0.03) -> CompareReport:
    """Predicted vs measured stream sizes for a reduce run over a workload
    generated from ``tp``.  ``counters`` is the reduce counters object (or
    any object with events_in/out, bytes_in/out).  Deviations beyond
    ``tolerance`` relative error are flagged.
    """
    if mode == "ellipsis":
        pred_out = events_ellipsis(tp)
    elif mode == "hp":
        pred_out = events_hp_best(tp)
    else:
        raise ParamsInvalid(f"unknown mode {mode!r}")
    rpt = CompareReport(
        mode=mode,
        predicted_events_in=events_audit(tp),
        predicted_events_out=pred_out,
        measured_events_in=counters.events_in,
        measured_events_out=counters.events_out,
        predicted_bytes_in=log_size_audit(tp),
        predicted_bytes_out=log_size_ellipsis(tp) if mode == "ellipsis" else float("nan"),
        measured_bytes_in=counters.bytes_in,
        measured_bytes_out=counters.bytes_out,
        tolerance=tolerance,
    )
    if _rel_err(rpt.predicted_events_in, rpt.measured_events_in) > tolerance:
        rpt.flags.append("events_in")
    if _rel_err(rpt.predicted_events_out, rpt.measured_events_out) > tolerance:
        rpt.flags.append("events_out")
    if _rel_err(rpt.predicted_bytes_in, rpt.measured_bytes_in) > tolerance:
        rpt.flags.append("bytes_in")
    if mode == "ellipsis" and _rel_err(rpt.predicted_bytes_out, rpt.measured_bytes_out) > tolerance:
        rpt.flags.append("bytes_out")
    return rpt


def load_params(path: str) -> list[TaskParams]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as e:
        raise ParamsInvalid(f"params file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ParamsInvalid(f"params file is not valid JSON: {e}") from e
    rows = data["tasks"] if isinstance(data, dict) else data
    return [TaskParams.from_dict(row) for row in rows]
