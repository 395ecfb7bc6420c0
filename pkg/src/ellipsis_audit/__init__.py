"""Audit-stream reduction toolkit.

Replaces runs of syscall records that follow a known per-task pattern with
single summary records, and provides the surrounding machinery: workload
generation, template learning, closed-form size prediction, bounded-buffer
loss simulation, and lossless-modulo-serials reconstruction.
"""

from .buffer_sim import (BufferConfig, ConfigInvalid, SimResult,
                         min_capacity_for_lossless, simulate)
from .formulas import (CompareReport, ParamsInvalid, TaskParams, compare,
                       event_reduction, events_audit, events_ellipsis,
                       events_hp_best, load_params, log_size_audit,
                       log_size_ellipsis, size_reduction)
from .learning import (DEFAULT_BOUNDARY_SYSCALLS, NoMatchingInstances,
                       SequenceStats, TaskSegments, TemporalPolicy,
                       induce_arguments, learn_templates, segment_trace,
                       select_top_n, sequence_stats, temporal_profile)
from .records import (UNKNOWN, AuditRecord, MalformedRecord, RecordKind,
                      parse_lines, parse_record, record_size_bytes,
                      serialize_record)
from .reconstruction import (RepInvalid, RetentionReport, RetentionViolation,
                             UnknownTemplate, reconstruct, verify_retention)
from .reduction import (Automaton, EngineUnavailable, Emission,
                        OutOfOrderTimestamp, PrefixConflict, ReduceCounters,
                        ReduceResult, TaskReducer, build_automaton,
                        native_available, reduce_stream, resolve_engine)
from .templates import (CountMismatch, DuplicateName, MalformedEntry,
                        Template, TemplateEntry, TemplateSet, entry_matches,
                        memory_cost, parse_template_file, serialize_template)
from .workloads import (AnomalyRecordSpec, AnomalySpec, SequenceSpec,
                        SpecInvalid, TaskSpec, WorkloadSpec, anomaly_records,
                        example_spec, generate, inject, list_example_specs,
                        load_spec, save_spec, spec_from_dict, spec_to_dict)

__version__ = "0.1.0"

__all__ = [
    "AnomalyRecordSpec", "AnomalySpec", "AuditRecord", "Automaton",
    "BufferConfig", "CompareReport", "ConfigInvalid", "CountMismatch",
    "DEFAULT_BOUNDARY_SYSCALLS", "DuplicateName", "Emission",
    "EngineUnavailable", "MalformedEntry", "MalformedRecord",
    "NoMatchingInstances", "OutOfOrderTimestamp", "ParamsInvalid",
    "PrefixConflict", "RecordKind", "ReduceCounters", "ReduceResult",
    "RepInvalid", "RetentionReport", "RetentionViolation", "SequenceSpec",
    "SequenceStats", "SimResult", "SpecInvalid", "TaskParams", "TaskReducer",
    "TaskSegments", "Template", "TemplateEntry", "TemplateSet",
    "TemporalPolicy", "UNKNOWN", "UnknownTemplate", "WorkloadSpec",
    "anomaly_records", "build_automaton", "compare", "entry_matches",
    "event_reduction", "events_audit", "events_ellipsis", "events_hp_best",
    "example_spec", "generate", "induce_arguments", "inject",
    "learn_templates", "list_example_specs", "load_params", "load_spec",
    "log_size_audit", "log_size_ellipsis", "memory_cost",
    "min_capacity_for_lossless", "native_available", "parse_lines",
    "parse_record", "parse_template_file", "record_size_bytes",
    "reconstruct", "reduce_stream", "resolve_engine", "save_spec",
    "segment_trace", "select_top_n", "sequence_stats", "serialize_record",
    "serialize_template", "simulate", "size_reduction", "spec_from_dict",
    "spec_to_dict", "TaskSpec", "temporal_profile", "verify_retention",
]
