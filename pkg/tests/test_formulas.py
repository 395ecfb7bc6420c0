"""Closed-form model: reference values, identities, parameter validation.

Reference numbers below were computed independently by hand from the
arducopter / ap-rcin parameter rows and frozen here; the analyze CLI and
acceptance suite must reproduce them exactly.
"""

import math
import random

import pytest
from types import SimpleNamespace

from ellipsis_audit import (ParamsInvalid, TaskParams, compare,
                            event_reduction, events_audit, events_ellipsis,
                            events_hp_best, load_params, log_size_audit,
                            log_size_ellipsis, size_reduction)

ARDUCOPTER = TaskParams(N=5, I=100, lengths=(14, 15, 17, 17, 18),
                        p=(0.95, 0.02, 0.01, 0.01, 0.01), f=679, n=1,
                        name="arducopter")
AP_RCIN = TaskParams(N=1, I=182, lengths=(16,), p=(1.0,), f=2, n=1,
                     name="ap-rcin")


def random_params(rng: random.Random) -> TaskParams:
    n_seq = rng.randint(1, 6)
    weights = [rng.random() + 1e-3 for _ in range(n_seq)]
    total = sum(weights)
    p = [w / total for w in weights]
    p[-1] = 1.0 - sum(p[:-1])  # close the rounding gap exactly
    return TaskParams(
        N=n_seq, I=rng.randint(0, 10**5),
        lengths=tuple(rng.randint(1, 40) for _ in range(n_seq)),
        p=tuple(p), f=rng.uniform(0, 2000), n=rng.randint(0, n_seq),
        B_A=rng.uniform(100, 700), B_E=rng.uniform(50, 600))


class TestReferenceValues:
    def test_arducopter_events(self):
        assert events_audit(ARDUCOPTER) == pytest.approx(2091.0, abs=1e-9)
        assert events_ellipsis(ARDUCOPTER) == pytest.approx(856.0, abs=1e-9)
        assert event_reduction(ARDUCOPTER) == pytest.approx(1235.0, abs=1e-9)
        assert events_hp_best(ARDUCOPTER) == pytest.approx(762.0, abs=1e-9)

    def test_arducopter_bytes(self):
        assert log_size_audit(ARDUCOPTER) == pytest.approx(1101957.0, abs=1e-6)
        assert log_size_ellipsis(ARDUCOPTER) == pytest.approx(433632.0, abs=1e-6)
        assert size_reduction(ARDUCOPTER) == pytest.approx(668325.0, abs=1e-6)

    def test_ap_rcin_events(self):
        assert events_audit(AP_RCIN) == pytest.approx(2914.0, abs=1e-9)
        assert events_ellipsis(AP_RCIN) == pytest.approx(184.0, abs=1e-9)
        assert events_hp_best(AP_RCIN) == pytest.approx(3.0, abs=1e-9)

    def test_no_templates_means_no_reduction(self):
        tp = TaskParams(N=2, I=50, lengths=(5, 7), p=(0.5, 0.5), f=10, n=0)
        assert events_ellipsis(tp) == events_audit(tp)
        assert event_reduction(tp) == 0.0
        assert size_reduction(tp) == 0.0

    def test_all_templated_single_sequence(self):
        tp = TaskParams(N=1, I=1000, lengths=(12,), p=(1.0,), f=7, n=1)
        assert events_audit(tp) == 12007.0
        assert events_ellipsis(tp) == 1007.0
        assert events_hp_best(tp) == 8.0


class TestIdentities:
    def test_event_identity_over_random_params(self):
        rng = random.Random(0xE11)
        for _ in range(1000):
            tp = random_params(rng)
            lhs = event_reduction(tp)
            rhs = events_audit(tp) - events_ellipsis(tp)
            assert math.isclose(lhs, rhs, rel_tol=1e-6, abs_tol=1e-6)

    def test_size_identity_over_random_params(self):
        rng = random.Random(0xE12)
        for _ in range(1000):
            tp = random_params(rng)
            lhs = size_reduction(tp)
            rhs = log_size_audit(tp) - log_size_ellipsis(tp)
            assert math.isclose(lhs, rhs, rel_tol=1e-6, abs_tol=1e-6)

    def test_hp_never_exceeds_ellipsis(self):
        rng = random.Random(0xE13)
        for _ in range(500):
            tp = random_params(rng)
            if tp.I >= tp.n:  # one instance per templated sequence must fit
                assert events_hp_best(tp) <= events_ellipsis(tp) + 1e-9


class TestValidation:
    def test_probability_sum_enforced(self):
        with pytest.raises(ParamsInvalid):
            TaskParams(N=2, I=1, lengths=(2, 2), p=(0.5, 0.499), f=0)

    def test_length_mismatch(self):
        with pytest.raises(ParamsInvalid):
            TaskParams(N=3, I=1, lengths=(2, 2), p=(0.5, 0.5), f=0)

    def test_n_bounds(self):
        with pytest.raises(ParamsInvalid):
            TaskParams(N=1, I=1, lengths=(2,), p=(1.0,), f=0, n=2)

    def test_nonpositive_length(self):
        with pytest.raises(ParamsInvalid):
            TaskParams(N=1, I=1, lengths=(0,), p=(1.0,), f=0)

    def test_dict_round_trip(self):
        back = TaskParams.from_dict(ARDUCOPTER.to_dict())
        assert back == ARDUCOPTER

    def test_from_dict_missing_key(self):
        with pytest.raises(ParamsInvalid):
            TaskParams.from_dict({"N": 1, "I": 1})

    def test_load_params_rejects_bad_file(self, tmp_path):
        with pytest.raises(ParamsInvalid):
            load_params(str(tmp_path / "absent.json"))
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ParamsInvalid):
            load_params(str(bad))

    def test_load_params_reads_rows(self, tmp_path):
        f = tmp_path / "p.json"
        f.write_text('{"schema_version": 1, "tasks": [%s]}'
                     % __import__("json").dumps(ARDUCOPTER.to_dict()))
        rows = load_params(str(f))
        assert rows == [ARDUCOPTER]


class TestCompare:
    def counters(self, ein, eout, bin_, bout):
        return SimpleNamespace(events_in=ein, events_out=eout,
                               bytes_in=bin_, bytes_out=bout)

    def test_within_tolerance_is_ok(self):
        c = self.counters(2091, 856, 1101957, 433632)
        report = compare(ARDUCOPTER, c, mode="ellipsis", tolerance=0.01)
        assert report.ok and report.flags == []

    def test_deviation_is_flagged(self):
        c = self.counters(2091, 2000, 1101957, 433632)
        report = compare(ARDUCOPTER, c, mode="ellipsis", tolerance=0.03)
        assert not report.ok
        assert report.flags == ["events_out"]

    def test_hp_mode_uses_hp_floor(self):
        c = self.counters(2091, 762, 1101957, 300000)
        report = compare(ARDUCOPTER, c, mode="hp", tolerance=0.01)
        assert report.predicted_events_out == pytest.approx(762.0)
        assert "events_out" not in report.flags

    def test_unknown_mode_rejected(self):
        with pytest.raises(ParamsInvalid):
            compare(ARDUCOPTER, self.counters(1, 1, 1, 1), mode="zip")

    def test_report_dict_shape(self):
        c = self.counters(2091, 856, 1101957, 433632)
        d = compare(ARDUCOPTER, c).to_dict()
        assert d["schema_version"] == 1
        assert d["events"]["predicted_out"] == pytest.approx(856.0)
        assert d["ok"] is True
