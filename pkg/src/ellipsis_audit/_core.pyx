# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of the hot loops: per-task automaton stepping and the
bounded-buffer simulation.

The stepper walks the flattened automaton arrays produced by
``Automaton.flatten`` and must emit exactly what the pure
``reduction.TaskReducer`` emits, record object for record object.  All
record construction is delegated to injected Python callables so the two
engines cannot drift in serialization behavior.  Cross-engine equivalence
is enforced by property tests.
"""

from array import array


cdef inline unsigned long long _mix64(unsigned long long *state) noexcept:
    cdef unsigned long long z
    state[0] = state[0] + 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef class NativeTaskStepper:
    """Drop-in replacement for reduction.TaskReducer (step/finish and the
    four counters); one instance per task."""

    cdef long long[::1] nd_start, nd_count, nd_accept
    cdef long long[::1] ch_sys, ch_a0, ch_a1, ch_a2, ch_a3, ch_next
    cdef long long[::1] t_rt, t_ia
    cdef list templates
    cdef bint hp_mode, enforce_temporal
    cdef object em_cls, make_rec, oops_exc, kind_syscall

    cdef public long long matches, failures
    cdef public long long comparisons_total, max_comparisons_per_step

    cdef Py_ssize_t cur
    cdef list pending
    cdef long long pend_stime
    cdef bint has_last_ts
    cdef long long last_ts

    cdef bint hp_active
    cdef Py_ssize_t hp_tpl
    cdef long long hp_rep, hp_stime, hp_etime, hp_last_start
    cdef object hp_head

    def __init__(self, dict flat, list templates, bint hp_mode,
                 bint enforce_temporal, object em_cls, object make_rec,
                 object oops_exc, object kind_syscall):
        self.nd_start = flat["nd_start"]
        self.nd_count = flat["nd_count"]
        self.nd_accept = flat["nd_accept"]
        self.ch_sys = flat["ch_sys"]
        self.ch_a0 = flat["ch_a0"]
        self.ch_a1 = flat["ch_a1"]
        self.ch_a2 = flat["ch_a2"]
        self.ch_a3 = flat["ch_a3"]
        self.ch_next = flat["ch_next"]
        self.t_rt = flat["t_rt"]
        self.t_ia = flat["t_ia"]
        self.templates = templates
        self.hp_mode = hp_mode
        self.enforce_temporal = enforce_temporal
        self.em_cls = em_cls
        self.make_rec = make_rec
        self.oops_exc = oops_exc
        self.kind_syscall = kind_syscall
        self.cur = 0
        self.pending = []
        self.has_last_ts = False
        self.hp_active = False

    # ------------------------------------------------------------ record io

    cdef int _load_args(self, object record, long long *a, bint *present) except -1:
        # absent, unknown, or out-of-range values can never satisfy a
        # constraint (constraints are flatten-checked to fit int64)
        cdef Py_ssize_t i
        cdef object v
        cdef tuple vals = (record.a0, record.a1, record.a2, record.a3)
        for i in range(4):
            v = vals[i]
            present[i] = False
            if isinstance(v, int):
                try:
                    a[i] = <long long> v
                except OverflowError:
                    continue
                if a[i] >= 0:
                    present[i] = True
        return 0

    cdef Py_ssize_t _match_child(self, Py_ssize_t node, bint is_sys,
                                 long long sys_no, bint sys_ok,
                                 long long *a, bint *present,
                                 long long *cmp_count) noexcept:
        """Index of the next node, or -1.  Children try in insertion
        order, first full match wins; every child tried costs one
        comparison."""
        cdef Py_ssize_t k, j
        cdef long long want
        for k in range(self.nd_count[node]):
            j = self.nd_start[node] + k
            cmp_count[0] += 1
            if not is_sys or not sys_ok or self.ch_sys[j] != sys_no:
                continue
            want = self.ch_a0[j]
            if want != -1 and (not present[0] or a[0] != want):
                continue
            want = self.ch_a1[j]
            if want != -1 and (not present[1] or a[1] != want):
                continue
            want = self.ch_a2[j]
            if want != -1 and (not present[2] or a[2] != want):
                continue
            want = self.ch_a3[j]
            if want != -1 and (not present[3] or a[3] != want):
                continue
            return self.ch_next[j]
        return -1

    # ------------------------------------------------------------ emission

    cdef int _flush_hp(self, long long now, list out) except -1:
        if self.hp_active:
            out.append(self.em_cls(self.make_rec(
                self.templates[self.hp_tpl], self.hp_rep, self.hp_stime,
                self.hp_etime, self.hp_head, now), True))
            self.hp_active = False
            self.hp_head = None
        return 0

    cdef int _flush_pending(self, list out) except -1:
        cdef object r
        if self.pending:
            self.failures += 1
            for r in self.pending:
                out.append(self.em_cls(r, False))
            self.pending = []
        return 0

    cdef int _complete(self, Py_ssize_t tpl_idx, long long stime,
                       long long etime, long long now, list out) except -1:
        cdef object head = self.pending[0]
        self.pending = []
        if not self.hp_mode:
            out.append(self.em_cls(self.make_rec(
                self.templates[tpl_idx], 1, stime, etime, head, now), True))
            return 0
        cdef long long ia
        if self.hp_active and self.hp_tpl == tpl_idx:
            ia = self.t_ia[tpl_idx]
            if not self.enforce_temporal or ia == 0 or stime - self.hp_last_start <= ia:
                self.hp_rep += 1
                self.hp_etime = etime
                self.hp_last_start = stime
                return 0
        self._flush_hp(now, out)
        self.hp_active = True
        self.hp_tpl = tpl_idx
        self.hp_rep = 1
        self.hp_stime = stime
        self.hp_etime = etime
        self.hp_last_start = stime
        self.hp_head = head
        return 0

    cdef int _advance(self, object record, Py_ssize_t node, long long ts,
                      long long now, list out) except -1:
        cdef long long stime, etime, rt
        cdef Py_ssize_t tpl_idx
        if not self.pending:
            self.pend_stime = ts
        self.pending.append(record)
        tpl_idx = self.nd_accept[node]
        if tpl_idx < 0:
            self.cur = node
            return 0
        stime = self.pend_stime
        etime = ts
        rt = self.t_rt[tpl_idx]
        if not self.enforce_temporal or rt == 0 or etime - stime <= rt:
            self.matches += 1
            self._complete(tpl_idx, stime, etime, now, out)
        else:
            self.failures += 1
            self._flush_hp(now, out)
            for r in self.pending:
                out.append(self.em_cls(r, False))
            self.pending = []
        self.cur = 0
        return 0

    # ------------------------------------------------------------ public api

    def step(self, object record, object now_ns=None):
        cdef long long ts = record.ts_sec * 1_000_000_000 + record.ts_nanos
        if self.has_last_ts and ts < self.last_ts:
            raise self.oops_exc(
                f"timestamp {ts} after {self.last_ts} for task "
                f"{(record.pid, record.tid)}")
        self.has_last_ts = True
        self.last_ts = ts
        cdef long long now = ts if now_ns is None else <long long> now_ns

        cdef long long a[4]
        cdef bint present[4]
        cdef long long sys_no = 0
        cdef bint sys_ok = False
        cdef bint is_sys = record.kind is self.kind_syscall
        cdef object v
        if is_sys:
            v = record.syscall_no
            if isinstance(v, int):
                try:
                    sys_no = <long long> v
                    sys_ok = True
                except OverflowError:
                    sys_ok = False
            self._load_args(record, a, present)

        cdef long long cmp_count = 0
        cdef list out = []
        cdef Py_ssize_t nxt = self._match_child(
            self.cur, is_sys, sys_no, sys_ok, a, present, &cmp_count)
        if nxt >= 0:
            self._advance(record, nxt, ts, now, out)
        else:
            self._flush_hp(now, out)
            self._flush_pending(out)
            self.cur = 0
            nxt = self._match_child(0, is_sys, sys_no, sys_ok, a, present,
                                    &cmp_count)
            if nxt >= 0:
                self._advance(record, nxt, ts, now, out)
            else:
                out.append(self.em_cls(record, False))
        if cmp_count > self.max_comparisons_per_step:
            self.max_comparisons_per_step = cmp_count
        self.comparisons_total += cmp_count
        return out

    def finish(self, object now_ns=None):
        cdef long long now
        if now_ns is not None:
            now = <long long> now_ns
        elif self.has_last_ts:
            now = self.last_ts
        else:
            now = 0
        cdef list out = []
        self._flush_hp(now, out)
        self._flush_pending(out)
        self.cur = 0
        return out


def simulate_buffer(long long[::1] arrivals, long long capacity,
                    long long period, long long burst, long long jitter,
                    unsigned long long seed, long long sample_period,
                    object exc_cls=ValueError):
    """Twin of buffer_sim._simulate_py; returns (offered, delivered, lost,
    max_occupancy, samples)."""
    cdef long long occupancy = 0, max_occ = 0, lost = 0, delivered = 0
    cdef long long tick = 1
    cdef unsigned long long rng = seed
    cdef long long next_drain, next_sample = 0
    cdef bint sampling = sample_period > 0
    cdef Py_ssize_t n = arrivals.shape[0], i = 0
    cdef long long t, take, prev_arr = 0
    cdef bint have_prev = False
    cdef int kind
    cdef list samples = []

    next_drain = tick * period
    if jitter:
        next_drain += <long long> (_mix64(&rng) % <unsigned long long> (jitter + 1))

    while i < n or occupancy > 0:
        kind = 0
        t = next_drain
        if sampling and next_sample < t:
            kind = 1
            t = next_sample
        if i < n and arrivals[i] < t:
            kind = 2
            t = arrivals[i]
        if kind == 0:
            take = occupancy if occupancy < burst else burst
            occupancy -= take
            delivered += take
            tick += 1
            next_drain = tick * period
            if jitter:
                next_drain += <long long> (_mix64(&rng) % <unsigned long long> (jitter + 1))
        elif kind == 1:
            samples.append((t, occupancy))
            next_sample += sample_period
        else:
            if have_prev and t < prev_arr:
                raise exc_cls("arrivals must be sorted")
            have_prev = True
            prev_arr = t
            if occupancy >= capacity:
                lost += 1
            else:
                occupancy += 1
                if occupancy > max_occ:
                    max_occ = occupancy
            i += 1
    return (n, delivered, lost, max_occ, samples)
