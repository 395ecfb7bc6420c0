"""Shared fixtures: golden record lines and small workload builders."""

import pytest

from ellipsis_audit import (SequenceSpec, TaskSpec, TemplateEntry,
                            WorkloadSpec, generate)

# Reference arducopter lines (fixed-width 9-digit fractions, arm32 arch).
GOLDEN_SYSCALL_LINES = [
    'type=SYSCALL msg=audit(1601405431.612391356:5893330): arch=40000028 '
    'syscall=4 per=800000 success=yes exit=8 a0=3 a1=126aa4 a2=1 a3=3 '
    'items=0 ppid=1513 pid=1526 tid=1526 auid=1000 uid=0 gid=0 euid=0 '
    'suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=pts0 ses=1 comm="arducopter" '
    'exe="/home/pi/ardupilot/build/navio2/bin/arducopter" key=(null)',
    'type=SYSCALL msg=audit(1601405431.612391366:5893333): arch=40000028 '
    'syscall=4 per=800000 success=yes exit=7 a0=4 a1=126ab0 a2=1 a3=3 '
    'items=0 ppid=1513 pid=1526 tid=1526 auid=1000 uid=0 gid=0 euid=0 '
    'suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=pts0 ses=1 comm="arducopter" '
    'exe="/home/pi/ardupilot/build/navio2/bin/arducopter" key=(null)',
    'type=SYSCALL msg=audit(1601405431.612391367:5893334): arch=40000028 '
    'syscall=4 per=800000 success=yes exit=7 a0=5 a1=126ab8 a2=1 a3=3 '
    'items=0 ppid=1513 pid=1526 tid=1526 auid=1000 uid=0 gid=0 euid=0 '
    'suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=pts0 ses=1 comm="arducopter" '
    'exe="/home/pi/ardupilot/build/navio2/bin/arducopter" key=(null)',
]

# Summary record covering the three lines above (rep=1, double space where
# syscall= would sit).
GOLDEN_MATCH_LINE = (
    'type=SYSCALL msg=audit(1601405431.612391370:5893335): arch=40000028  '
    'per=800000 template=arducopter rep=1 stime=1601405431612391356 '
    'etime=1601405431612391367 ppid=1513 pid=1526 tid=1526 auid=1000 uid=0 '
    'gid=0 euid=0 suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=pts0 ses=1 '
    'comm="arducopter" exe="/home/pi/ardupilot/build/navio2/bin/arducopter" '
    'key=(null)')

# Ten folded iterations on a different task identity.
GOLDEN_MATCH_LINE_REP10 = (
    'type=SYSCALL msg=audit(1601405431.612391356:5893330): arch=40000028  '
    'per=800000 template=arducopter rep=10 stime=1601405431589320747 '
    'etime=1601405431612287042 ppid=1208 pid=1261 tid=1261 auid=1000 uid=0 '
    'gid=0 euid=0 suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=pts0 ses=3 '
    'comm="arducopter" exe="/home/pi/ardupilot/build/navio2/bin/arducopter" '
    'key=(null)')

GOLDEN_TEMPLATE_FILE = ("arducopter\n3\n1303419\n5012313\n"
                        "4:3:-1:1:-1\n4:4:-1:1:-1\n4:5:-1:1:-1")


def make_task(comm="work", pid=700, tid=700, sequences=None, iterations=20,
              period_ns=2_000_000, f=3, **kw):
    if sequences is None:
        sequences = (SequenceSpec(
            entries=(TemplateEntry(4, 3, -1, 1, -1),
                     TemplateEntry(4, 4, -1, 1, -1),
                     TemplateEntry(3, 5, -1, 16, -1)),
            probability=1.0, duration_ns=400_000),)
    return TaskSpec(comm=comm, pid=pid, tid=tid, sequences=sequences,
                    iterations=iterations, period_ns=period_ns, f=f, **kw)


@pytest.fixture
def small_workload():
    """One task, one deterministic sequence, boundaries on."""
    return WorkloadSpec(tasks=(make_task(),), seed=5)


@pytest.fixture
def small_trace(small_workload):
    return list(generate(small_workload))
