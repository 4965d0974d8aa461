"""Shared helpers: hand-built events, inline models, quick simulation."""

from __future__ import annotations

import textwrap

import pytest

from blocksleuth.events import Event, Frame, Phase, SemanticKind, Trace
from blocksleuth.model import ProgramModel, parse_model
from blocksleuth.simulator import RoundRobin, Script, run

K = SemanticKind
B, E, A = Phase.Begin, Phase.End, Phase.Atomic


class TraceBuilder:
    """Append events with automatic seq/ts; ``main`` starts the trace."""

    def __init__(self, main: int = 1, program: str = "t") -> None:
        self.events: list[Event] = []
        self.program = program
        self.add(main, K.MainStart, A)

    def add(self, gid: int, kind: SemanticKind, phase: Phase = A, obj: int | None = None,
            line: int = 0, **aux) -> int:
        seq = len(self.events)
        ctx = (Frame(f"g{gid}", "t.go", line or seq + 1),)
        self.events.append(Event(seq, seq, gid, kind, phase, obj, aux, ctx))
        return seq

    def spawn(self, parent: int, child: int) -> int:
        return self.add(parent, K.GCreate, A, child, child_gid=child)

    def op(self, gid: int, kind: SemanticKind, obj: int | None = None, **aux) -> tuple[int, int]:
        """A completed blocking-capable operation (Begin then End)."""
        return self.add(gid, kind, B, obj, **aux), self.add(gid, kind, E, obj, **aux)

    def begin(self, gid: int, kind: SemanticKind, obj: int | None = None, **aux) -> int:
        return self.add(gid, kind, B, obj, **aux)

    def exit(self, gid: int) -> int:
        return self.add(gid, K.GExit, A)

    def trace(self) -> Trace:
        return Trace(tuple(self.events), {"program": self.program, "schema_version": "1", "go_version": None})


def model(text: str, name: str = "inline") -> ProgramModel:
    return parse_model(textwrap.dedent(text), f"{name}.model")


def simulate(text: str, schedule=None, step_bound: int = 100_000):
    if isinstance(schedule, str):
        schedule = Script.parse(schedule)
    return run(model(text), schedule or RoundRobin(), step_bound)


@pytest.fixture
def tb() -> TraceBuilder:
    return TraceBuilder()


ETCD = """\
program etcd_6873
mutex mu
chan donec 0
go 1 main:
    spawn 2
    spawn 3
go 2 g1_closer:
    lock mu
    close donec
    unlock mu
go 3 g2_waiter:
    lock mu
    recv donec
    unlock mu
"""

ABBA = """\
program abba
mutex a
mutex b
go 1 main:
    spawn 2
    lock a
    lock b
    unlock b
    unlock a
go 2 other:
    lock b
    lock a
    unlock a
    unlock b
"""

KUBERNETES = """\
program kubernetes_double_rlock
rwmutex m
go 1 main:
    spawn 17
    spawn 18
go 17 reader:
    rlock m
    rlock m
    runlock m
    runlock m
go 18 writer:
    wlock m
    wunlock m
"""
