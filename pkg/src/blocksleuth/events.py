"""Synchronization-event vocabulary, trace container and trace validity rules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping


class SemanticKind(enum.Enum):
    GCreate = "GCreate"
    GExit = "GExit"
    MainStart = "MainStart"
    ObjCreate = "ObjCreate"
    MutexLock = "MutexLock"
    MutexUnlock = "MutexUnlock"
    RWMutexRLock = "RWMutexRLock"
    RWMutexRUnlock = "RWMutexRUnlock"
    RWMutexLock = "RWMutexLock"
    RWMutexUnlock = "RWMutexUnlock"
    ChanCreate = "ChanCreate"
    ChanSend = "ChanSend"
    ChanRecv = "ChanRecv"
    ChanClose = "ChanClose"
    Select = "Select"
    WGAdd = "WGAdd"
    WGWait = "WGWait"
    CtxCreate = "CtxCreate"
    CtxCancel = "CtxCancel"
    CondWait = "CondWait"
    CondSignal = "CondSignal"
    CondBroadcast = "CondBroadcast"


class Phase(enum.Enum):
    Begin = "B"
    End = "E"
    Atomic = "A"


K = SemanticKind

BLOCKING_KINDS = frozenset(
    {
        K.ChanSend,
        K.ChanRecv,
        K.Select,
        K.WGWait,
        K.CondWait,
        K.MutexLock,
        K.RWMutexRLock,
        K.RWMutexLock,
    }
)
LOCK_KINDS = frozenset({K.MutexLock, K.RWMutexRLock, K.RWMutexLock})
UNLOCK_KINDS = frozenset({K.MutexUnlock, K.RWMutexRUnlock, K.RWMutexUnlock})
# kinds whose object lives elsewhere (gid or aux)
OBJECTLESS_KINDS = frozenset({K.MainStart, K.GExit, K.Select})

_EMPTY: Mapping[str, Any] = {}


def normalize_aux(value: Any) -> Any:
    """Recursively turn lists into tuples so aux payloads compare by value."""
    if isinstance(value, dict):
        return {k: normalize_aux(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return tuple(normalize_aux(v) for v in value)
    return value


@dataclass(frozen=True, slots=True)
class Frame:
    function: str
    file: str
    line: int


@dataclass(frozen=True, slots=True)
class Event:
    seq: int
    ts: int
    gid: int
    kind: SemanticKind
    phase: Phase
    obj: int | None = None
    aux: Mapping[str, Any] = field(default_factory=lambda: _EMPTY)
    ctx: tuple[Frame, ...] = ()

    @property
    def is_begin(self) -> bool:
        return self.phase is Phase.Begin

    @property
    def is_end(self) -> bool:
        return self.phase is Phase.End

    def candidates(self) -> tuple[tuple[int, str], ...]:
        return tuple(self.aux.get("candidates", ()))

    def match_key(self) -> tuple:
        """Identity used to pair a Begin with its End."""
        if self.kind is K.Select:
            return (self.gid, self.kind, self.candidates())
        return (self.gid, self.kind, self.obj)

    @property
    def location(self) -> Frame | None:
        return self.ctx[0] if self.ctx else None


@dataclass(frozen=True)
class Trace:
    events: tuple[Event, ...]
    meta: Mapping[str, Any] = field(
        default_factory=lambda: {"program": "", "schema_version": "1", "go_version": None}
    )

    def __post_init__(self) -> None:
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def by_seq(self) -> dict[int, Event]:
        return {e.seq: e for e in self.events}

    @property
    def main_gid(self) -> int | None:
        for e in self.events:
            if e.kind is K.MainStart:
                return e.gid
        return None


@dataclass(frozen=True, slots=True)
class Violation:
    rule: str
    seq: int
    message: str


_REQUIRED_AUX = {
    K.ChanCreate: ("capacity",),
    K.Select: ("candidates", "has_default"),
    K.WGAdd: ("delta",),
    K.CtxCreate: ("done_channel",),
    K.GCreate: ("child_gid",),
}


def validate_trace(trace: Trace | Iterable[Event]) -> list[Violation]:
    """Check the structural invariants of a trace.

    Returns the violations sorted by ``seq``; an empty list means the trace
    is well formed. The input is never modified.
    """
    events = trace.events if isinstance(trace, Trace) else tuple(trace)
    out: list[Violation] = []
    main = next((e.gid for e in events if e.kind is K.MainStart), None)
    known: set[int] = set() if main is None else {main}
    last_seq: int | None = None
    last_ts: dict[int, int] = {}
    pending: dict[int, Event] = {}
    seen_main = False

    for e in events:
        if last_seq is not None and e.seq <= last_seq:
            out.append(Violation("seq-order", e.seq, f"seq {e.seq} not greater than {last_seq}"))
        last_seq = e.seq if last_seq is None else max(last_seq, e.seq)

        if e.gid in last_ts and e.ts < last_ts[e.gid]:
            out.append(Violation("ts-order", e.seq, f"timestamp decreases in goroutine {e.gid}"))
        last_ts[e.gid] = max(e.ts, last_ts.get(e.gid, e.ts))

        if e.kind is K.MainStart:
            if seen_main:
                out.append(Violation("main-start", e.seq, "duplicate MainStart"))
            seen_main = True
        if e.gid not in known:
            out.append(Violation("unknown-goroutine", e.seq, f"unknown goroutine {e.gid}"))
            known.add(e.gid)  # report once per gid
        if e.kind is K.GCreate and "child_gid" in e.aux:
            known.add(int(e.aux["child_gid"]))

        blocking = e.kind in BLOCKING_KINDS
        if blocking and e.phase is Phase.Atomic:
            out.append(Violation("phase-kind", e.seq, f"{e.kind.value} must be Begin/End"))
        if not blocking and e.phase is not Phase.Atomic:
            out.append(Violation("phase-kind", e.seq, f"{e.kind.value} must be Atomic"))

        if e.obj is None and e.kind not in OBJECTLESS_KINDS:
            out.append(Violation("missing-field", e.seq, f"{e.kind.value} needs an object"))
        for key in _REQUIRED_AUX.get(e.kind, ()):
            if key not in e.aux:
                out.append(Violation("missing-field", e.seq, f"{e.kind.value} aux needs {key!r}"))

        if blocking and e.phase is Phase.Begin:
            if e.gid in pending:
                out.append(Violation("nested-begin", e.seq, f"goroutine {e.gid} already has a pending operation"))
            pending[e.gid] = e
        elif blocking and e.phase is Phase.End:
            b = pending.get(e.gid)
            if b is None or b.match_key() != e.match_key():
                out.append(Violation("unmatched-end", e.seq, "unmatched end"))
            else:
                del pending[e.gid]

    out.sort(key=lambda v: v.seq)
    return out


def pending_begins(events: Iterable[Event]) -> dict[int, Event]:
    """Blocking-capable Begin events still open at the end of the trace, by gid."""
    pending: dict[int, Event] = {}
    for e in events:
        if e.kind in BLOCKING_KINDS:
            if e.phase is Phase.Begin:
                pending[e.gid] = e
            elif e.phase is Phase.End:
                b = pending.get(e.gid)
                if b is not None and b.match_key() == e.match_key():
                    del pending[e.gid]
    return pending
