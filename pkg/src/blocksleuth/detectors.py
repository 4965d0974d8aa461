"""Postmortem detection of operations blocked at the end of a trace.

"Program end" is the end of the trace: a blocking-capable Begin with no
matching End is an operation that never returned.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

from .events import BLOCKING_KINDS, Event, Phase, SemanticKind, Trace
from .findings import BugFinding, FindingKind, Provenance

K = SemanticKind
CAUSE_WINDOW = 8

COND_ANY_SIGNAL = "any-signal"
COND_WAKEUP = "wakeup"


@dataclass
class TraceIndex:
    """Everything the detectors need, gathered in one pass over the trace."""

    events: dict[int, Event] = field(default_factory=dict)
    pending: dict[int, Event] = field(default_factory=dict)
    created: dict[int, Event] = field(default_factory=dict)
    exited: set[int] = field(default_factory=set)
    last_event: dict[int, Event] = field(default_factory=dict)
    capacity: dict[int, int] = field(default_factory=dict)
    ctx_created: dict[int, Event] = field(default_factory=dict)
    ctx_cancelled: set[int] = field(default_factory=set)
    wg_counter: dict[int, int] = field(default_factory=dict)
    wg_negative: list[Event] = field(default_factory=list)
    cond_ops: dict[int, list[Event]] = field(default_factory=lambda: defaultdict(list))
    chan_ops: dict[int, deque] = field(default_factory=dict)
    faults: list[Event] = field(default_factory=list)
    main_gid: int | None = None

    @classmethod
    def build(cls, trace: Trace) -> "TraceIndex":
        ix = cls()
        pending = ix.pending
        for e in trace.events:
            ix.events[e.seq] = e
            ix.last_event[e.gid] = e
            kind = e.kind
            if kind in BLOCKING_KINDS:
                if e.phase is Phase.Begin:
                    pending[e.gid] = e
                elif e.phase is Phase.End:
                    b = pending.get(e.gid)
                    if b is not None and b.match_key() == e.match_key():
                        del pending[e.gid]
                if kind is K.ChanSend or kind is K.ChanRecv:
                    if e.phase is Phase.Begin:
                        ix._chan_touch(e.obj, e)
                elif kind is K.Select and e.phase is Phase.Begin:
                    for ch, _ in e.candidates():
                        ix._chan_touch(ch, e)
                elif kind is K.CondWait:
                    ix.cond_ops[e.obj].append(e)
            elif kind is K.GCreate:
                ix.created[int(e.aux.get("child_gid", e.obj))] = e
            elif kind is K.GExit:
                ix.exited.add(e.gid)
            elif kind is K.MainStart:
                ix.main_gid = e.gid
            elif kind is K.ChanCreate:
                ix.capacity[e.obj] = int(e.aux.get("capacity", 0))
            elif kind is K.ChanClose:
                ix._chan_touch(e.obj, e)
            elif kind is K.CtxCreate:
                ix.ctx_created[e.obj] = e
            elif kind is K.CtxCancel:
                ix.ctx_cancelled.add(e.obj)
            elif kind is K.WGAdd:
                n = ix.wg_counter.get(e.obj, 0) + int(e.aux.get("delta", 0))
                ix.wg_counter[e.obj] = n
                if n < 0 and "fault" not in e.aux:
                    ix.wg_negative.append(e)
            elif kind is K.CondSignal or kind is K.CondBroadcast:
                ix.cond_ops[e.obj].append(e)
            if "fault" in e.aux:
                ix.faults.append(e)
        return ix

    def _chan_touch(self, ch: int, e: Event) -> None:
        q = self.chan_ops.get(ch)
        if q is None:
            q = self.chan_ops[ch] = deque(maxlen=CAUSE_WINDOW * 4)
        q.append(e)

    def others_on(self, ch: int, gid: int) -> tuple[int, ...]:
        seqs = [e.seq for e in self.chan_ops.get(ch, ()) if e.gid != gid]
        return tuple(sorted(set(seqs[-CAUSE_WINDOW:])))


def _index(trace: Trace, index: TraceIndex | None) -> TraceIndex:
    return index if index is not None else TraceIndex.build(trace)


def _by_seq(findings: list[BugFinding]) -> list[BugFinding]:
    return sorted(findings, key=lambda f: (f.first_seq, f.kind.value))


def detect_blocked_channel_ops(trace: Trace, index: TraceIndex | None = None) -> list[BugFinding]:
    ix = _index(trace, index)
    out = []
    for gid, b in ix.pending.items():
        if b.kind is K.ChanSend or b.kind is K.ChanRecv:
            kind = FindingKind.BlockedChannelSend if b.kind is K.ChanSend else FindingKind.BlockedChannelRecv
            objs = (b.obj,)
        elif b.kind is K.Select:
            kind = FindingKind.BlockedSelect
            objs = tuple(dict.fromkeys(ch for ch, _ in b.candidates()))
        else:
            continue
        causes = sorted({s for ch in objs for s in ix.others_on(ch, gid)})
        out.append(BugFinding(kind, Provenance.Detected, (gid,), (b.seq,), tuple(causes), objs))
    return _by_seq(out)


def detect_blocked_waitgroup(trace: Trace, index: TraceIndex | None = None) -> list[BugFinding]:
    ix = _index(trace, index)
    out = []
    for e in ix.wg_negative:
        out.append(
            BugFinding(FindingKind.Fault, Provenance.Detected, (e.gid,), (), (e.seq,), (e.obj,),
                       detail="negative WaitGroup counter")
        )
    for gid, b in ix.pending.items():
        if b.kind is not K.WGWait:
            continue
        if ix.wg_counter.get(b.obj, 0) == 0:
            continue
        adds = tuple(
            e.seq for e in ix.events.values() if e.kind is K.WGAdd and e.obj == b.obj
        )[-CAUSE_WINDOW:]
        out.append(
            BugFinding(FindingKind.BlockedWaitGroup, Provenance.Detected, (gid,), (b.seq,), adds, (b.obj,),
                       detail=f"counter {ix.wg_counter.get(b.obj, 0)} at end of trace")
        )
    return _by_seq(out)


def detect_blocked_cond(trace: Trace, index: TraceIndex | None = None, mode: str = COND_WAKEUP) -> list[BugFinding]:
    """Report ``CondWait`` calls that no signal or broadcast released.

    ``any-signal`` treats a wait as released by any later signal/broadcast
    from another goroutine, even one consumed by a different waiter.
    ``wakeup`` replays the notify list: each signal wakes the oldest
    unreleased waiter, a broadcast wakes them all.
    """
    if mode not in (COND_ANY_SIGNAL, COND_WAKEUP):
        raise ValueError(f"unknown cond mode {mode!r}")
    ix = _index(trace, index)
    out = []
    for cond, ops in ix.cond_ops.items():
        waiting: list[Event] = []  # begun, not yet woken
        woken: set[int] = set()
        signals: list[Event] = []
        for e in ops:
            if e.kind is K.CondWait:
                if e.phase is Phase.Begin:
                    waiting.append(e)
                elif e.phase is Phase.End:
                    waiting = [w for w in waiting if w.gid != e.gid]
            elif e.kind is K.CondSignal:
                signals.append(e)
                others = [w for w in waiting if w.gid != e.gid]
                if others:
                    woken.add(others[0].seq)
                    waiting.remove(others[0])
            else:
                signals.append(e)
                woken.update(w.seq for w in waiting if w.gid != e.gid)
                waiting = [w for w in waiting if w.gid == e.gid]
        for gid, b in ix.pending.items():
            if b.kind is not K.CondWait or b.obj != cond:
                continue
            if mode == COND_ANY_SIGNAL:
                released = any(s.seq > b.seq and s.gid != gid for s in signals)
            else:
                released = b.seq in woken
            if released:
                continue
            causes = tuple(s.seq for s in signals if s.gid != gid)[-CAUSE_WINDOW:]
            out.append(BugFinding(FindingKind.BlockedCond, Provenance.Detected, (gid,), (b.seq,), causes, (cond,)))
    return _by_seq(out)


def detect_uncanceled_context(trace: Trace, index: TraceIndex | None = None) -> list[BugFinding]:
    ix = _index(trace, index)
    out = []
    for ctx, created in ix.ctx_created.items():
        if ctx in ix.ctx_cancelled:
            continue
        done = created.aux.get("done_channel")
        for gid, b in ix.pending.items():
            waits = (b.kind is K.ChanRecv and b.obj == done) or (
                b.kind is K.Select and any(ch == done and d == "recv" for ch, d in b.candidates())
            )
            if waits:
                out.append(
                    BugFinding(FindingKind.UncanceledContext, Provenance.Detected, (gid,), (b.seq,),
                               (created.seq,), (ctx, done))
                )
    return _by_seq(out)


def detect_faults(trace: Trace, index: TraceIndex | None = None) -> list[BugFinding]:
    """Runtime faults recorded in the trace (send on closed channel and friends)."""
    ix = _index(trace, index)
    out = [
        BugFinding(FindingKind.Fault, Provenance.Detected, (e.gid,), (), (e.seq,),
                   () if e.obj is None else (e.obj,), detail=str(e.aux["fault"]))
        for e in ix.faults
    ]
    return _by_seq(out)


@dataclass
class LeakReport:
    findings: list[BugFinding]
    informational: list[int]


def detect_goroutine_leak(trace: Trace, others: list[BugFinding], index: TraceIndex | None = None) -> LeakReport:
    """Created goroutines that never exited while owning an observed blocked operation.

    Goroutines that simply never recorded a ``GExit`` are listed as
    informational only.
    """
    ix = _index(trace, index)
    blocked_gids: set[int] = set()
    for f in others:
        if f.provenance.observed:
            for s in f.blocked_at:
                e = ix.events.get(s)
                if e is not None and ix.pending.get(e.gid) is e:
                    blocked_gids.add(e.gid)
    out, info = [], []
    for gid in sorted(ix.created, key=lambda g: ix.created[g].seq):
        if gid in ix.exited or gid == ix.main_gid:
            continue
        if gid in blocked_gids:
            b = ix.pending[gid]
            out.append(
                BugFinding(FindingKind.GoroutineLeak, Provenance.Detected, (gid,), (b.seq,),
                           (ix.created[gid].seq,), ())
            )
        else:
            info.append(gid)
    return LeakReport(_by_seq(out), info)
