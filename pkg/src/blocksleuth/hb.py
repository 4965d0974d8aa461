"""Happens-before over a trace, as vector clocks stored per goroutine segment.

Edges: program order, ``GCreate`` to the child's first event, an End
event's ``aux.peer`` (the event that completed it: rendezvous partner,
buffered send, close, signal, or the last ``WGAdd``), and every ``WGAdd``
on a waitgroup to a ``WGWait`` End on it. Lock acquire/release order is
deliberately not an edge: it is exactly the ordering a predictor is asking
to reverse. The one exception is a *forced* lock edge: when an exclusive
holder's acquisition already happens before another goroutine's attempt on
the same mutex, that attempt cannot succeed before the holder's release, in
any schedule, so the release is joined into the new acquisition.

A goroutine's clock only changes at joins, so each goroutine keeps a list
of (first local index, clock) segments; an event's full clock is its
segment clock plus its own local index.
"""

from __future__ import annotations

from bisect import bisect_right

from .events import Phase, SemanticKind, Trace

K = SemanticKind
_ACQUIRE = frozenset({K.MutexLock, K.RWMutexLock, K.RWMutexRLock})
_RELEASE = frozenset({K.MutexUnlock, K.RWMutexUnlock})


def _join(a: dict[int, int], b: dict[int, int]) -> dict[int, int] | None:
    """``a ⊔ b``, or None when ``b`` adds nothing to ``a``."""
    out = None
    for g, v in b.items():
        if a.get(g, -1) < v:
            if out is None:
                out = dict(a)
            out[g] = v
    return out


class HappensBefore:
    def __init__(self, trace: Trace) -> None:
        self._where: dict[int, tuple[int, int]] = {}  # seq -> (gid, local index)
        self._seg_start: dict[int, list[int]] = {}
        self._seg_clock: dict[int, list[dict[int, int]]] = {}
        n_local: dict[int, int] = {}
        child_clock: dict[int, dict[int, int]] = {}
        wg_clock: dict[int, dict[int, int]] = {}
        attempt: dict[int, int] = {}  # gid -> pending acquisition Begin
        holder: dict[int, tuple[int, int]] = {}  # mutex -> (gid, acquisition End) while held
        last: dict[int, tuple[int, int, int]] = {}  # mutex -> (gid, acquisition End, release)
        for e in trace.events:
            g = e.gid
            i = n_local.get(g, 0)
            n_local[g] = i + 1
            self._where[e.seq] = (g, i)
            if i == 0:
                self._seg_start[g] = [0]
                self._seg_clock[g] = [child_clock.pop(g, {})]
            incoming = None
            if e.phase is Phase.End:
                peer = e.aux.get("peer")
                if peer is not None and peer in self._where:
                    incoming = self.clock(peer)
                if e.kind is K.WGWait and e.obj in wg_clock:
                    incoming = wg_clock[e.obj] if incoming is None else (_join(incoming, wg_clock[e.obj]) or incoming)
                if e.kind in _ACQUIRE:
                    prev = last.get(e.obj)
                    b = attempt.pop(g, None)
                    if prev is not None and prev[0] != g and b is not None and self.before(prev[1], b):
                        c = self.clock(prev[2])
                        incoming = c if incoming is None else (_join(incoming, c) or incoming)
            if incoming is not None:
                cur = self._seg_clock[g][-1]
                merged = _join(cur, incoming)
                if merged is not None:
                    self._seg_start[g].append(i)
                    self._seg_clock[g].append(merged)
            if e.kind in _ACQUIRE:
                if e.phase is Phase.Begin:
                    attempt[g] = e.seq
                elif e.phase is Phase.End and e.kind is not K.RWMutexRLock:
                    holder[e.obj] = (g, e.seq)
            elif e.kind in _RELEASE and "fault" not in e.aux:
                h = holder.pop(e.obj, None)
                if h is not None:
                    last[e.obj] = (h[0], h[1], e.seq)
            if e.kind is K.GCreate:
                child = e.aux.get("child_gid", e.obj)
                if child is not None:
                    child_clock[int(child)] = self.clock(e.seq)
            elif e.kind is K.WGAdd:
                c = self.clock(e.seq)
                prev = wg_clock.get(e.obj)
                wg_clock[e.obj] = c if prev is None else (_join(prev, c) or prev)

    def clock(self, seq: int) -> dict[int, int]:
        """Full vector clock of the event ``seq`` (a fresh dict)."""
        g, i = self._where[seq]
        k = bisect_right(self._seg_start[g], i) - 1
        c = dict(self._seg_clock[g][k])
        c[g] = i
        return c

    def before(self, a: int, b: int) -> bool:
        """True iff event ``a`` happens before event ``b`` (strictly)."""
        if a == b:
            return False
        ga, ia = self._where[a]
        gb, ib = self._where[b]
        if ga == gb:
            return ia < ib
        k = bisect_right(self._seg_start[gb], ib) - 1
        return self._seg_clock[gb][k].get(ga, -1) >= ia

    def concurrent(self, a: int, b: int) -> bool:
        return a != b and not self.before(a, b) and not self.before(b, a)
