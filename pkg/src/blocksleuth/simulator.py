"""Deterministic execution of program models under controlled schedules.

The machine steps one goroutine at a time. A step either starts the
goroutine's next operation (emitting its events, possibly leaving it
blocked) or resumes a blocked goroutine whose operation can now finish.

Semantics follow the Go runtime where it matters for blocking:

* unbuffered channels rendezvous; the arriving side completes its partner
  (FIFO) and the partner emits its End when next scheduled;
* buffered send blocks iff the buffer is full, receive iff it is empty and
  the channel is open; receive on a closed channel returns the zero value;
* send on a closed channel, double close, unlock of an unlocked mutex and a
  negative WaitGroup counter are faults that halt the goroutine;
* a pending writer blocks new readers of an RWMutex;
* signals with no waiter are lost; ``condwait`` releases its mutex in the
  same step it blocks and reacquires it after being woken.

Script picks are consumed only at choice points, i.e. when more than one
(goroutine, select case) option exists. Once a script is exhausted the
lowest runnable goroutine runs, taking its lowest ready select case.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Union

from .events import Event, Frame, Phase, SemanticKind, Trace
from .model import ModelError, Op, ProgramModel

K = SemanticKind
DEFAULT_STEP_BOUND = 100_000
OBJECT_BASE = 0x100


class ScheduleError(RuntimeError):
    pass


@dataclass(frozen=True)
class RoundRobin:
    pass


@dataclass(frozen=True)
class SeededRandom:
    seed: int


@dataclass(frozen=True)
class Script:
    picks: tuple[tuple[int, int | None], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "Script":
        picks = []
        for line in text.splitlines():
            line = line.split("#", 1)[0]
            for tok in line.replace(",", " ").split():
                gid, _, case = tok.partition(":")
                try:
                    picks.append((int(gid), int(case) if case else None))
                except ValueError:
                    raise ScheduleError(f"bad script pick {tok!r}") from None
        return cls(tuple(picks))

    def format(self) -> str:
        toks = [str(g) if k is None else f"{g}:{k}" for g, k in self.picks]
        return " ".join(toks) + "\n"


Schedule = Union[RoundRobin, SeededRandom, Script]


@dataclass(frozen=True)
class Fault:
    gid: int
    op_index: int
    message: str


@dataclass(frozen=True)
class ChannelStats:
    sends: int
    recv_values: int
    recv_zero: int
    buffered: int


@dataclass
class GroundTruth:
    completed: frozenset[int]
    blocked: dict[int, tuple[int, str]]
    leaked: frozenset[int]
    faults: list[Fault]
    outcome: str  # "completed" | "global_block" | "step_bound"
    steps: int = 0
    channels: dict[str, ChannelStats] = field(default_factory=dict)

    @property
    def globally_blocked(self) -> bool:
        return self.outcome == "global_block"


# ---------------------------------------------------------------------------
# mutable machine state


class _Wait:
    __slots__ = ("kind", "op", "begin", "done", "result", "ev_kind", "obj")

    def __init__(self, kind, op, begin, ev_kind, obj):
        self.kind = kind
        self.op = op
        self.begin = begin
        self.done = False
        self.result: dict = {}
        self.ev_kind = ev_kind
        self.obj = obj

    def copy(self) -> "_Wait":
        w = _Wait(self.kind, self.op, self.begin, self.ev_kind, self.obj)
        w.done = self.done
        w.result = dict(self.result)
        return w

    def key(self):
        return (self.kind, self.done, self.result.get("case"), self.result.get("ok"), self.result.get("fault"))


class _Thread:
    __slots__ = ("gid", "pc", "status", "wait")

    def __init__(self, gid):
        self.gid = gid
        self.pc = 0
        self.status = "run"  # run | wait | exited | faulted
        self.wait: _Wait | None = None

    def copy(self) -> "_Thread":
        t = _Thread(self.gid)
        t.pc, t.status = self.pc, self.status
        t.wait = self.wait.copy() if self.wait else None
        return t


class _Chan:
    __slots__ = ("cap", "buf", "closed", "close_seq", "recvq", "sendq", "stats")

    def __init__(self, cap):
        self.cap = cap
        self.buf: list[int] = []
        self.closed = False
        self.close_seq = None
        self.recvq: list[tuple[int, int | None]] = []
        self.sendq: list[tuple[int, int | None]] = []
        self.stats = [0, 0, 0]  # sends, value receives, zero receives

    def copy(self) -> "_Chan":
        c = _Chan(self.cap)
        c.buf = list(self.buf)
        c.closed, c.close_seq = self.closed, self.close_seq
        c.recvq, c.sendq = list(self.recvq), list(self.sendq)
        c.stats = list(self.stats)
        return c

    def key(self):
        return (len(self.buf), self.closed, tuple(self.recvq), tuple(self.sendq))


class Machine:
    """Explicit-state interpreter for one :class:`ProgramModel`."""

    def __init__(self, model: ProgramModel, record: bool = True) -> None:
        self.model = model
        self.record = record
        self.events: list[Event] = []
        self.seq = 0
        self.step_no = 0
        self.ids: dict[str, int] = {}
        for i, name in enumerate(model.objects):
            self.ids[name] = OBJECT_BASE + i
        self.holder: dict[str, int | None] = {}
        self.writer: dict[str, int | None] = {}
        self.readers: dict[str, dict[int, int]] = {}
        self.chans: dict[str, _Chan] = {}
        self.wg: dict[str, list] = {}  # name -> [count, waiters]
        self.cond: dict[str, list[int]] = {}
        for name, d in model.objects.items():
            if d.type == "mutex":
                self.holder[name] = None
            elif d.type == "rwmutex":
                self.writer[name] = None
                self.readers[name] = {}
            elif d.type == "chan":
                self.chans[name] = _Chan(d.capacity)
            elif d.type == "waitgroup":
                self.wg[name] = [0, []]
            elif d.type == "cond":
                self.cond[name] = []
        self.threads: dict[int, _Thread] = {}
        self.faults: list[Fault] = []
        self.choices: list[tuple[int, int | None]] = []
        self._start()

    # -- bookkeeping -------------------------------------------------------

    def clone(self) -> "Machine":
        m = Machine.__new__(Machine)
        m.model, m.record = self.model, False
        m.events = []
        m.seq, m.step_no = self.seq, self.step_no
        m.ids = self.ids
        m.holder = dict(self.holder)
        m.writer = dict(self.writer)
        m.readers = {k: dict(v) for k, v in self.readers.items()}
        m.chans = {k: c.copy() for k, c in self.chans.items()}
        m.wg = {k: [v[0], list(v[1])] for k, v in self.wg.items()}
        m.cond = {k: list(v) for k, v in self.cond.items()}
        m.threads = {g: t.copy() for g, t in self.threads.items()}
        m.faults = list(self.faults)
        m.choices = list(self.choices)
        return m

    def key(self) -> tuple:
        return (
            tuple((g, t.pc, t.status, t.wait.key() if t.wait else None) for g, t in sorted(self.threads.items())),
            tuple(self.holder.values()),
            tuple(self.writer.values()),
            tuple(tuple(sorted(r.items())) for r in self.readers.values()),
            tuple(c.key() for c in self.chans.values()),
            tuple((v[0], tuple(v[1])) for v in self.wg.values()),
            tuple(tuple(v) for v in self.cond.values()),
        )

    def _frame(self, gid: int, line: int) -> tuple[Frame, ...]:
        body = self.model.goroutines[gid]
        return (Frame(body.label, self.model.file_name, line),)

    def _emit(self, gid, kind, phase, obj=None, aux=None, line=0) -> int:
        seq = self.seq
        self.seq += 1
        if self.record:
            self.events.append(
                Event(seq, self.step_no, gid, kind, phase, obj, aux or {}, self._frame(gid, line))
            )
        return seq

    def _start(self) -> None:
        entry = self.model.entry
        body = self.model.goroutines[entry]
        self._emit(entry, K.MainStart, Phase.Atomic, line=body.line)
        for name, d in self.model.objects.items():
            if d.type == "chan" and not d.implicit:
                self._emit(entry, K.ChanCreate, Phase.Atomic, self.ids[name], {"capacity": d.capacity}, body.line)
            elif d.type == "context":
                done = name + ".done"
                self._emit(entry, K.ChanCreate, Phase.Atomic, self.ids[done], {"capacity": 0}, body.line)
                self._emit(entry, K.CtxCreate, Phase.Atomic, self.ids[name], {"done_channel": self.ids[done]}, body.line)
        self.threads[entry] = _Thread(entry)

    # -- readiness ---------------------------------------------------------

    def _lock_free(self, name: str, mode: str) -> bool:
        if mode == "lock":
            return self.holder[name] is None
        if mode == "wlock":
            return self.writer[name] is None and not self.readers[name]
        # rlock: no writer holding and no writer pending
        if self.writer[name] is not None:
            return False
        return not any(t.status == "wait" and self._pending_writer(t.wait, name) for t in self.threads.values())

    def _pending_writer(self, w: _Wait, name: str) -> bool:
        if w.kind == "wlock":
            return w.op.obj == name
        return w.kind == "relock" and w.op.arg == name and self._locker_mode(name) == "wlock"

    def _locker_mode(self, name: str) -> str:
        return "lock" if self.model.objects[name].type == "mutex" else "wlock"

    def _chan_ready(self, gid: int, name: str, dir: str) -> bool:
        c = self.chans[name]
        if c.closed:
            return True
        if dir == "send":
            if c.cap:
                return len(c.buf) < c.cap
            return any(g != gid for g, _ in c.recvq)
        if c.cap:
            return bool(c.buf)
        return any(g != gid for g, _ in c.sendq)

    def _ready_cases(self, gid: int, op: Op) -> list[int]:
        return [k for k, case in enumerate(op.cases) if self._chan_ready(gid, case.chan, case.dir)]

    def _wait_ready(self, t: _Thread) -> bool:
        w = t.wait
        if w.done:
            return True
        if w.kind in ("lock", "rlock", "wlock"):
            return self._lock_free(w.op.obj, w.kind)
        if w.kind == "relock":
            return self._lock_free(w.op.arg, self._locker_mode(w.op.arg))
        if w.kind in ("send", "recv"):
            return self._chan_ready(t.gid, w.op.obj, w.kind)
        if w.kind == "select":
            return bool(self._ready_cases(t.gid, w.op))
        return False  # wgwait / condwait complete only by handoff

    def _next_op(self, t: _Thread) -> Op | None:
        ops = self.model.goroutines[t.gid].ops
        return ops[t.pc] if t.pc < len(ops) else None

    def options(self) -> list[tuple[int, int | None]]:
        opts: list[tuple[int, int | None]] = []
        for gid in sorted(self.threads):
            t = self.threads[gid]
            if t.status == "run":
                op = self._next_op(t)
                if op is not None and op.name == "select":
                    ready = self._ready_cases(gid, op)
                    opts.extend((gid, k) for k in ready) if ready else opts.append((gid, None))
                else:
                    opts.append((gid, None))
            elif t.status == "wait" and self._wait_ready(t):
                if t.wait.kind == "select" and not t.wait.done:
                    opts.extend((gid, k) for k in self._ready_cases(gid, t.wait.op))
                else:
                    opts.append((gid, None))
        return opts

    def runnable(self) -> list[int]:
        return sorted({g for g, _ in self.options()})

    # -- stepping ----------------------------------------------------------

    def step(self, gid: int, case: int | None = None) -> None:
        t = self.threads.get(gid)
        if t is None or t.status in ("exited", "faulted"):
            raise ScheduleError(f"goroutine {gid} is not runnable")
        self.step_no += 1
        if t.status == "wait":
            if not self._wait_ready(t):
                raise ScheduleError(f"goroutine {gid} is blocked")
            self._resume(t, case)
        else:
            self._exec(t, case)

    def _fault(self, t: _Thread, message: str) -> None:
        t.status = "faulted"
        t.wait = None
        self.faults.append(Fault(t.gid, t.pc, message))

    def _block(self, t: _Thread, kind: str, op: Op, begin: int, ev_kind, obj) -> None:
        t.status = "wait"
        t.wait = _Wait(kind, op, begin, ev_kind, obj)

    def _finish(self, t: _Thread) -> None:
        t.status = "run"
        t.wait = None
        t.pc += 1

    def _exec(self, t: _Thread, case: int | None) -> None:
        op = self._next_op(t)
        g = t.gid
        if op is None or op.name == "exit":
            line = op.line if op else (self.model.goroutines[g].ops[-1].line if self.model.goroutines[g].ops else 0)
            self._emit(g, K.GExit, Phase.Atomic, line=line)
            t.status = "exited"
            return
        name, line = op.name, op.line
        oid = self.ids.get(op.obj) if op.obj else None

        if name == "spawn":
            child = op.arg
            self._emit(g, K.GCreate, Phase.Atomic, child, {"child_gid": child}, line)
            self.threads[child] = _Thread(child)
            t.pc += 1
        elif name in ("lock", "rlock", "wlock"):
            kind = {"lock": K.MutexLock, "rlock": K.RWMutexRLock, "wlock": K.RWMutexLock}[name]
            b = self._emit(g, kind, Phase.Begin, oid, line=line)
            if self._lock_free(op.obj, name):
                self._acquire(g, op.obj, name)
                self._emit(g, kind, Phase.End, oid, line=line)
                t.pc += 1
            else:
                self._block(t, name, op, b, kind, oid)
        elif name in ("unlock", "runlock", "wunlock"):
            kind = {"unlock": K.MutexUnlock, "runlock": K.RWMutexRUnlock, "wunlock": K.RWMutexUnlock}[name]
            err = self._release(g, op.obj, name)
            if err:
                self._emit(g, kind, Phase.Atomic, oid, {"fault": err}, line)
                self._fault(t, err)
            else:
                self._emit(g, kind, Phase.Atomic, oid, line=line)
                t.pc += 1
        elif name in ("send", "recv"):
            kind = K.ChanSend if name == "send" else K.ChanRecv
            b = self._emit(g, kind, Phase.Begin, oid, {"block": True}, line)
            if self._chan_ready(g, op.obj, name):
                res = self._chan_op(g, op.obj, name, b)
                self._complete_chan(t, kind, oid, res, line)
            else:
                c = self.chans[op.obj]
                (c.sendq if name == "send" else c.recvq).append((g, None))
                self._block(t, name, op, b, kind, oid)
        elif name == "close":
            c = self.chans[op.obj]
            if c.closed:
                self._emit(g, K.ChanClose, Phase.Atomic, oid, {"fault": "close of closed channel"}, line)
                self._fault(t, "close of closed channel")
            else:
                s = self._emit(g, K.ChanClose, Phase.Atomic, oid, line=line)
                c.closed, c.close_seq = True, s
                t.pc += 1
        elif name == "select":
            aux = self._select_aux(op)
            b = self._emit(g, K.Select, Phase.Begin, None, aux, line)
            ready = self._ready_cases(g, op)
            if ready:
                k = case if case in ready else ready[0]
                self._select_fire(t, op, k, b, aux, line)
            elif op.has_default:
                self._emit(g, K.Select, Phase.End, None, {**aux, "case": -1}, line)
                t.pc += 1
            else:
                for k, sc in enumerate(op.cases):
                    c = self.chans[sc.chan]
                    if not c.cap:
                        (c.sendq if sc.dir == "send" else c.recvq).append((g, k))
                self._block(t, "select", op, b, K.Select, None)
        elif name == "wgadd":
            state = self.wg[op.obj]
            state[0] += op.arg
            if state[0] < 0:
                self._emit(g, K.WGAdd, Phase.Atomic, oid, {"delta": op.arg, "fault": "negative WaitGroup counter"}, line)
                self._fault(t, "negative WaitGroup counter")
                return
            s = self._emit(g, K.WGAdd, Phase.Atomic, oid, {"delta": op.arg}, line)
            if state[0] == 0:
                for w in state[1]:
                    self._handoff(w, None, peer=s)
                state[1] = []
            t.pc += 1
        elif name == "wgwait":
            b = self._emit(g, K.WGWait, Phase.Begin, oid, line=line)
            state = self.wg[op.obj]
            if state[0] == 0:
                self._emit(g, K.WGWait, Phase.End, oid, line=line)
                t.pc += 1
            else:
                state[1].append(g)
                self._block(t, "wgwait", op, b, K.WGWait, oid)
        elif name == "cancel":
            done = self.chans[op.obj + ".done"]
            s = self._emit(g, K.CtxCancel, Phase.Atomic, oid, line=line)
            if not done.closed:
                done.closed, done.close_seq = True, s
            t.pc += 1
        elif name == "condwait":
            locker = op.arg
            mode = self._locker_mode(locker)
            held = self.holder[locker] == g if mode == "lock" else self.writer[locker] == g
            b = self._emit(g, K.CondWait, Phase.Begin, oid, line=line)
            if not held:
                msg = "condwait without holding its locker"
                self._emit(g, K.CondWait, Phase.End, oid, {"fault": msg}, line)
                self._fault(t, msg)
                return
            ukind = K.MutexUnlock if mode == "lock" else K.RWMutexUnlock
            self._emit(g, ukind, Phase.Atomic, self.ids[locker], line=line)
            self._release(g, locker, "unlock" if mode == "lock" else "wunlock")
            self.cond[op.obj].append(g)
            self._block(t, "condwait", op, b, K.CondWait, oid)
        elif name in ("signal", "broadcast"):
            kind = K.CondSignal if name == "signal" else K.CondBroadcast
            s = self._emit(g, kind, Phase.Atomic, oid, line=line)
            waiters = self.cond[op.obj]
            wake = waiters[:1] if name == "signal" else list(waiters)
            del waiters[: len(wake)]
            for w in wake:
                self._handoff(w, None, peer=s)
            t.pc += 1
        else:  # pragma: no cover - guarded by check_model
            raise ModelError(f"unknown op {name}")

    def _resume(self, t: _Thread, case: int | None) -> None:
        w = t.wait
        g, op, line = t.gid, w.op, w.op.line
        if w.kind in ("lock", "rlock", "wlock"):
            self._acquire(g, op.obj, w.kind)
            self._emit(g, w.ev_kind, Phase.End, w.obj, line=line)
            self._finish(t)
        elif w.kind == "relock":
            locker = op.arg
            mode = self._locker_mode(locker)
            self._acquire(g, locker, mode)
            self._emit(g, w.ev_kind, Phase.End, w.obj, line=line)
            self._finish(t)
        elif w.kind in ("send", "recv"):
            self._dequeue(g, op.obj)
            res = w.result if w.done else self._chan_op(g, op.obj, w.kind, w.begin)
            self._complete_chan(t, w.ev_kind, w.obj, res, line)
        elif w.kind == "select":
            aux = self._select_aux(op)
            if w.done:
                res = w.result
                end = {**aux, "case": res["case"]}
                if "peer" in res:
                    end["peer"] = res["peer"]
                self._emit(g, K.Select, Phase.End, None, end, line)
                self._finish(t)
            else:
                for sc in op.cases:
                    self._dequeue(g, sc.chan)
                ready = self._ready_cases(g, op)
                k = case if case in ready else ready[0]
                self._select_fire(t, op, k, w.begin, aux, line)
        elif w.kind == "wgwait":
            self._emit(g, K.WGWait, Phase.End, w.obj, {"peer": w.result["peer"]}, line)
            self._finish(t)
        elif w.kind == "condwait":
            self._emit(g, K.CondWait, Phase.End, w.obj, {"peer": w.result["peer"]}, line)
            locker = op.arg
            mode = self._locker_mode(locker)
            lkind = K.MutexLock if mode == "lock" else K.RWMutexLock
            lid = self.ids[locker]
            b = self._emit(g, lkind, Phase.Begin, lid, line=line)
            if self._lock_free(locker, mode):
                self._acquire(g, locker, mode)
                self._emit(g, lkind, Phase.End, lid, line=line)
                self._finish(t)
            else:
                t.wait = _Wait("relock", op, b, lkind, lid)

    # -- primitives ----------------------------------------------------------

    def _acquire(self, g: int, name: str, mode: str) -> None:
        if mode == "lock":
            self.holder[name] = g
        elif mode == "wlock":
            self.writer[name] = g
        else:
            r = self.readers[name]
            r[g] = r.get(g, 0) + 1

    def _release(self, g: int, name: str, mode: str) -> str | None:
        if mode == "unlock":
            if self.holder[name] is None:
                return "unlock of unlocked mutex"
            self.holder[name] = None
        elif mode == "wunlock":
            if self.writer[name] is None:
                return "unlock of unlocked RWMutex"
            self.writer[name] = None
        else:
            r = self.readers[name]
            if not r:
                return "RUnlock of unlocked RWMutex"
            who = g if g in r else min(r)
            r[who] -= 1
            if not r[who]:
                del r[who]
        return None

    def _dequeue(self, g: int, name: str) -> None:
        c = self.chans[name]
        c.recvq = [e for e in c.recvq if e[0] != g]
        c.sendq = [e for e in c.sendq if e[0] != g]

    def _handoff(self, g: int, case: int | None, **result) -> None:
        t = self.threads[g]
        t.wait.done = True
        t.wait.result = dict(result, case=case)
        if t.wait.kind in ("send", "recv", "select"):
            ops = [t.wait.op.obj] if t.wait.kind != "select" else [c.chan for c in t.wait.op.cases]
            for name in ops:
                self._dequeue(g, name)

    def _chan_op(self, g: int, name: str, dir: str, begin: int) -> dict:
        """Perform a ready send/receive. Returns End aux additions."""
        c = self.chans[name]
        if dir == "send":
            if c.closed:
                return {"fault": "send on closed channel"}
            c.stats[0] += 1
            if c.cap:
                c.buf.append(begin)
                return {}
            pg, pcase = next(e for e in c.recvq if e[0] != g)
            partner = self.threads[pg].wait
            c.stats[1] += 1
            self._handoff(pg, pcase, peer=begin, ok=True)
            return {"peer": partner.begin}
        if c.cap:
            if c.buf:
                c.stats[1] += 1
                return {"peer": c.buf.pop(0), "ok": True}
        elif not c.closed:
            pg, pcase = next(e for e in c.sendq if e[0] != g)
            partner = self.threads[pg].wait
            c.stats[0] += 1
            c.stats[1] += 1
            self._handoff(pg, pcase, peer=begin)
            return {"peer": partner.begin, "ok": True}
        c.stats[2] += 1
        return {"peer": c.close_seq, "ok": False}

    def _complete_chan(self, t: _Thread, kind, oid, res: dict, line: int) -> None:
        aux = {"block": True}
        aux.update({k: v for k, v in res.items() if k in ("peer", "ok", "fault") and v is not None})
        self._emit(t.gid, kind, Phase.End, oid, aux, line)
        if "fault" in res:
            self._fault(t, res["fault"])
        else:
            self._finish(t)

    def _select_aux(self, op: Op) -> dict:
        return {
            "candidates": tuple((self.ids[c.chan], c.dir) for c in op.cases),
            "has_default": op.has_default,
            "block": not op.has_default,
        }

    def _select_fire(self, t: _Thread, op: Op, k: int, begin: int, aux: dict, line: int) -> None:
        sc = op.cases[k]
        res = self._chan_op(t.gid, sc.chan, sc.dir, begin)
        end = {**aux, "case": k}
        if res.get("peer") is not None:
            end["peer"] = res["peer"]
        if "fault" in res:
            end["fault"] = res["fault"]
        self._emit(t.gid, K.Select, Phase.End, None, end, line)
        if "fault" in res:
            self._fault(t, res["fault"])
        else:
            self._finish(t)

    # -- results -------------------------------------------------------------

    def outcome(self, bound_hit: bool = False) -> str:
        if bound_hit:
            return "step_bound"
        if any(t.status == "wait" for t in self.threads.values()):
            return "global_block"
        return "completed"

    def blocked(self) -> dict[int, tuple[int, str]]:
        out = {}
        for g, t in sorted(self.threads.items()):
            if t.status == "wait" and not self._wait_ready(t):
                out[g] = (t.pc, t.wait.ev_kind.value)
        return out

    def ground_truth(self, bound_hit: bool = False) -> GroundTruth:
        completed = frozenset(g for g, t in self.threads.items() if t.status == "exited")
        leaked = frozenset(
            g for g, t in self.threads.items() if g != self.model.entry and t.status != "exited"
        )
        stats = {
            n: ChannelStats(c.stats[0], c.stats[1], c.stats[2], len(c.buf)) for n, c in self.chans.items()
        }
        return GroundTruth(
            completed, self.blocked(), leaked, list(self.faults), self.outcome(bound_hit), self.step_no, stats
        )

    def trace(self) -> Trace:
        return Trace(tuple(self.events), {"program": self.model.name, "schema_version": "1", "go_version": None})


def _lowest(opts):
    return min(opts, key=lambda o: (o[0], -1 if o[1] is None else o[1]))


class _Chooser:
    def __init__(self, schedule: Schedule) -> None:
        self.schedule = schedule
        self.last: int | None = None
        self.pos = 0
        self.rng = random.Random(schedule.seed) if isinstance(schedule, SeededRandom) else None

    def choose(self, opts: list[tuple[int, int | None]]) -> tuple[int, int | None]:
        s = self.schedule
        if isinstance(s, RoundRobin):
            gids = sorted({g for g, _ in opts})
            later = [g for g in gids if self.last is not None and g > self.last]
            g = later[0] if later else gids[0]
            return _lowest([o for o in opts if o[0] == g])
        if isinstance(s, SeededRandom):
            if len(opts) == 1:
                return opts[0]
            g = self.rng.choice(sorted({g for g, _ in opts}))
            return self.rng.choice([o for o in opts if o[0] == g])
        if len(opts) == 1:
            return opts[0]
        if self.pos >= len(s.picks):
            return _lowest(opts)
        g, k = s.picks[self.pos]
        self.pos += 1
        mine = [o for o in opts if o[0] == g]
        if not mine:
            raise ScheduleError(f"script pick {self.pos}: goroutine {g} is not runnable")
        if k is None:
            return _lowest(mine)
        if (g, k) not in mine:
            raise ScheduleError(f"script pick {self.pos}: select case {k} of goroutine {g} is not ready")
        return (g, k)


def run(model: ProgramModel, schedule: Schedule | None = None, step_bound: int = DEFAULT_STEP_BOUND) -> tuple[Trace, GroundTruth]:
    """Execute ``model`` under ``schedule`` and return its trace and ground truth."""
    if step_bound <= 0:
        raise ValueError("step_bound must be positive")
    schedule = schedule or RoundRobin()
    m = Machine(model)
    chooser = _Chooser(schedule)
    bound_hit = False
    while True:
        opts = m.options()
        if not opts:
            break
        if m.step_no >= step_bound:
            bound_hit = True
            break
        g, k = chooser.choose(opts)
        if len(opts) > 1:
            m.choices.append((g, k))
        chooser.last = g
        m.step(g, k)
    return m.trace(), m.ground_truth(bound_hit)
