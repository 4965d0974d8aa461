"""Offline predictive analyses over a finished trace.

* mutex deadlock: cycles of lock tuples ``<g, m, o, L>`` (lock sequences);
* double lock, double read lock under writer priority, missing unlock;
* channel--mutex deadlock: for same-channel operations in different
  goroutines, intersect the held lockset ``L`` with the other side's held
  or path lockset ``U`` (mutexes acquired and fully released en route).

Every analysis optionally takes a :class:`~blocksleuth.hb.HappensBefore`;
when given, candidates whose participating events are ordered by
happens-before in a way that rules out the bad interleaving are dropped.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field

from .events import Event, Phase, SemanticKind, Trace
from .findings import AnalysisWarning, BugFinding, FindingKind, Provenance
from .hb import HappensBefore

K = SemanticKind
MAX_OCCURRENCES = 8
MAX_HB_COMBINATIONS = 256


class LockOpKind(enum.Enum):
    Ml = "Ml"
    RWMrl = "RWMrl"
    RWMl = "RWMl"


_LOCK_OP = {K.MutexLock: LockOpKind.Ml, K.RWMutexRLock: LockOpKind.RWMrl, K.RWMutexLock: LockOpKind.RWMl}
_UNLOCK_OP = {K.MutexUnlock: LockOpKind.Ml, K.RWMutexRUnlock: LockOpKind.RWMrl, K.RWMutexUnlock: LockOpKind.RWMl}


@dataclass(frozen=True, slots=True)
class LockTuple:
    """Goroutine ``g`` attempts ``o`` on ``m`` while holding ``L``."""

    g: int
    m: int
    o: LockOpKind
    L: frozenset[tuple[int, LockOpKind]]
    seq: int
    acquired: tuple[tuple[int, int], ...] = ()  # (held mutex, its acquisition seq)

    @property
    def held(self) -> frozenset[int]:
        return frozenset(m for m, _ in self.L)

    def held_kinds(self, m: int) -> set[LockOpKind]:
        return {k for x, k in self.L if x == m}

    def signature(self) -> tuple:
        return (self.g, self.m, self.o, self.L)


@dataclass(frozen=True, slots=True)
class ChannelOpEnv:
    """A capacity-0 blocking channel operation with its lock environment."""

    op: Event
    chan: int
    dir: str  # send | recv | close
    L: frozenset[int]
    U: frozenset[int]
    acquired: tuple[tuple[int, int], ...] = ()  # last acquisition seq of each mutex in L ∪ U
    case: int | None = None  # select case index
    reads: frozenset[int] = frozenset()  # mutexes of L ∪ U taken in read mode only

    @property
    def gid(self) -> int:
        return self.op.gid

    @property
    def is_select(self) -> bool:
        return self.op.kind is K.Select

    def signature(self) -> tuple:
        base = self.op.candidates() if self.is_select else self.op.kind
        return (self.chan, self.gid, self.dir, base, self.case, self.L, self.U, self.reads)

    def acq(self, m: int) -> int:
        return dict(self.acquired)[m]


@dataclass
class LockPass:
    """Result of one pass over a trace maintaining per-goroutine locksets."""

    tuples: list[LockTuple] = field(default_factory=list)
    envs: list[ChannelOpEnv] = field(default_factory=list)
    held: dict[int, dict[int, list[tuple[LockOpKind, int]]]] = field(default_factory=dict)
    exclusive: dict[int, int] = field(default_factory=dict)  # mutex -> holder gid
    readers: dict[int, dict[int, int]] = field(default_factory=dict)  # rwmutex -> gid -> count
    pending: dict[int, tuple[int, LockOpKind, int]] = field(default_factory=dict)  # gid -> (m, o, seq)
    blocked: dict[int, Event] = field(default_factory=dict)  # every Begin still pending
    writers: dict[int, list[tuple[int, int]]] = field(default_factory=dict)  # rwmutex -> [(gid, seq)]
    faults: list[BugFinding] = field(default_factory=list)
    last_seq: dict[int, int] = field(default_factory=dict)

    def held_set(self, g: int) -> frozenset[int]:
        return frozenset(self.held.get(g, ()))


def _lockset(h: dict[int, list[tuple[LockOpKind, int]]]) -> frozenset[tuple[int, LockOpKind]]:
    return frozenset((m, k) for m, stack in h.items() for k, _ in stack)


def lock_pass(trace: Trace) -> LockPass:
    """Single pass computing lock tuples, channel environments and end state."""
    lp = LockPass()
    capacity: dict[int, int] = {}
    ctx_done: dict[int, int] = {}
    released: dict[int, dict[int, tuple[int, bool]]] = defaultdict(dict)  # gid -> mutex -> (acq seq, read)
    held = lp.held
    for e in trace.events:
        g, kind = e.gid, e.kind
        lp.last_seq[g] = e.seq
        if e.phase is Phase.Begin:
            lp.blocked[g] = e
        elif e.phase is Phase.End:
            lp.blocked.pop(g, None)
        if kind in _LOCK_OP:
            o = _LOCK_OP[kind]
            h = held.setdefault(g, {})
            if e.phase is Phase.Begin:
                acquired = tuple(sorted((m, stack[-1][1]) for m, stack in h.items()))
                lp.tuples.append(LockTuple(g, e.obj, o, _lockset(h), e.seq, acquired))
                lp.pending[g] = (e.obj, o, e.seq)
                if o is LockOpKind.RWMl:
                    lp.writers.setdefault(e.obj, []).append((g, e.seq))
            elif e.phase is Phase.End:
                m, _, begin = lp.pending.pop(g, (e.obj, o, e.seq))
                h.setdefault(m, []).append((o, begin))
                released[g].pop(m, None)
                if o is LockOpKind.RWMrl:
                    r = lp.readers.setdefault(m, {})
                    r[g] = r.get(g, 0) + 1
                else:
                    lp.exclusive[m] = g
        elif kind in _UNLOCK_OP:
            if "fault" in e.aux:
                continue  # reported from the recorded fault
            _unlock(lp, released, e, _UNLOCK_OP[kind])
        elif kind is K.ChanCreate:
            capacity[e.obj] = int(e.aux.get("capacity", 0))
        elif kind is K.CtxCreate:
            if e.aux.get("done_channel") is not None:
                ctx_done[e.obj] = e.aux["done_channel"]
        elif kind in (K.ChanSend, K.ChanRecv, K.ChanClose, K.CtxCancel, K.Select):
            if e.phase is Phase.End or "fault" in e.aux:
                continue
            _channel_envs(lp, e, capacity, ctx_done, held.get(g, {}), released[g])
    return lp


def _unlock(lp: LockPass, released, e: Event, o: LockOpKind) -> None:
    g, m = e.gid, e.obj
    if o is LockOpKind.RWMrl:
        r = lp.readers.get(m, {})
        owner = g if g in r else (min(r) if r else None)
    else:
        owner = lp.exclusive.get(m)
    if owner is None:
        lp.faults.append(
            BugFinding(FindingKind.Fault, Provenance.Detected, (g,), (), (e.seq,), (m,),
                       detail="unlock of a mutex that is not locked")
        )
        return
    stack = lp.held.get(owner, {}).get(m, [])
    for i in range(len(stack) - 1, -1, -1):
        if (stack[i][0] is o) or (o is LockOpKind.Ml and stack[i][0] is LockOpKind.Ml):
            _, acq = stack.pop(i)
            break
    else:  # pragma: no cover - global and per-goroutine state always agree
        return
    if not stack:
        del lp.held[owner][m]
        released[owner][m] = (acq, o is LockOpKind.RWMrl)
    if o is LockOpKind.RWMrl:
        r = lp.readers[m]
        r[owner] -= 1
        if not r[owner]:
            del r[owner]
    else:
        del lp.exclusive[m]


def _channel_envs(lp, e: Event, capacity, ctx_done, h, rel) -> None:
    L = frozenset(h)
    U = frozenset(m for m in rel if m not in h)
    acquired = tuple(sorted([(m, stack[-1][1]) for m, stack in h.items()] + [(m, rel[m][0]) for m in U]))
    reads = frozenset(
        [m for m, stack in h.items() if all(k is LockOpKind.RWMrl for k, _ in stack)] + [m for m in U if rel[m][1]]
    )
    if e.kind is K.Select:
        if not e.aux.get("block", not e.aux.get("has_default", False)):
            return
        for k, (ch, d) in enumerate(e.candidates()):
            if capacity.get(ch, 0) == 0:
                lp.envs.append(ChannelOpEnv(e, ch, d, L, U, acquired, k, reads))
        return
    if e.kind is K.CtxCancel:
        ch, d = ctx_done.get(e.obj), "close"
        if ch is None:
            return
    elif e.kind is K.ChanClose:
        ch, d = e.obj, "close"
    else:
        if not e.aux.get("block", True):
            return
        ch, d = e.obj, "send" if e.kind is K.ChanSend else "recv"
    if capacity.get(ch, 0) == 0:
        lp.envs.append(ChannelOpEnv(e, ch, d, L, U, acquired, None, reads))


def build_lock_tuples(trace: Trace) -> tuple[list[LockTuple], list[ChannelOpEnv]]:
    lp = lock_pass(trace)
    return lp.tuples, lp.envs


# ---------------------------------------------------------------------------
# mutex deadlock


def _group(items, key) -> list[tuple[object, list]]:
    groups: dict = {}
    for it in items:
        groups.setdefault(key(it), []).append(it)
    return list(groups.items())


def _link_ok(wanter: LockTuple, holder: LockTuple) -> bool:
    """``wanter`` waits for ``holder``: holder holds wanter's mutex, not read-read."""
    kinds = holder.held_kinds(wanter.m)
    if not kinds:
        return False
    return not (wanter.o is LockOpKind.RWMrl and kinds == {LockOpKind.RWMrl})


def _concurrent_choice(hb: HappensBefore | None, options: list[list[int]]) -> list[int] | None:
    """Pick one seq per slot such that all picks are pairwise concurrent."""
    if hb is None:
        return [o[0] for o in options]
    budget = [MAX_HB_COMBINATIONS]
    chosen: list[int] = []

    def go(i: int) -> bool:
        if i == len(options):
            return True
        for s in options[i]:
            budget[0] -= 1
            if budget[0] < 0:
                return False
            if all(hb.concurrent(s, c) for c in chosen):
                chosen.append(s)
                if go(i + 1):
                    return True
                chosen.pop()
        return False

    return list(chosen) if go(0) else None


def predict_mutex_deadlock(
    tuples: list[LockTuple], cycle_bound: int = 4, hb: HappensBefore | None = None
) -> list[BugFinding]:
    """One finding per lock sequence (simple cycle of distinct goroutines)."""
    if cycle_bound < 2:
        raise ValueError("cycle_bound must be at least 2")
    nodes: list[tuple[LockTuple, list[LockTuple]]] = []
    for _, occ in _group(tuples, LockTuple.signature):
        t = occ[0]
        if t.m in t.held:
            continue  # re-acquisition: double lock, handled separately
        nodes.append((t, occ[:MAX_OCCURRENCES]))
    nodes.sort(key=lambda n: n[0].seq)
    by_held: dict[int, list[int]] = defaultdict(list)
    for i, (t, _) in enumerate(nodes):
        for m in t.held:
            by_held[m].append(i)

    def succ(i: int) -> list[int]:
        t = nodes[i][0]
        return [j for j in by_held.get(t.m, ()) if nodes[j][0].g != t.g and _link_ok(t, nodes[j][0])]

    findings = []
    for s in range(len(nodes)):
        path = [s]
        gids = {nodes[s][0].g}
        locks = set(nodes[s][0].held)

        def dfs(i: int) -> None:
            for j in succ(i):
                if j == s and len(path) > 1:
                    findings.append(_cycle_finding([nodes[k] for k in path], hb))
                    continue
                if j <= s or len(path) >= cycle_bound:
                    continue
                t = nodes[j][0]
                if t.g in gids or locks & t.held:
                    continue
                path.append(j)
                gids.add(t.g)
                locks.update(t.held)
                dfs(j)
                path.pop()
                gids.discard(t.g)
                locks.difference_update(t.held)

        dfs(s)
    return [f for f in findings if f is not None]


def _cycle_finding(cycle, hb) -> BugFinding | None:
    pick = _concurrent_choice(hb, [[t.seq for t in occ] for _, occ in cycle])
    if pick is None:
        return None
    by_seq = {t.seq: t for _, occ in cycle for t in occ}
    chosen = [by_seq[s] for s in pick]
    causes = []
    for i, t in enumerate(chosen):
        nxt = chosen[(i + 1) % len(chosen)]
        acq = dict(nxt.acquired).get(t.m)
        if acq is not None:  # hand-built tuples may omit acquisition seqs
            causes.append(acq)
    return BugFinding(
        FindingKind.MutexDeadlock,
        Provenance.Predicted,
        tuple(sorted(t.g for t in chosen)),
        tuple(sorted(pick)),
        tuple(sorted(causes)),
        tuple(sorted({t.m for t in chosen})),
        detail=" -> ".join(f"g{t.g} wants {t.m:#x}" for t in chosen),
    )


# ---------------------------------------------------------------------------
# double lock, double read lock, missing unlock


def predict_double_lock_missing_unlock(
    trace: Trace, hb: HappensBefore | None = None, lp: LockPass | None = None
) -> tuple[list[BugFinding], list[AnalysisWarning]]:
    lp = lp if lp is not None else lock_pass(trace)
    findings: list[BugFinding] = []
    warnings: list[AnalysisWarning] = []
    for t in lp.tuples:
        kinds = t.held_kinds(t.m)
        if not kinds:
            continue
        first = dict(t.acquired)[t.m]
        if t.o is LockOpKind.RWMrl and kinds == {LockOpKind.RWMrl}:
            writers = [(w, s) for w, s in lp.writers.get(t.m, ()) if w != t.g]
            feasible = [
                (w, s) for w, s in writers if hb is None or (not hb.before(s, first) and not hb.before(t.seq, s))
            ]
            if feasible:
                w, s = feasible[0]
                findings.append(
                    BugFinding(FindingKind.DoubleRLock, Provenance.Predicted, tuple(sorted((t.g, w))),
                               tuple(sorted((t.seq, s))), (first,), (t.m,),
                               detail=f"g{t.g} read-locks {t.m:#x} twice; writer g{w} can interleave")
                )
            else:
                why = "no writer in trace" if not writers else "every writer is ordered around both read locks"
                warnings.append(AnalysisWarning("DoubleRLock", (first, t.seq), f"recursive read lock of {t.m:#x}: {why}"))
        else:
            findings.append(
                BugFinding(FindingKind.DoubleLock, Provenance.Predicted, (t.g,), (t.seq,), (first,), (t.m,),
                           detail=f"g{t.g} re-acquires {t.m:#x}")
            )
    for g in sorted(lp.held):
        if g in lp.blocked:
            continue  # a blocked holder is explained by the blocking finding
        for m, stack in sorted(lp.held[g].items(), key=lambda kv: kv[1][0][1]):
            findings.append(
                BugFinding(FindingKind.MissingUnlock, Provenance.Predicted, (g,), (), (stack[0][1],), (m,),
                           detail=f"g{g} still holds {m:#x} at its last event")
            )
    return findings, warnings


# ---------------------------------------------------------------------------
# channel-mutex deadlock


def _orientations(a: ChannelOpEnv, b: ChannelOpEnv) -> list[tuple[ChannelOpEnv, ChannelOpEnv, str, frozenset[int]]]:
    """(holder that blocks, goroutine that needs the mutex, test, witnesses)."""
    if a.dir == "close":
        a, b = b, a
    if b.dir == "close":  # a is the receive
        return [(a, b, "L∩L", a.L & b.L), (a, b, "L∩U", a.L & b.U)]
    return [(a, b, "L∩L", a.L & b.L), (b, a, "L∩L", a.L & b.L), (a, b, "L∩U", a.L & b.U), (b, a, "U∩L", a.U & b.L)]


def _pair_finding(occ_a, occ_b, hb) -> BugFinding | None:
    for ea in occ_a:
        for eb in occ_b:
            for h, w, test, xs in _orientations(ea, eb):
                for x in sorted(xs, key=h.acq):
                    if x in h.reads and x in w.reads:
                        continue  # readers do not exclude each other
                    acq_w = w.acq(x)
                    if hb is not None and (hb.before(h.op.seq, acq_w) or hb.before(acq_w, h.acq(x))):
                        continue
                    objects = tuple(sorted({ea.chan, x}))
                    return BugFinding(
                        FindingKind.ChannelMutexDeadlock,
                        Provenance.Predicted,
                        tuple(sorted((h.gid, w.gid))),
                        tuple(sorted((acq_w, h.op.seq))),
                        tuple(sorted((ea.op.seq, eb.op.seq))),
                        objects,
                        witness_mutex=x,
                        detail=f"{ea.dir}/{eb.dir} on {ea.chan:#x}: g{h.gid} blocks holding {x:#x} "
                        f"which g{w.gid} needs ({test})",
                    )
    return None


def predict_channel_mutex_deadlock(
    envs: list[ChannelOpEnv], hb: HappensBefore | None = None, select_mode: str = "any"
) -> list[BugFinding]:
    if select_mode not in ("any", "all"):
        raise ValueError(f"unknown select mode {select_mode!r}")
    per_chan: dict[int, list[tuple[ChannelOpEnv, list[ChannelOpEnv]]]] = defaultdict(list)
    for _, occ in _group(envs, ChannelOpEnv.signature):
        per_chan[occ[0].chan].append((occ[0], occ[:MAX_OCCURRENCES]))
    results: list[tuple[BugFinding, list[ChannelOpEnv]]] = []
    for ch in sorted(per_chan, key=lambda c: per_chan[c][0][0].op.seq):
        sigs = per_chan[ch]
        for i, (a, occ_a) in enumerate(sigs):
            for b, occ_b in sigs[i + 1 :]:
                if a.gid == b.gid or not _pairable(a.dir, b.dir):
                    continue
                if not any(xs for _, _, _, xs in _orientations(a, b)):
                    continue
                f = _pair_finding(occ_a, occ_b, hb)
                if f is not None:
                    results.append((f, [e for e in (a, b) if e.is_select]))
    if select_mode == "all":
        fired: dict[tuple, set[int]] = defaultdict(set)
        for _, sel in results:
            for e in sel:
                fired[_select_group(e)].add(e.case)
        results = [
            (f, sel)
            for f, sel in results
            if all(fired[_select_group(e)] >= set(range(len(e.op.candidates()))) for e in sel)
        ]
    return [f for f, _ in results]


def _select_group(e: ChannelOpEnv) -> tuple:
    return (e.gid, e.op.candidates(), e.L, e.U)


def _pairable(d1: str, d2: str) -> bool:
    return {d1, d2} in ({"send", "recv"}, {"recv", "close"})


# ---------------------------------------------------------------------------
# lock waits left pending at the end of the trace


def explain_blocked_locks(lp: LockPass) -> tuple[list[BugFinding], list[AnalysisWarning]]:
    """Classify every lock acquisition still pending at trace end.

    Builds the wait-for relation (pending acquirer -> current holders, or ->
    pending writers for a read lock under writer priority) and reports, per
    cycle or per root holder, the finding that explains the stuck waiters.
    """
    waits: dict[int, set[int]] = {}
    for g, (m, o, _) in lp.pending.items():
        if o is LockOpKind.RWMrl:
            holder = lp.exclusive.get(m)
            targets = {holder} if holder is not None else {
                w for w, s in lp.writers.get(m, ()) if w != g and lp.pending.get(w, (None, None, -1))[2] == s
            }
        else:
            targets = set(lp.readers.get(m, {}))
            if lp.exclusive.get(m) is not None:
                targets.add(lp.exclusive[m])
        waits[g] = targets

    warnings: list[AnalysisWarning] = []
    cycles: dict[frozenset[int], set[int]] = {}
    roots: dict[int, set[int]] = defaultdict(set)
    for g in sorted(waits, key=lambda x: lp.pending[x][2]):
        if not waits[g]:
            warnings.append(AnalysisWarning("UnexplainedLockWait", (lp.pending[g][2],),
                                            f"g{g} waits for a lock nobody holds"))
            continue
        found_cycles, found_roots = _reach(g, waits)
        for c in found_cycles:
            cycles.setdefault(c, set()).add(g)
        for r in found_roots:
            roots[r].add(g)

    findings = []
    for cyc, members in cycles.items():
        findings.append(_cycle_explained(lp, cyc, members | cyc))
    for r, members in roots.items():
        f = _root_explained(lp, r, members, waits)
        if f is not None:
            findings.append(f)
    return findings, warnings


def _reach(g: int, waits: dict[int, set[int]]) -> tuple[list[frozenset[int]], list[int]]:
    """Cycles and non-waiting roots reachable from ``g`` along wait-for edges."""
    cycles: list[frozenset[int]] = []
    roots: list[int] = []
    seen: set[int] = set()
    path: list[int] = []
    on_path: set[int] = set()

    def dfs(x: int) -> None:
        if x in on_path:
            cyc = frozenset(path[path.index(x):])
            if cyc not in cycles:
                cycles.append(cyc)
            return
        if x in seen:
            return
        seen.add(x)
        if x not in waits:
            roots.append(x)
            return
        path.append(x)
        on_path.add(x)
        for y in sorted(waits[x]):
            dfs(y)
        path.pop()
        on_path.discard(x)

    dfs(g)
    return cycles, roots


def _held_acq(lp: LockPass, g: int, m: int) -> int | None:
    stack = lp.held.get(g, {}).get(m)
    return stack[0][1] if stack else None


def _cycle_explained(lp: LockPass, cyc: frozenset[int], members: set[int]) -> BugFinding:
    mutexes = {lp.pending[g][0] for g in members}
    causes = sorted(
        s for g in cyc for m in {lp.pending[x][0] for x in cyc} if (s := _held_acq(lp, g, m)) is not None
    )
    if len(cyc) == 1:
        kind = FindingKind.DoubleLock
    elif any(
        lp.pending[g][1] is LockOpKind.RWMrl and lp.pending[g][0] in lp.held.get(g, {}) for g in cyc
    ):
        kind = FindingKind.DoubleRLock
    else:
        kind = FindingKind.MutexDeadlock
    return BugFinding(
        kind,
        Provenance.DetectedAndPredicted,
        tuple(sorted(members)),
        tuple(sorted(lp.pending[g][2] for g in members)),
        tuple(causes),
        tuple(sorted(mutexes)),
        detail="goroutines wait for each other's locks at end of trace",
    )


def _root_explained(lp: LockPass, r: int, members: set[int], waits) -> BugFinding | None:
    wanted = {lp.pending[g][0] for g in members if r in waits[g]}
    held_by_r = sorted((s, m) for m in wanted if (s := _held_acq(lp, r, m)) is not None)
    if not held_by_r:
        return None  # pragma: no cover - roots are always holders
    witness = held_by_r[0][1]
    blocked = sorted(lp.pending[g][2] for g in members)
    gids = tuple(sorted(members | {r}))
    causes = tuple(s for s, _ in held_by_r)
    b = lp.blocked.get(r)
    mutexes = {lp.pending[g][0] for g in members}
    if b is None:
        return BugFinding(FindingKind.MissingUnlock, Provenance.DetectedAndPredicted, gids, tuple(blocked), causes,
                          tuple(sorted(mutexes)), witness_mutex=witness,
                          detail=f"g{r} never releases {witness:#x}")
    blocked = tuple(sorted(blocked + [b.seq]))
    if b.kind in (K.ChanSend, K.ChanRecv, K.Select):
        chans = {c for c, _ in b.candidates()} if b.kind is K.Select else {b.obj}
        return BugFinding(FindingKind.ChannelMutexDeadlock, Provenance.DetectedAndPredicted, gids, blocked, causes,
                          tuple(sorted(chans | mutexes)), witness_mutex=witness,
                          detail=f"g{r} blocks on a channel holding {witness:#x}")
    kind = FindingKind.BlockedWaitGroup if b.kind is K.WGWait else FindingKind.BlockedCond
    return BugFinding(kind, Provenance.Detected, gids, blocked, causes, tuple(sorted(mutexes | {b.obj})),
                      witness_mutex=witness, detail=f"g{r} blocks holding {witness:#x}")
