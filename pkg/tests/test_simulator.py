"""Synchronization semantics of the simulator, one contract per test."""

from __future__ import annotations

import pytest

from blocksleuth.events import Phase, validate_trace
from blocksleuth.model import ModelError
from blocksleuth.simulator import Machine, RoundRobin, ScheduleError, Script, SeededRandom, run
from blocksleuth.trace_io import write_trace

from conftest import ETCD, KUBERNETES, K, model, simulate


def machine(text: str) -> Machine:
    return Machine(model(text))


def drive(text: str, gids, settle: bool = True):
    """Step the machine through ``gids`` exactly, then (optionally) run the
    lowest runnable goroutine until nothing is runnable."""
    m = machine(text)
    for g in gids:
        m.step(g)
    while settle and m.options():
        g, k = min(m.options(), key=lambda o: (o[0], o[1] or 0))
        m.step(g, k)
    return m.trace(), m.ground_truth()


def events_of(trace, gid):
    return [(e.kind, e.phase) for e in trace.events if e.gid == gid]


def two(body1: str, body2: str, decls: str) -> str:
    """Main spawns goroutine 2, then runs ``body1``; goroutine 2 runs ``body2``."""
    ind = lambda b: "\n".join("    " + l.strip() for l in b.strip().splitlines())
    return f"program t\n{decls}\ngo 1 main:\n    spawn 2\n{ind(body1)}\ngo 2 g:\n{ind(body2)}\n"


# -- trivial runs -------------------------------------------------------------

def test_single_goroutine_lock_unlock():
    trace, gt = simulate("program t\nmutex m\ngo 1 main:\n    lock m\n    unlock m\n    exit\n")
    assert gt.completed == {1} and not gt.blocked and gt.outcome == "completed"
    assert [e.kind for e in trace.events] == [K.MainStart, K.MutexLock, K.MutexLock, K.MutexUnlock, K.GExit]
    assert validate_trace(trace) == []


def test_object_ids_follow_declaration_order():
    trace, _ = simulate(ETCD, "1 1 3")
    objs = {e.obj for e in trace.events if e.kind in (K.MutexLock, K.ChanClose, K.ChanRecv)}
    assert objs == {0x100, 0x101}


# -- channels -----------------------------------------------------------------

def test_unbuffered_send_blocks_without_receiver():
    _, gt = simulate("program t\nchan c 0\ngo 1 main:\n    send c\n")
    assert gt.blocked == {1: (0, "ChanSend")} and gt.globally_blocked


def test_unbuffered_recv_blocks_without_sender():
    _, gt = simulate("program t\nchan c 0\ngo 1 main:\n    recv c\n")
    assert gt.blocked == {1: (0, "ChanRecv")}


def test_rendezvous_links_peers():
    trace, gt = simulate(two("send c", "recv c", "chan c 0"))
    assert gt.outcome == "completed"
    by = trace.by_seq()
    send_end = next(e for e in trace.events if e.kind is K.ChanSend and e.phase is Phase.End)
    recv_end = next(e for e in trace.events if e.kind is K.ChanRecv and e.phase is Phase.End)
    assert by[send_end.aux["peer"]].kind is K.ChanRecv
    assert by[recv_end.aux["peer"]].kind is K.ChanSend
    assert recv_end.aux["ok"] is True


def test_goroutine_cannot_rendezvous_with_itself():
    _, gt = simulate("program t\nchan c 0\ngo 1 main:\n    select send c | recv c\n")
    assert gt.blocked == {1: (0, "Select")}


def test_buffered_send_blocks_only_when_full():
    _, gt = simulate("program t\nchan c 1\ngo 1 main:\n    send c\n    send c\n")
    assert gt.blocked == {1: (1, "ChanSend")}


def test_buffered_recv_blocks_when_empty():
    _, gt = simulate("program t\nchan c 2\ngo 1 main:\n    send c\n    recv c\n    recv c\n")
    assert gt.blocked == {1: (2, "ChanRecv")}


def test_recv_from_closed_completes_with_zero_value():
    trace, gt = simulate("program t\nchan c 0\ngo 1 main:\n    close c\n    recv c\n    recv c\n")
    assert gt.outcome == "completed"
    ends = [e for e in trace.events if e.kind is K.ChanRecv and e.phase is Phase.End]
    assert [e.aux["ok"] for e in ends] == [False, False]
    assert gt.channels["c"].recv_zero == 2


def test_closed_buffered_channel_drains_before_zero_values():
    trace, gt = simulate("program t\nchan c 2\ngo 1 main:\n    send c\n    close c\n    recv c\n    recv c\n")
    ends = [e.aux["ok"] for e in trace.events if e.kind is K.ChanRecv and e.phase is Phase.End]
    assert ends == [True, False]
    s = gt.channels["c"]
    assert (s.sends, s.recv_values, s.recv_zero, s.buffered) == (1, 1, 1, 0)


def test_send_on_closed_channel_faults_and_halts():
    trace, gt = simulate("program t\nchan c 1\nmutex m\ngo 1 main:\n    close c\n    send c\n    lock m\n")
    assert [f.message for f in gt.faults] == ["send on closed channel"]
    assert 1 not in gt.completed and not gt.blocked
    assert not any(e.kind is K.MutexLock for e in trace.events)


def test_close_of_closed_channel_faults():
    trace, gt = simulate("program t\nchan c 0\ngo 1 main:\n    close c\n    close c\n")
    assert [f.message for f in gt.faults] == ["close of closed channel"]
    assert trace.events[-1].aux["fault"] == "close of closed channel"


def test_close_wakes_blocked_receiver():
    _, gt = simulate(two("close c", "recv c", "chan c 0"), "2 1")
    assert gt.outcome == "completed" and gt.channels["c"].recv_zero == 1


def test_close_while_sender_blocked_faults_sender():
    _, gt = simulate(two("close c", "send c", "chan c 0"), "2 1")
    assert [(f.gid, f.message) for f in gt.faults] == [(2, "send on closed channel")]


# -- select -------------------------------------------------------------------

def test_select_with_default_never_blocks():
    trace, gt = simulate("program t\nchan c 0\ngo 1 main:\n    select recv c | default\n")
    assert gt.outcome == "completed"
    end = next(e for e in trace.events if e.kind is K.Select and e.phase is Phase.End)
    assert end.aux["case"] == -1


def test_select_blocks_with_no_ready_case():
    trace, gt = simulate("program t\nchan a 0\nchan b 0\ngo 1 main:\n    select recv a | send b\n")
    assert gt.blocked == {1: (0, "Select")}
    begin = next(e for e in trace.events if e.kind is K.Select)
    assert begin.candidates() == ((0x100, "recv"), (0x101, "send"))


def test_select_takes_lowest_ready_case_under_round_robin():
    text = "program t\nchan a 1\nchan b 1\ngo 1 main:\n    send a\n    send b\n    select recv b | recv a\n"
    trace, _ = simulate(text)
    end = [e for e in trace.events if e.kind is K.Select][-1]
    assert end.aux["case"] == 0


def test_select_case_chosen_by_script():
    text = "program t\nchan a 1\nchan b 1\ngo 1 main:\n    send a\n    send b\n    select recv b | recv a\n"
    trace, _ = run(model(text), Script(((1, 1),)))
    end = [e for e in trace.events if e.kind is K.Select][-1]
    assert end.aux["case"] == 1


def test_select_on_closed_channel_fires():
    text = "program t\nchan a 0\nchan b 0\ngo 1 main:\n    close b\n    select recv a | recv b\n"
    trace, gt = simulate(text)
    assert gt.outcome == "completed"
    assert [e for e in trace.events if e.kind is K.Select][-1].aux["case"] == 1


def test_blocked_select_woken_by_sender():
    _, gt = simulate(two("send b", "select recv a | recv b", "chan a 0\nchan b 0"), "2 1")
    assert gt.outcome == "completed"


# -- mutex --------------------------------------------------------------------

def test_lock_blocks_while_held():
    _, gt = simulate(two("lock m", "lock m", "mutex m"), "1")
    assert gt.blocked == {2: (0, "MutexLock")} and gt.leaked == {2}


def test_unlock_wakes_lock_waiter():
    trace, gt = simulate(two("lock m\nunlock m", "lock m\nunlock m", "mutex m"), "1 2 1")
    assert gt.outcome == "completed"
    g2 = events_of(trace, 2)
    assert g2[:2] == [(K.MutexLock, Phase.Begin), (K.MutexLock, Phase.End)]


def test_unlock_of_unlocked_mutex_faults():
    _, gt = simulate("program t\nmutex m\ngo 1 main:\n    unlock m\n")
    assert [f.message for f in gt.faults] == ["unlock of unlocked mutex"]


def test_relock_by_same_goroutine_self_deadlocks():
    _, gt = simulate("program t\nmutex m\ngo 1 main:\n    lock m\n    lock m\n")
    assert gt.blocked == {1: (1, "MutexLock")}


def test_unlock_by_other_goroutine_is_allowed():
    # main: spawn 2, lock m; goroutine 2 unlocks it (Go mutexes are not owned)
    _, gt = drive(two("lock m", "unlock m", "mutex m"), [1, 1, 2])
    assert not gt.faults and gt.outcome == "completed"


# -- rwmutex ------------------------------------------------------------------

def test_readers_share():
    _, gt = simulate(two("rlock rw\nrunlock rw", "rlock rw\nrunlock rw", "rwmutex rw"), "1 2 2 1")
    assert gt.outcome == "completed"


def test_writer_waits_for_reader():
    m = machine(two("rlock rw\nrunlock rw", "wlock rw\nwunlock rw", "rwmutex rw"))
    for g in (1, 1, 2):
        m.step(g)
    assert m.blocked() == {2: (0, "RWMutexLock")}
    m.step(1)
    assert m.blocked() == {}


def test_reader_waits_for_writer():
    m = machine(two("wlock rw\nwunlock rw", "rlock rw\nrunlock rw", "rwmutex rw"))
    for g in (1, 1, 2):
        m.step(g)
    assert m.blocked() == {2: (0, "RWMutexRLock")}
    with pytest.raises(ScheduleError):
        m.step(2)


def test_pending_writer_blocks_new_readers():
    # goroutine 17 holds a read lock, 18 queues a write lock, 17's second
    # read lock then waits behind the writer: both stuck
    trace, gt = simulate(KUBERNETES, "17 1 18 17")
    assert gt.blocked == {17: (1, "RWMutexRLock"), 18: (0, "RWMutexLock")}
    assert gt.globally_blocked and validate_trace(trace) == []


def test_recursive_rlock_without_writer_completes():
    _, gt = simulate("program t\nrwmutex rw\ngo 1 main:\n    rlock rw\n    rlock rw\n    runlock rw\n    runlock rw\n")
    assert gt.outcome == "completed"


def test_runlock_of_unlocked_faults():
    _, gt = simulate("program t\nrwmutex rw\ngo 1 main:\n    runlock rw\n")
    assert [f.message for f in gt.faults] == ["RUnlock of unlocked RWMutex"]


# -- waitgroup ----------------------------------------------------------------

def test_wait_on_zero_counter_does_not_block():
    _, gt = simulate("program t\nwaitgroup wg\ngo 1 main:\n    wgwait wg\n")
    assert gt.outcome == "completed"


def test_wait_blocks_while_counter_positive():
    _, gt = simulate("program t\nwaitgroup wg\ngo 1 main:\n    wgadd wg 2\n    wgadd wg -1\n    wgwait wg\n")
    assert gt.blocked == {1: (2, "WGWait")}


def test_done_to_zero_releases_waiters():
    trace, gt = drive(two("wgadd wg 1\nwgwait wg", "wgadd wg -1", "waitgroup wg"), [1, 1, 1, 2])
    assert gt.outcome == "completed"
    end = next(e for e in trace.events if e.kind is K.WGWait and e.phase is Phase.End)
    assert trace.by_seq()[end.aux["peer"]].kind is K.WGAdd


def test_negative_counter_faults():
    trace, gt = simulate("program t\nwaitgroup wg\ngo 1 main:\n    wgadd wg -1\n")
    assert [f.message for f in gt.faults] == ["negative WaitGroup counter"]
    assert "fault" in trace.events[-1].aux


# -- cond ---------------------------------------------------------------------

COND2 = two("lock m\ncondwait c m\nunlock m", "lock m\nsignal c\nunlock m", "mutex m\ncond c")


def test_condwait_releases_mutex_atomically():
    trace, gt = drive(COND2, [1, 1, 1, 2, 2, 2])
    assert gt.outcome == "completed"
    g1 = [(e.kind, e.phase) for e in trace.events if e.gid == 1]
    i = g1.index((K.CondWait, Phase.Begin))
    assert g1[i + 1] == (K.MutexUnlock, Phase.Atomic)
    # the unlock directly follows the wait Begin in the global order too
    seqs = [e.seq for e in trace.events if e.gid == 1]
    assert seqs[i + 1] == seqs[i] + 1


def test_woken_waiter_reacquires_mutex():
    trace, _ = drive(COND2, [1, 1, 1, 2, 2, 2])
    g1 = [(e.kind, e.phase) for e in trace.events if e.gid == 1]
    i = g1.index((K.CondWait, Phase.End))
    assert g1[i + 1 : i + 3] == [(K.MutexLock, Phase.Begin), (K.MutexLock, Phase.End)]


def test_signal_before_wait_is_lost():
    _, gt = drive(COND2, [1, 2, 2, 2, 2])
    assert gt.blocked == {1: (2, "CondWait")}


def test_signal_wakes_one_waiter_fifo():
    text = """\
program t
mutex m
cond c
go 1 main:
    spawn 2
    spawn 3
    lock m
    signal c
    unlock m
go 2 a:
    lock m
    condwait c m
    unlock m
go 3 b:
    lock m
    condwait c m
    unlock m
"""
    # both waiters park (2 first), then main signals once
    _, gt = drive(text, [1, 1, 2, 2, 3, 3, 1, 1, 1])
    assert set(gt.blocked) == {3}


def test_broadcast_wakes_every_waiter():
    text = """\
program t
mutex m
cond c
go 1 main:
    spawn 2
    spawn 3
    lock m
    broadcast c
    unlock m
go 2 a:
    lock m
    condwait c m
    unlock m
go 3 b:
    lock m
    condwait c m
    unlock m
"""
    _, gt = drive(text, [1, 1, 2, 2, 3, 3, 1, 1, 1])
    assert gt.outcome == "completed"


def test_condwait_without_locker_faults():
    _, gt = simulate("program t\nmutex m\ncond c\ngo 1 main:\n    condwait c m\n")
    assert [f.message for f in gt.faults] == ["condwait without holding its locker"]


# -- context ------------------------------------------------------------------

def test_cancel_closes_done_channel():
    trace, gt = simulate(two("cancel ctx", "recv ctx.done", "context ctx"), "2 1")
    assert gt.outcome == "completed"
    create = next(e for e in trace.events if e.kind is K.CtxCreate)
    recv = next(e for e in trace.events if e.kind is K.ChanRecv)
    assert recv.obj == create.aux["done_channel"]


def test_double_cancel_is_harmless():
    _, gt = simulate("program t\ncontext ctx\ngo 1 main:\n    cancel ctx\n    cancel ctx\n    recv ctx.done\n")
    assert gt.outcome == "completed" and not gt.faults


def test_uncancelled_context_blocks_waiter():
    _, gt = simulate("program t\ncontext ctx\ngo 1 main:\n    recv ctx.done\n")
    assert gt.blocked == {1: (0, "ChanRecv")}


# -- schedules, bounds, determinism -------------------------------------------

def test_etcd_script_globally_blocks():
    trace, gt = simulate(ETCD, "1 1 3")
    assert gt.blocked == {2: (0, "MutexLock"), 3: (1, "ChanRecv")}
    assert gt.globally_blocked and gt.leaked == {2, 3}


def test_script_pick_of_unknown_goroutine_is_an_error():
    with pytest.raises(ScheduleError):
        simulate(ETCD, "9")


def test_step_bound_reported_distinctly():
    _, gt = run(model(ETCD), RoundRobin(), step_bound=3)
    assert gt.outcome == "step_bound" and not gt.globally_blocked


def test_runs_are_deterministic():
    for s in (RoundRobin(), SeededRandom(7), Script.parse("1 1 3")):
        (a, ga), (b, gb) = run(model(ETCD), s), run(model(ETCD), s)
        assert write_trace(a) == write_trace(b) and ga == gb


def test_script_text_round_trip():
    s = Script.parse("1 2:1, 3 # comment\n4")
    assert s.picks == ((1, None), (2, 1), (3, None), (4, None))
    assert Script.parse(s.format()) == s


def test_ground_truth_sets_are_disjoint():
    _, gt = simulate(ETCD, "1 1 3")
    assert not (gt.completed & set(gt.blocked))
    assert 1 not in gt.leaked


def test_undeclared_object_is_a_model_error():
    with pytest.raises(ModelError):
        model("program t\ngo 1 main:\n    lock nope\n")
