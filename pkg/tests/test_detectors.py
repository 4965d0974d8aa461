from __future__ import annotations

from blocksleuth.detectors import (
    COND_ANY_SIGNAL,
    TraceIndex,
    detect_blocked_channel_ops,
    detect_blocked_cond,
    detect_blocked_waitgroup,
    detect_faults,
    detect_goroutine_leak,
    detect_uncanceled_context,
)
from blocksleuth.findings import FindingKind as F, Provenance

from conftest import A, B, E, K, TraceBuilder, simulate


def kinds(findings):
    return [f.kind for f in findings]


# -- channels -----------------------------------------------------------------

def test_moby_style_blocked_send():
    tb = TraceBuilder()
    tb.add(1, K.ChanCreate, A, 0x100, capacity=0)
    tb.spawn(1, 2)
    s = tb.begin(2, K.ChanSend, 0x100, block=True)
    tb.exit(1)
    out = detect_blocked_channel_ops(tb.trace())
    assert kinds(out) == [F.BlockedChannelSend]
    assert out[0].blocked_at == (s,) and out[0].objects == (0x100,) and out[0].goroutines == (2,)
    assert out[0].provenance is Provenance.Detected


def test_completed_send_is_not_reported():
    tb = TraceBuilder()
    tb.spawn(1, 2)
    tb.begin(1, K.ChanSend, 0x100, block=True)
    tb.op(2, K.ChanRecv, 0x100, block=True)
    tb.add(1, K.ChanSend, E, 0x100, block=True)
    assert detect_blocked_channel_ops(tb.trace()) == []


def test_blocked_recv_and_select_list_candidates():
    tb = TraceBuilder()
    tb.spawn(1, 2)
    tb.begin(1, K.ChanRecv, 0x100, block=True)
    tb.begin(2, K.Select, candidates=((0x101, "recv"), (0x102, "send"), (0x101, "send")), has_default=False)
    out = detect_blocked_channel_ops(tb.trace())
    assert kinds(out) == [F.BlockedChannelRecv, F.BlockedSelect]
    assert out[1].objects == (0x101, 0x102)


def test_other_goroutines_ops_are_causes():
    trace, _ = simulate("program t\nchan c 0\ngo 1 main:\n    spawn 2\n    recv c\n    recv c\ngo 2 g:\n    send c\n")
    out = detect_blocked_channel_ops(trace)
    assert kinds(out) == [F.BlockedChannelRecv]
    causes = {trace.by_seq()[s].gid for s in out[0].caused_by}
    assert causes == {2}


# -- waitgroup ----------------------------------------------------------------

def test_waitgroup_counter_positive_reports_pending_wait():
    tb = TraceBuilder()
    tb.add(1, K.WGAdd, A, 0x100, delta=2)
    tb.spawn(1, 2)
    tb.exit(2)
    w = tb.begin(1, K.WGWait, 0x100)
    out = detect_blocked_waitgroup(tb.trace())
    assert kinds(out) == [F.BlockedWaitGroup] and out[0].blocked_at == (w,)


def test_balanced_waitgroup_is_clean():
    tb = TraceBuilder()
    tb.add(1, K.WGAdd, A, 0x100, delta=1)
    tb.add(1, K.WGAdd, A, 0x100, delta=-1)
    tb.op(1, K.WGWait, 0x100)
    assert detect_blocked_waitgroup(tb.trace()) == []


def test_negative_counter_is_a_fault_not_a_block():
    tb = TraceBuilder()
    tb.add(1, K.WGAdd, A, 0x100, delta=-1)
    out = detect_blocked_waitgroup(tb.trace())
    assert kinds(out) == [F.Fault]


# -- cond ---------------------------------------------------------------------

def test_cond_wait_with_nothing_else():
    tb = TraceBuilder()
    tb.begin(1, K.CondWait, 0x100)
    assert kinds(detect_blocked_cond(tb.trace())) == [F.BlockedCond]


def test_cond_wait_broadcast_then_end():
    tb = TraceBuilder()
    tb.spawn(1, 2)
    tb.begin(1, K.CondWait, 0x100)
    tb.add(2, K.CondBroadcast, A, 0x100)
    tb.add(1, K.CondWait, E, 0x100)
    assert detect_blocked_cond(tb.trace()) == []


def _signal_consumed_elsewhere():
    # g2 and g3 wait, g1 signals once; g2 is woken, g3 stays pending
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
    trace, gt = simulate(text, "2 2 3 3 1")
    assert set(gt.blocked) == {3}
    return trace


def test_signal_consumed_by_other_waiter_any_signal_mode():
    # the literal rule: some signal fired after the wait, so no finding
    assert detect_blocked_cond(_signal_consumed_elsewhere(), mode=COND_ANY_SIGNAL) == []


def test_signal_consumed_by_other_waiter_wakeup_mode():
    out = detect_blocked_cond(_signal_consumed_elsewhere())
    assert kinds(out) == [F.BlockedCond] and out[0].goroutines == (3,)


def test_signal_before_wait_does_not_release():
    tb = TraceBuilder()
    tb.spawn(1, 2)
    tb.add(2, K.CondSignal, A, 0x100)
    tb.begin(1, K.CondWait, 0x100)
    for mode in ("wakeup", COND_ANY_SIGNAL):
        assert kinds(detect_blocked_cond(tb.trace(), mode=mode)) == [F.BlockedCond]


# -- context ------------------------------------------------------------------

def _ctx(cancel: bool, waiter: bool):
    tb = TraceBuilder()
    tb.add(1, K.ChanCreate, A, 0x109, capacity=0)
    tb.add(1, K.CtxCreate, A, 0x108, done_channel=0x109)
    tb.spawn(1, 2)
    if waiter:
        tb.begin(2, K.ChanRecv, 0x109, block=True)
    if cancel:
        tb.add(1, K.CtxCancel, A, 0x108)
        if waiter:
            tb.add(2, K.ChanRecv, E, 0x109, block=True)
    return tb.trace()


def test_uncancelled_context_with_waiter():
    out = detect_uncanceled_context(_ctx(cancel=False, waiter=True))
    assert kinds(out) == [F.UncanceledContext] and out[0].objects == (0x108, 0x109)


def test_cancelled_context():
    assert detect_uncanceled_context(_ctx(cancel=True, waiter=True)) == []


def test_context_without_waiter_is_not_a_bug():
    assert detect_uncanceled_context(_ctx(cancel=False, waiter=False)) == []


def test_select_waiter_on_done_channel_counts():
    tb = TraceBuilder()
    tb.add(1, K.CtxCreate, A, 0x108, done_channel=0x109)
    tb.begin(1, K.Select, candidates=((0x109, "recv"), (0x10A, "recv")), has_default=False)
    assert kinds(detect_uncanceled_context(tb.trace())) == [F.UncanceledContext]


# -- leaks --------------------------------------------------------------------

def test_blocked_goroutine_without_exit_leaks():
    tb = TraceBuilder()
    tb.spawn(1, 2)
    tb.begin(2, K.ChanRecv, 0x100, block=True)
    t = tb.trace()
    rep = detect_goroutine_leak(t, detect_blocked_channel_ops(t))
    assert kinds(rep.findings) == [F.GoroutineLeak] and rep.findings[0].goroutines == (2,)


def test_exited_goroutine_is_not_a_leak():
    tb = TraceBuilder()
    tb.spawn(1, 2)
    tb.exit(2)
    rep = detect_goroutine_leak(tb.trace(), [])
    assert rep.findings == [] and rep.informational == []


def test_missing_exit_without_block_is_informational():
    tb = TraceBuilder()
    tb.spawn(1, 2)
    tb.op(2, K.MutexLock, 0x100)
    tb.add(2, K.MutexUnlock, A, 0x100)
    rep = detect_goroutine_leak(tb.trace(), [])
    assert rep.findings == [] and rep.informational == [2]


def test_faults_are_reported():
    trace, _ = simulate("program t\nchan c 0\ngo 1 main:\n    close c\n    close c\n")
    out = detect_faults(trace)
    assert kinds(out) == [F.Fault] and out[0].detail == "close of closed channel"


def test_clean_trace_has_no_findings():
    trace, _ = simulate("program t\nchan c 0\ngo 1 main:\n    spawn 2\n    recv c\ngo 2 g:\n    send c\n")
    ix = TraceIndex.build(trace)
    assert not ix.pending
    for det in (detect_blocked_channel_ops, detect_blocked_waitgroup, detect_blocked_cond,
                detect_uncanceled_context, detect_faults):
        assert det(trace, ix) == []
