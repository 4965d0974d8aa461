from __future__ import annotations

import pytest

from blocksleuth.analysis import Config, analyze
from blocksleuth.findings import FindingKind as F, Provenance

from conftest import ABBA, ETCD, KUBERNETES, simulate


def kinds(result):
    return sorted(f.kind.value for f in result.findings)


def test_config_validation():
    for bad in ({"select_mode": "x"}, {"cycle_bound": 1}, {"step_bound": 0}, {"format": "xml"}, {"cond_mode": "x"}):
        with pytest.raises(ValueError):
            Config(**bad)


def test_etcd_blocking_run():
    trace, _ = simulate(ETCD, "1 1 3")
    r = analyze(trace)
    assert kinds(r) == ["BlockedChannelRecv", "ChannelMutexDeadlock", "GoroutineLeak", "GoroutineLeak"]
    cmd = next(f for f in r.findings if f.kind is F.ChannelMutexDeadlock)
    assert cmd.provenance is Provenance.DetectedAndPredicted
    assert r.blocked_goroutines(trace) == {2, 3} and r.leaked_goroutines() == {2, 3}


def test_etcd_completing_run_is_predicted():
    trace, gt = simulate(ETCD)
    assert gt.outcome == "completed"
    r = analyze(trace)
    assert kinds(r) == ["ChannelMutexDeadlock"]
    assert r.findings[0].provenance is Provenance.Predicted
    assert r.blocked_goroutines(trace) == set()


def test_prediction_covered_by_observation_is_not_repeated():
    trace, _ = simulate(ABBA, "1 2 1 2")
    r = analyze(trace)
    deadlocks = [f for f in r.findings if f.kind is F.MutexDeadlock]
    assert len(deadlocks) == 1 and deadlocks[0].provenance is Provenance.DetectedAndPredicted


def test_kubernetes_blocking_run():
    trace, _ = simulate(KUBERNETES, "17 1 18 17")
    assert kinds(analyze(trace)) == ["DoubleRLock", "GoroutineLeak", "GoroutineLeak"]


def test_hb_filter_can_be_disabled():
    trace, _ = simulate(ETCD)
    assert kinds(analyze(trace, Config(hb_filter=False))) == ["ChannelMutexDeadlock"]


def test_cond_mode_flows_through():
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
    trace, _ = simulate(text, "2 2 3 3 1")
    assert "BlockedCond" in kinds(analyze(trace))
    assert "BlockedCond" not in kinds(analyze(trace, Config(cond_mode="any-signal")))
