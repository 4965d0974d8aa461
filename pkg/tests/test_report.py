from __future__ import annotations

import json

import pytest

from blocksleuth.analysis import analyze
from blocksleuth.findings import BugFinding, FindingKind as F, Provenance
from blocksleuth.report import SCHEMA, DanglingEventRef, findings_from_json, render_report

from conftest import ETCD, simulate


def etcd(schedule="1 1 3"):
    trace, _ = simulate(ETCD, schedule)
    return trace, analyze(trace)


def test_empty_findings_render_zero_summary():
    trace, _ = simulate(ETCD)
    doc = json.loads(render_report([], trace, "json"))
    assert doc["schema"] == SCHEMA and doc["summary"]["bugs"] == 0 and doc["findings"] == []
    assert b"0 bugs found" in render_report([], trace, "text")


def test_fig1_text_report_marks_blocked_and_cause():
    trace, r = etcd()
    text = render_report(r.findings, trace, "text").decode()
    assert "ChannelMutexDeadlock" in text
    section = text.split("ChannelMutexDeadlock (detected+predicted)")[1].split("\n[")[0]
    assert "goroutine 2:" in section and "goroutine 3:" in section
    marked = [l for l in section.splitlines() if l.strip().startswith(">>")]
    assert any("MutexLock/B" in l for l in marked) and any("ChanRecv/B" in l for l in marked)
    assert any(l.strip().startswith("**") for l in section.splitlines())


def test_fig1_json_refs_resolve_to_source_lines():
    trace, r = etcd()
    doc = json.loads(render_report(r.findings, trace, "json"))
    cmd = next(f for f in doc["findings"] if f["kind"] == "ChannelMutexDeadlock")
    kinds = {ref["kind"] for ref in cmd["blocked_at"]}
    assert kinds == {"MutexLock", "ChanRecv"}
    for ref in cmd["blocked_at"] + cmd["caused_by"]:
        assert ref["file"] == "inline.model" and isinstance(ref["line"], int)


def test_rendering_is_byte_identical():
    trace, r = etcd()
    for fmt in ("json", "text"):
        assert render_report(r.findings, trace, fmt) == render_report(list(reversed(r.findings)), trace, fmt)


def test_findings_sorted_by_kind_then_seq():
    trace, r = etcd()
    doc = json.loads(render_report(r.findings, trace, "json"))
    order = [F(f["kind"]) for f in doc["findings"]]
    ranks = [list(F).index(k) for k in order]
    assert ranks == sorted(ranks)


def test_json_round_trip():
    trace, r = etcd()
    back = findings_from_json(render_report(r.findings, trace, "json"))
    assert sorted(back, key=BugFinding.sort_key) == sorted(r.findings, key=BugFinding.sort_key)


def test_dangling_reference():
    trace, _ = simulate(ETCD)
    bad = BugFinding(F.BlockedChannelRecv, Provenance.Detected, (1,), (999,))
    with pytest.raises(DanglingEventRef):
        render_report([bad], trace)


def test_unknown_format():
    trace, _ = simulate(ETCD)
    with pytest.raises(ValueError):
        render_report([], trace, "xml")
