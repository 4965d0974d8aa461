"""Deterministic JSON and text rendering of findings.

JSON schema (``schema_version`` 1)::

    {
      "schema": "blocksleuth.report",
      "schema_version": "1",
      "program": str,
      "summary": {"bugs": int, "by_kind": {kind: count}, "by_provenance": {...}},
      "findings": [
        {"kind", "provenance", "goroutines": [int], "objects": ["0x.."],
         "witness_mutex": "0x.." | null, "detail": str,
         "blocked_at": [EventRef], "caused_by": [EventRef]}
      ],
      "warnings": [{"kind", "seqs": [int], "message"}],
      "informational_goroutines": [int]
    }

    EventRef = {"seq", "gid", "kind", "phase", "obj": "0x.." | null,
                "function": str | null, "file": str | null, "line": int | null}

The text layout lists, per finding, each involved goroutine's
synchronization operations around the referenced events, marking the
blocked-at events with ``>>`` and the caused-by events with ``**``.
"""

from __future__ import annotations

import json
from collections import Counter
from typing import Iterable

from .events import Event, Trace
from .findings import AnalysisWarning, BugFinding, sort_findings

SCHEMA = "blocksleuth.report"
SCHEMA_VERSION = "1"
CONTEXT_EVENTS = 2
MAX_WINDOW = 24


class DanglingEventRef(LookupError):
    def __init__(self, seq: int) -> None:
        self.seq = seq
        super().__init__(f"finding references seq {seq}, which is not in the trace")


def _event_ref(e: Event) -> dict:
    loc = e.location
    return {
        "seq": e.seq,
        "gid": e.gid,
        "kind": e.kind.value,
        "phase": e.phase.value,
        "obj": None if e.obj is None else f"{e.obj:#x}",
        "function": loc.function if loc else None,
        "file": loc.file if loc else None,
        "line": loc.line if loc else None,
    }


def _check_refs(findings: Iterable[BugFinding], by_seq: dict[int, Event]) -> None:
    for f in findings:
        for s in f.refs():
            if s not in by_seq:
                raise DanglingEventRef(s)


def report_dict(
    findings: Iterable[BugFinding],
    trace: Trace,
    warnings: Iterable[AnalysisWarning] = (),
    informational: Iterable[int] = (),
) -> dict:
    ordered = sort_findings(findings)
    by_seq = trace.by_seq()
    _check_refs(ordered, by_seq)
    out = []
    for f in ordered:
        d = f.to_dict()
        d["blocked_at"] = [_event_ref(by_seq[s]) for s in f.blocked_at]
        d["caused_by"] = [_event_ref(by_seq[s]) for s in f.caused_by]
        out.append(d)
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "program": str(trace.meta.get("program", "")),
        "summary": {
            "bugs": len(ordered),
            "by_kind": dict(sorted(Counter(f.kind.value for f in ordered).items())),
            "by_provenance": dict(sorted(Counter(f.provenance.value for f in ordered).items())),
        },
        "findings": out,
        "warnings": [
            {"kind": w.kind, "seqs": list(w.seqs), "message": w.message}
            for w in sorted(warnings, key=lambda w: (w.seqs, w.kind, w.message))
        ],
        "informational_goroutines": sorted(informational),
    }


def findings_from_json(data: str | bytes | dict) -> list[BugFinding]:
    """Inverse of the ``findings`` part of :func:`render_report` (JSON)."""
    doc = json.loads(data) if isinstance(data, (str, bytes)) else data
    if doc.get("schema") != SCHEMA:
        raise ValueError("not a blocksleuth report")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema version {doc.get('schema_version')!r}")
    return [BugFinding.from_dict(d) for d in doc["findings"]]


def _describe(e: Event) -> str:
    loc = e.location
    where = f"  {loc.function} {loc.file}:{loc.line}" if loc else ""
    obj = "" if e.obj is None else f" {e.obj:#x}"
    if e.candidates():
        obj = " [" + ", ".join(f"{d} {c:#x}" for c, d in e.candidates()) + "]"
    return f"#{e.seq:<6} {e.kind.value}/{e.phase.value}{obj}{where}"


def _goroutine_window(events: list[Event], marked: set[int]) -> list[Event | None]:
    """Events of one goroutine around the marked ones; None marks an elision."""
    idx = [i for i, e in enumerate(events) if e.seq in marked]
    if not idx:
        return events[-CONTEXT_EVENTS:]
    keep: set[int] = set()
    for i in idx:
        keep.update(range(max(0, i - CONTEXT_EVENTS), min(len(events), i + CONTEXT_EVENTS + 1)))
    out: list[Event | None] = []
    prev = -1
    for i in sorted(keep)[:MAX_WINDOW]:
        if prev != -1 and i != prev + 1:
            out.append(None)
        out.append(events[i])
        prev = i
    return out


def _render_text(doc: dict, findings: list[BugFinding], trace: Trace) -> str:
    lines = [f"blocksleuth report: {doc['program'] or '(unnamed)'}"]
    n = doc["summary"]["bugs"]
    lines.append(f"{n} bug{'s' if n != 1 else ''} found")
    for kind, count in doc["summary"]["by_kind"].items():
        lines.append(f"  {kind}: {count}")
    per_gid: dict[int, list[Event]] = {}
    needed = {g for f in findings for g in f.goroutines}
    for e in trace.events:
        if e.gid in needed:
            per_gid.setdefault(e.gid, []).append(e)
    for i, f in enumerate(findings, 1):
        lines.append("")
        objs = ", ".join(f"{o:#x}" for o in f.objects)
        lines.append(f"[{i}] {f.kind.value} ({f.provenance.value}) goroutines {list(f.goroutines)} objects [{objs}]")
        if f.witness_mutex is not None:
            lines.append(f"    witness mutex {f.witness_mutex:#x}")
        if f.detail:
            lines.append(f"    {f.detail}")
        blocked, caused = set(f.blocked_at), set(f.caused_by)
        for g in f.goroutines:
            lines.append(f"    goroutine {g}:")
            for e in _goroutine_window(per_gid.get(g, []), blocked | caused):
                if e is None:
                    lines.append("          ...")
                    continue
                mark = ">>" if e.seq in blocked else ("**" if e.seq in caused else "  ")
                lines.append(f"      {mark} {_describe(e)}")
    if doc["warnings"]:
        lines.append("")
        lines.append("warnings:")
        lines.extend(f"  {w['kind']} {w['seqs']}: {w['message']}" for w in doc["warnings"])
    if doc["informational_goroutines"]:
        lines.append("")
        lines.append(
            "not exited, not blocked (informational): "
            + ", ".join(str(g) for g in doc["informational_goroutines"])
        )
    lines.append("")
    lines.append("legend: >> blocked at   ** caused by")
    return "\n".join(lines) + "\n"


def render_report(
    findings: Iterable[BugFinding],
    trace: Trace,
    format: str = "json",
    warnings: Iterable[AnalysisWarning] = (),
    informational: Iterable[int] = (),
) -> bytes:
    findings = sort_findings(findings)
    doc = report_dict(findings, trace, warnings, informational)
    if format == "json":
        return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")
    if format == "text":
        return _render_text(doc, findings, trace).encode("utf-8")
    raise ValueError(f"unknown report format {format!r}")
