"""End-to-end analysis: online detectors, offline predictors, merged findings."""

from __future__ import annotations

from dataclasses import dataclass, field

from .detectors import (
    COND_ANY_SIGNAL,
    COND_WAKEUP,
    TraceIndex,
    detect_blocked_channel_ops,
    detect_blocked_cond,
    detect_blocked_waitgroup,
    detect_faults,
    detect_goroutine_leak,
    detect_uncanceled_context,
)
from .events import Trace
from .findings import AnalysisWarning, BugFinding, FindingKind, sort_findings
from .hb import HappensBefore
from .predictors import (
    explain_blocked_locks,
    lock_pass,
    predict_channel_mutex_deadlock,
    predict_double_lock_missing_unlock,
    predict_mutex_deadlock,
)
from .simulator import DEFAULT_STEP_BOUND


@dataclass(frozen=True)
class Config:
    select_mode: str = "any"
    cycle_bound: int = 4
    step_bound: int = DEFAULT_STEP_BOUND
    format: str = "text"
    semantic_table_version: str = "1.17.3"
    cond_mode: str = COND_WAKEUP
    hb_filter: bool = True

    def __post_init__(self) -> None:
        if self.select_mode not in ("any", "all"):
            raise ValueError(f"select_mode must be 'any' or 'all', got {self.select_mode!r}")
        if self.format not in ("json", "text"):
            raise ValueError(f"format must be 'json' or 'text', got {self.format!r}")
        if self.cond_mode not in (COND_WAKEUP, COND_ANY_SIGNAL):
            raise ValueError(f"unknown cond_mode {self.cond_mode!r}")
        if self.cycle_bound < 2:
            raise ValueError("cycle_bound must be at least 2")
        if self.step_bound <= 0:
            raise ValueError("step_bound must be positive")


class _LazyHB:
    """Builds the happens-before index on first query only."""

    def __init__(self, trace: Trace) -> None:
        self._trace = trace
        self._hb: HappensBefore | None = None

    def _get(self) -> HappensBefore:
        if self._hb is None:
            self._hb = HappensBefore(self._trace)
        return self._hb

    def before(self, a: int, b: int) -> bool:
        return self._get().before(a, b)

    def concurrent(self, a: int, b: int) -> bool:
        return self._get().concurrent(a, b)


@dataclass
class AnalysisResult:
    findings: list[BugFinding]
    warnings: list[AnalysisWarning] = field(default_factory=list)
    informational: list[int] = field(default_factory=list)  # created, never exited, not blocked

    def blocked_goroutines(self, trace: Trace) -> set[int]:
        """Goroutines whose pending operation is named by an observed finding."""
        index = TraceIndex.build(trace)
        pending = {b.seq: g for g, b in index.pending.items()}
        return {
            pending[s] for f in self.findings if f.provenance.observed for s in f.blocked_at if s in pending
        }

    def leaked_goroutines(self) -> set[int]:
        return {g for f in self.findings if f.kind is FindingKind.GoroutineLeak for g in f.goroutines}


def _covered(pred: BugFinding, seen: list[BugFinding]) -> bool:
    return any(
        f.kind is pred.kind
        and set(pred.goroutines) <= set(f.goroutines)
        and set(pred.objects) <= set(f.objects)
        for f in seen
    )


def analyze(trace: Trace, config: Config | None = None) -> AnalysisResult:
    config = config or Config()
    ix = TraceIndex.build(trace)
    lp = lock_pass(trace)
    hb = _LazyHB(trace) if config.hb_filter else None

    findings: list[BugFinding] = []
    findings += detect_blocked_channel_ops(trace, ix)
    findings += detect_blocked_waitgroup(trace, ix)
    findings += detect_blocked_cond(trace, ix, config.cond_mode)
    findings += detect_uncanceled_context(trace, ix)
    findings += detect_faults(trace, ix)
    findings += lp.faults

    explained, warnings = explain_blocked_locks(lp)
    findings += explained

    predicted = predict_mutex_deadlock(lp.tuples, config.cycle_bound, hb)
    dl, dl_warnings = predict_double_lock_missing_unlock(trace, hb, lp)
    predicted += dl
    predicted += predict_channel_mutex_deadlock(lp.envs, hb, config.select_mode)
    warnings += dl_warnings

    merged = list(findings)
    for f in sort_findings(predicted):
        if not _covered(f, findings):
            merged.append(f)
    # the same prediction may arise from several equivalent occurrences
    unique = list(dict.fromkeys(merged))
    leaks = detect_goroutine_leak(trace, unique, ix)
    unique += leaks.findings
    return AnalysisResult(sort_findings(unique), warnings, leaks.informational)

