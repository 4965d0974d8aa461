"""Finding records shared by detectors, predictors and reports."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any


class FindingKind(enum.Enum):
    BlockedChannelSend = "BlockedChannelSend"
    BlockedChannelRecv = "BlockedChannelRecv"
    BlockedSelect = "BlockedSelect"
    BlockedWaitGroup = "BlockedWaitGroup"
    BlockedCond = "BlockedCond"
    UncanceledContext = "UncanceledContext"
    GoroutineLeak = "GoroutineLeak"
    MutexDeadlock = "MutexDeadlock"
    DoubleLock = "DoubleLock"
    DoubleRLock = "DoubleRLock"
    MissingUnlock = "MissingUnlock"
    ChannelMutexDeadlock = "ChannelMutexDeadlock"
    Fault = "Fault"


class Provenance(enum.Enum):
    Detected = "detected"
    Predicted = "predicted"
    DetectedAndPredicted = "detected+predicted"

    @property
    def observed(self) -> bool:
        return self is not Provenance.Predicted


_KIND_ORDER = {k: i for i, k in enumerate(FindingKind)}
NON_BLOCKING_KINDS = frozenset({FindingKind.Fault, FindingKind.MissingUnlock})
DEADLOCK_KINDS = frozenset(
    {FindingKind.MutexDeadlock, FindingKind.ChannelMutexDeadlock, FindingKind.DoubleLock, FindingKind.DoubleRLock}
)


@dataclass(frozen=True)
class BugFinding:
    kind: FindingKind
    provenance: Provenance
    goroutines: tuple[int, ...]
    blocked_at: tuple[int, ...] = ()
    caused_by: tuple[int, ...] = ()
    objects: tuple[int, ...] = ()
    witness_mutex: int | None = None
    detail: str = ""

    @property
    def first_seq(self) -> int:
        refs = self.blocked_at or self.caused_by
        return min(refs) if refs else -1

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.first_seq, self.blocked_at, self.caused_by)

    def refs(self) -> tuple[int, ...]:
        return self.blocked_at + self.caused_by

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "provenance": self.provenance.value,
            "goroutines": list(self.goroutines),
            "blocked_at": list(self.blocked_at),
            "caused_by": list(self.caused_by),
            "objects": [f"{o:#x}" for o in self.objects],
            "witness_mutex": None if self.witness_mutex is None else f"{self.witness_mutex:#x}",
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BugFinding":
        def seqs(v):
            return tuple(x["seq"] if isinstance(x, dict) else int(x) for x in v)

        wm = d.get("witness_mutex")
        return cls(
            kind=FindingKind(d["kind"]),
            provenance=Provenance(d["provenance"]),
            goroutines=tuple(int(g) for g in d["goroutines"]),
            blocked_at=seqs(d.get("blocked_at", ())),
            caused_by=seqs(d.get("caused_by", ())),
            objects=tuple(int(o, 16) for o in d.get("objects", ())),
            witness_mutex=None if wm is None else int(wm, 16),
            detail=d.get("detail", ""),
        )


@dataclass(frozen=True)
class AnalysisWarning:
    kind: str
    seqs: tuple[int, ...]
    message: str


def sort_findings(findings) -> list[BugFinding]:
    return sorted(findings, key=BugFinding.sort_key)
