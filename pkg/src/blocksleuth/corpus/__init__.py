"""Bundled kernels: one buggy model, one fixed model and expectations per case.

Each case ``<name>`` lives in ``data/`` as ``<name>.model`` (buggy),
``<name>.fixed.model`` and ``<name>.json``::

    {"category": "ChannelMutexDeadlock",
     "description": "...",
     "schedules": [
        {"label": "blocking", "schedule": "script:1 1 3",
         "outcome": "global_block", "expected": ["ChannelMutexDeadlock", ...]}
     ]}

``schedule`` is ``round-robin``, ``seed:<n>`` or ``script:<picks>``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..analysis import Config, analyze
from ..model import ProgramModel, parse_model
from ..oracle import enumerate_schedules
from ..simulator import RoundRobin, Schedule, Script, SeededRandom, run

CATEGORIES = (
    "MissingUnlock",
    "WaitGroup",
    "Channel",
    "DoubleLock",
    "MutexDeadlock",
    "ChannelMutexDeadlock",
    "Cond",
)
MIN_CASES_PER_CATEGORY = 2
FIXED_SCHEDULES: tuple[Schedule, ...] = (RoundRobin(),) + tuple(SeededRandom(s) for s in range(4))


def parse_schedule(text: str) -> Schedule:
    text = text.strip()
    if text == "round-robin":
        return RoundRobin()
    if text.startswith("seed:"):
        return SeededRandom(int(text[5:]))
    if text.startswith("script:"):
        return Script.parse(text[7:])
    raise ValueError(f"unknown schedule {text!r}")


def format_schedule(s: Schedule) -> str:
    if isinstance(s, RoundRobin):
        return "round-robin"
    if isinstance(s, SeededRandom):
        return f"seed:{s.seed}"
    return "script:" + s.format().strip()


@dataclass(frozen=True)
class ScheduleExpectation:
    label: str
    schedule: Schedule
    expected: frozenset[str]
    outcome: str | None = None


@dataclass(frozen=True)
class CorpusCase:
    name: str
    category: str
    model: ProgramModel
    fixed_variant: ProgramModel
    schedules: tuple[ScheduleExpectation, ...]
    description: str = ""


@dataclass
class CaseResult:
    name: str
    category: str
    passed: bool
    diffs: list[str] = field(default_factory=list)


@dataclass
class CorpusResult:
    cases: list[CaseResult]
    problems: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.cases) and not self.problems and all(c.passed for c in self.cases)

    def category_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in CATEGORIES}
        for r in self.cases:
            counts[r.category] = counts.get(r.category, 0) + 1
        return counts


def _data_dir() -> Path:
    return Path(str(resources.files("blocksleuth.corpus") / "data"))


def load_case(directory: Path, name: str) -> CorpusCase:
    meta = json.loads((directory / f"{name}.json").read_text(encoding="utf-8"))
    buggy = parse_model((directory / f"{name}.model").read_text(encoding="utf-8"), f"{name}.model")
    fixed = parse_model((directory / f"{name}.fixed.model").read_text(encoding="utf-8"), f"{name}.fixed.model")
    if meta["category"] not in CATEGORIES:
        raise ValueError(f"{name}: unknown category {meta['category']!r}")
    schedules = tuple(
        ScheduleExpectation(s["label"], parse_schedule(s["schedule"]), frozenset(s["expected"]), s.get("outcome"))
        for s in meta["schedules"]
    )
    return CorpusCase(name, meta["category"], buggy, fixed, schedules, meta.get("description", ""))


def load_corpus(directory: str | Path | None = None) -> list[CorpusCase]:
    d = Path(directory) if directory is not None else _data_dir()
    names = sorted(p.name[: -len(".json")] for p in d.glob("*.json"))
    return [load_case(d, n) for n in names]


def check_case(case: CorpusCase, config: Config | None = None) -> CaseResult:
    config = config or Config()
    diffs: list[str] = []
    for exp in case.schedules:
        trace, gt = run(case.model, exp.schedule, config.step_bound)
        kinds = {f.kind.value for f in analyze(trace, config).findings}
        if kinds != exp.expected:
            missing = sorted(exp.expected - kinds)
            extra = sorted(kinds - exp.expected)
            diffs.append(f"{exp.label}: missing {missing} unexpected {extra}")
        if exp.outcome is not None and gt.outcome != exp.outcome:
            diffs.append(f"{exp.label}: outcome {gt.outcome}, expected {exp.outcome}")
    verdict = enumerate_schedules(case.fixed_variant, strict=False)
    if verdict.deadlock_reachable or not verdict.complete:
        diffs.append("fixed variant: oracle does not certify it deadlock free")
    for s in FIXED_SCHEDULES:
        trace, _ = run(case.fixed_variant, s, config.step_bound)
        kinds = sorted({f.kind.value for f in analyze(trace, config).findings})
        if kinds:
            diffs.append(f"fixed variant under {format_schedule(s)}: unexpected {kinds}")
    return CaseResult(case.name, case.category, not diffs, diffs)


def run_corpus(cases: list[CorpusCase] | None = None, config: Config | None = None) -> CorpusResult:
    """Simulate, detect and predict every case; compare finding kinds."""
    start = time.perf_counter()
    cases = load_corpus() if cases is None else cases
    results = [check_case(c, config) for c in cases]
    result = CorpusResult(results)
    if not cases:
        result.problems.append("corpus is empty")
    for cat, n in result.category_counts().items():
        if n < MIN_CASES_PER_CATEGORY:
            result.problems.append(f"category {cat} has {n} case(s), needs {MIN_CASES_PER_CATEGORY}")
    result.seconds = time.perf_counter() - start
    return result
