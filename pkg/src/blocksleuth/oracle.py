"""Bounded exhaustive interleaving exploration.

Explores every scheduler option (goroutine and ready select case) from the
initial state, memoising visited machine states. Models are loop free, so
every maximal path ends in a terminal state; a deadlock is reachable iff some
terminal state still has a blocked goroutine.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ProgramModel
from .simulator import Machine, Script, run

DEFAULT_DEPTH = 10_000


class BoundExceeded(RuntimeError):
    def __init__(self, verdict: "OracleVerdict") -> None:
        self.verdict = verdict
        super().__init__(f"exploration truncated at depth {verdict.depth_bound}; verdict inconclusive")


@dataclass(frozen=True)
class OracleVerdict:
    deadlock_reachable: bool
    witness: Script | None
    outcome_count: int
    states: int
    complete: bool
    depth_bound: int

    @property
    def inconclusive(self) -> bool:
        return not self.complete and not self.deadlock_reachable


def _minimize(model: ProgramModel, picks: list[tuple[int, int | None]]) -> Script:
    """Shortest prefix of ``picks`` that still ends in a global block when replayed."""
    for n in range(len(picks) + 1):
        script = Script(tuple(picks[:n]))
        _, gt = run(model, script)
        if gt.blocked:
            return script
    return Script(tuple(picks))  # pragma: no cover - the full path always reproduces


def enumerate_schedules(model: ProgramModel, depth_bound: int = DEFAULT_DEPTH, strict: bool = True) -> OracleVerdict:
    """Decide whether any interleaving of ``model`` leaves a goroutine blocked.

    With ``strict`` set, a truncated search that found no deadlock raises
    :class:`BoundExceeded` carrying the partial verdict.
    """
    if depth_bound <= 0:
        raise ValueError("depth_bound must be positive")
    root = Machine(model, record=False)
    seen: dict[tuple, int] = {}
    terminals: set[tuple] = set()
    truncated = False
    witness_path: list[tuple[int, int | None]] | None = None

    # iterative DFS; each frame is (machine, depth, choice path)
    stack = [(root, 0, ())]
    while stack:
        m, depth, path = stack.pop()
        key = m.key()
        prev = seen.get(key)
        if prev is not None and prev <= depth:
            continue
        seen[key] = depth
        opts = m.options()
        if not opts:
            terminals.add(key)
            if witness_path is None and m.blocked():
                witness_path = list(path)
            continue
        if depth >= depth_bound:
            truncated = True
            continue
        choice = len(opts) > 1
        for g, k in reversed(opts):
            child = m.clone()
            child.step(g, k)
            stack.append((child, depth + 1, path + ((g, k),) if choice else path))

    found = witness_path is not None
    verdict = OracleVerdict(
        deadlock_reachable=found,
        witness=_minimize(model, witness_path) if found else None,
        outcome_count=len(terminals),
        states=len(seen),
        complete=not truncated,
        depth_bound=depth_bound,
    )
    if strict and verdict.inconclusive:
        raise BoundExceeded(verdict)
    return verdict
