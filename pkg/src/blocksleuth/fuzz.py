"""Random small program models for property and oracle-consistency checks.

Generated models stay inside the oracle's comfort zone (at most four
goroutines, at most twelve operations each). Generation is biased toward
well-formed synchronization — channel operations come in send/receive
pairs across goroutines, critical sections are balanced — so that a good
share of models is deadlock free; ``chaos`` controls how often an
unbalanced operation is injected instead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .model import Body, Decl, Op, ProgramModel, SelectCase

MAX_GOROUTINES = 4
MAX_OPS = 12


@dataclass(frozen=True)
class FuzzConfig:
    max_goroutines: int = MAX_GOROUTINES
    max_ops: int = MAX_OPS
    chaos: float = 0.15
    buffered: float = 0.25


class _Builder:
    def __init__(self, rng: random.Random, cfg: FuzzConfig) -> None:
        self.rng = rng
        self.cfg = cfg
        self.objects: dict[str, Decl] = {}
        n = rng.randint(2, cfg.max_goroutines)
        self.gids = list(range(1, n + 1))
        self.ops: dict[int, list[Op]] = {g: [] for g in self.gids}

    def decl(self, name: str, type_: str, capacity: int = 0) -> str:
        if name not in self.objects:
            self.objects[name] = Decl(name, type_, capacity)
            if type_ == "context":
                self.objects[name + ".done"] = Decl(name + ".done", "chan", 0, implicit=True)
        return name

    def room(self, g: int, n: int) -> bool:
        reserve = (len(self.gids) - 1) if g == self.gids[0] else 0
        return len(self.ops[g]) + n + reserve <= self.cfg.max_ops

    def add(self, g: int, ops: list[Op]) -> bool:
        if not self.room(g, len(ops)):
            return False
        self.ops[g].extend(ops)
        return True

    def other(self, g: int) -> int:
        return self.rng.choice([x for x in self.gids if x != g])

    def locked(self, g: int, inner: list[Op]) -> list[Op]:
        r = self.rng
        if r.random() < 0.3:
            m = self.decl(r.choice(["rw0", "rw1"]), "rwmutex")
            pre, post = (("rlock", "runlock") if r.random() < 0.5 else ("wlock", "wunlock"))
        else:
            m = self.decl(r.choice(["m0", "m1", "m2"]), "mutex")
            pre, post = "lock", "unlock"
        return [Op(pre, m)] + inner + [Op(post, m)]

    # -- snippets ------------------------------------------------------------

    def channel_pair(self) -> None:
        r = self.rng
        cap = 1 if r.random() < self.cfg.buffered else 0
        ch = self.decl(f"c{len(self.objects)}", "chan", cap)
        a = r.choice(self.gids)
        b = self.other(a)
        send, recv = [Op("send", ch)], [Op("recv", ch)]
        if r.random() < 0.4:
            send = self.locked(a, send)
        if r.random() < 0.4:
            recv = self.locked(b, recv)
        if r.random() < 0.2:
            recv = [Op("select", cases=(SelectCase("recv", ch),), has_default=r.random() < 0.3)]
        if self.room(a, len(send)) and self.room(b, len(recv)):
            self.add(a, send)
            self.add(b, recv)

    def close_pair(self) -> None:
        r = self.rng
        ch = self.decl(f"c{len(self.objects)}", "chan", 0)
        a = r.choice(self.gids)
        b = self.other(a)
        close, recv = [Op("close", ch)], [Op("recv", ch)]
        if r.random() < 0.4:
            close = self.locked(a, close)
        if r.random() < 0.4:
            recv = self.locked(b, recv)
        if self.room(a, len(close)) and self.room(b, len(recv)):
            self.add(a, close)
            self.add(b, recv)

    def nested_locks(self) -> None:
        r = self.rng
        g = r.choice(self.gids)
        a, b = r.sample(["m0", "m1", "m2"], 2)
        self.decl(a, "mutex")
        self.decl(b, "mutex")
        self.add(g, [Op("lock", a), Op("lock", b), Op("unlock", b), Op("unlock", a)])

    def critical(self) -> None:
        g = self.rng.choice(self.gids)
        self.add(g, self.locked(g, []))

    def cond_pair(self) -> None:
        r = self.rng
        c = self.decl("cv", "cond")
        m = self.decl("m0", "mutex")
        a = r.choice(self.gids)
        b = self.other(a)
        wait = [Op("lock", m), Op("condwait", c, m), Op("unlock", m)]
        note = [Op("lock", m), Op("broadcast" if r.random() < 0.5 else "signal", c), Op("unlock", m)]
        if r.random() < 0.5:
            note = note[1:2]
        if self.room(a, len(wait)) and self.room(b, len(note)):
            self.add(a, wait)
            self.add(b, note)

    def context_pair(self) -> None:
        r = self.rng
        ctx = self.decl("ctx", "context")
        a = r.choice(self.gids)
        b = self.other(a)
        wait = [Op("recv", ctx + ".done")]
        if r.random() < 0.3:
            ch = self.decl(f"c{len(self.objects)}", "chan", 0)
            wait = [Op("select", cases=(SelectCase("recv", ctx + ".done"), SelectCase("recv", ch)))]
        if self.room(b, len(wait)) and self.room(a, 1):
            self.add(b, wait)
            self.add(a, [Op("cancel", ctx)])

    def waitgroup(self) -> None:
        r = self.rng
        main = self.gids[0]
        wg = self.decl("wg", "waitgroup")
        workers = [g for g in self.gids[1:] if r.random() < 0.7] or self.gids[1:2]
        if not self.room(main, 2):
            return
        self.ops[main].insert(0, Op("wgadd", wg, len(workers)))
        for w in workers:
            self.add(w, [Op("wgadd", wg, -1)])
        self.add(main, [Op("wgwait", wg)])

    def chaos(self) -> None:
        r = self.rng
        g = r.choice(self.gids)
        pick = r.random()
        if pick < 0.3:
            ch = self.decl(f"c{len(self.objects)}", "chan", 0)
            self.add(g, [Op(r.choice(["send", "recv"]), ch)])
        elif pick < 0.5:
            m = self.decl("m0", "mutex")
            self.add(g, [Op("lock", m)])
        elif pick < 0.7:
            rw = self.decl("rw0", "rwmutex")
            self.add(g, [Op("rlock", rw), Op("rlock", rw), Op("runlock", rw), Op("runlock", rw)])
        elif pick < 0.85:
            ch = self.decl(f"c{len(self.objects)}", "chan", 0)
            self.add(g, [Op("close", ch)])
            self.add(self.other(g), [Op("close", ch)])
        else:
            ch = self.decl(f"c{len(self.objects)}", "chan", 0)
            self.add(g, [Op("select", cases=(SelectCase("recv", ch), SelectCase("send", ch)))])

    def build(self, name: str) -> ProgramModel:
        r = self.rng
        snippets = [self.channel_pair, self.channel_pair, self.close_pair, self.nested_locks, self.critical,
                    self.cond_pair, self.context_pair, self.waitgroup]
        for _ in range(r.randint(1, 4)):
            if r.random() < self.cfg.chaos:
                self.chaos()
            else:
                r.choice(snippets)()
        main = self.gids[0]
        # spawn every other goroutine from main at a random early point
        body = self.ops[main]
        for child in self.gids[1:]:
            pos = r.randint(0, min(len(body), 2))
            body.insert(pos, Op("spawn", arg=child))
        ops = {g: tuple(self._lines(g)) for g in self.gids}
        goroutines = {g: Body(g, "main" if g == main else f"worker{g}", ops[g], 0) for g in self.gids}
        return ProgramModel(name, dict(self.objects), goroutines, main, f"{name}.model")

    def _lines(self, g: int):
        base = 100 * g
        for i, op in enumerate(self.ops[g]):
            yield Op(op.name, op.obj, op.arg, op.cases, op.has_default, base + i + 1)


def random_model(seed: int, cfg: FuzzConfig | None = None) -> ProgramModel:
    """Deterministic random model for ``seed``."""
    rng = random.Random(seed)
    return _Builder(rng, cfg or FuzzConfig()).build(f"fuzz{seed}")
