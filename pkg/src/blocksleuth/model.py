"""Declarative program models executed by the simulator.

Model file grammar (one statement per line, ``#`` starts a comment)::

    program <name>
    mutex <name>            rwmutex <name>
    chan <name> <capacity>  waitgroup <name>
    cond <name>             context <name>      # also declares <name>.done
    entry <gid>                                 # default: first goroutine
    go <gid> [<label>]:
        <op> ...

Operations::

    spawn <gid>       lock m / unlock m      rlock rw / runlock rw
    wlock rw / wunlock rw                    send ch / recv ch / close ch
    select send a | recv b | default         wgadd wg <delta> / wgwait wg
    cancel ctx        condwait c m           signal c / broadcast c
    exit
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path


class ModelError(ValueError):
    pass


OBJECT_TYPES = ("mutex", "rwmutex", "chan", "waitgroup", "cond", "context")

# op name -> expected object type of its first operand
_OPERAND = {
    "lock": "mutex",
    "unlock": "mutex",
    "rlock": "rwmutex",
    "runlock": "rwmutex",
    "wlock": "rwmutex",
    "wunlock": "rwmutex",
    "send": "chan",
    "recv": "chan",
    "close": "chan",
    "wgadd": "waitgroup",
    "wgwait": "waitgroup",
    "cancel": "context",
    "condwait": "cond",
    "signal": "cond",
    "broadcast": "cond",
}
OP_NAMES = frozenset(_OPERAND) | {"spawn", "select", "exit"}


@dataclass(frozen=True)
class Decl:
    name: str
    type: str
    capacity: int = 0
    implicit: bool = False  # context done channels


@dataclass(frozen=True)
class SelectCase:
    dir: str  # "send" | "recv"
    chan: str


@dataclass(frozen=True)
class Op:
    name: str
    obj: str | None = None
    arg: int | str | None = None  # spawn target, wgadd delta, condwait locker
    cases: tuple[SelectCase, ...] = ()
    has_default: bool = False
    line: int = 0

    def __str__(self) -> str:
        if self.name == "select":
            parts = [f"{c.dir} {c.chan}" for c in self.cases]
            if self.has_default:
                parts.append("default")
            return "select " + " | ".join(parts)
        if self.name == "spawn":
            return f"spawn {self.arg}"
        if self.name == "exit":
            return "exit"
        if self.arg is not None:
            return f"{self.name} {self.obj} {self.arg}"
        return f"{self.name} {self.obj}"


@dataclass(frozen=True)
class Body:
    gid: int
    label: str
    ops: tuple[Op, ...]
    line: int = 0


@dataclass(frozen=True)
class ProgramModel:
    name: str
    objects: dict[str, Decl]
    goroutines: dict[int, Body]
    entry: int
    source: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        check_model(self)

    @property
    def file_name(self) -> str:
        return self.source or f"{self.name}.model"

    def channels(self) -> list[Decl]:
        return [d for d in self.objects.values() if d.type == "chan"]


def check_model(model: ProgramModel) -> None:
    if model.entry not in model.goroutines:
        raise ModelError(f"entry goroutine {model.entry} has no body")
    spawned: dict[int, int] = {}
    for body in model.goroutines.values():
        for op in body.ops:
            where = f"goroutine {body.gid} line {op.line}"
            if op.name not in OP_NAMES:
                raise ModelError(f"{where}: unknown op {op.name!r}")
            if op.name == "spawn":
                target = op.arg
                if target not in model.goroutines or target == model.entry:
                    raise ModelError(f"{where}: spawn of undeclared goroutine {target}")
                spawned[target] = spawned.get(target, 0) + 1
                if spawned[target] > 1:
                    raise ModelError(f"{where}: goroutine {target} spawned more than once")
            elif op.name == "select":
                if not op.cases and not op.has_default:
                    raise ModelError(f"{where}: empty select")
                for case in op.cases:
                    _need(model, case.chan, "chan", where)
                    _check_chan_use(model, case.chan, case.dir, where)
            elif op.name in _OPERAND:
                _need(model, op.obj, _OPERAND[op.name], where)
                if op.name in ("send", "close"):
                    _check_chan_use(model, op.obj, op.name, where)
                if op.name == "condwait":
                    decl = model.objects.get(str(op.arg))
                    if decl is None or decl.type not in ("mutex", "rwmutex"):
                        raise ModelError(f"{where}: condwait needs a declared mutex, got {op.arg!r}")
                if op.name == "wgadd" and not isinstance(op.arg, int):
                    raise ModelError(f"{where}: wgadd needs an integer delta")


def _need(model: ProgramModel, name: str | None, type_: str, where: str) -> None:
    decl = model.objects.get(name or "")
    if decl is None:
        raise ModelError(f"{where}: undeclared object {name!r}")
    if decl.type != type_:
        raise ModelError(f"{where}: {name!r} is a {decl.type}, expected {type_}")


def _check_chan_use(model: ProgramModel, name: str, use: str, where: str) -> None:
    if use in ("send", "close") and model.objects[name].implicit:
        raise ModelError(f"{where}: {name!r} is receive-only")


# ---------------------------------------------------------------------------
# text format


def _int(tok: str, where: str) -> int:
    try:
        return int(tok, 0)
    except ValueError:
        raise ModelError(f"{where}: expected integer, got {tok!r}") from None


def _parse_op(words: list[str], line_no: int) -> Op:
    where = f"line {line_no}"
    name = words[0]
    if name == "exit":
        return Op("exit", line=line_no)
    if name == "spawn":
        if len(words) != 2:
            raise ModelError(f"{where}: spawn <gid>")
        return Op("spawn", arg=_int(words[1], where), line=line_no)
    if name == "select":
        cases, has_default = [], False
        for part in " ".join(words[1:]).split("|"):
            toks = part.split()
            if toks == ["default"]:
                has_default = True
            elif len(toks) == 2 and toks[0] in ("send", "recv"):
                cases.append(SelectCase(toks[0], toks[1]))
            else:
                raise ModelError(f"{where}: bad select case {part.strip()!r}")
        return Op("select", cases=tuple(cases), has_default=has_default, line=line_no)
    if name not in _OPERAND:
        raise ModelError(f"{where}: unknown op {name!r}")
    if name == "wgadd":
        if len(words) != 3:
            raise ModelError(f"{where}: wgadd <wg> <delta>")
        return Op(name, words[1], _int(words[2], where), line=line_no)
    if name == "condwait":
        if len(words) != 3:
            raise ModelError(f"{where}: condwait <cond> <mutex>")
        return Op(name, words[1], words[2], line=line_no)
    if len(words) != 2:
        raise ModelError(f"{where}: {name} <object>")
    return Op(name, words[1], line=line_no)


def parse_model(text: str, source: str = "") -> ProgramModel:
    name = Path(source).stem if source else "model"
    objects: dict[str, Decl] = {}
    bodies: dict[int, dict] = {}
    order: list[int] = []
    entry = None
    current = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        head = words[0]
        where = f"line {line_no}"
        if head == "program":
            name = words[1] if len(words) > 1 else name
        elif head in OBJECT_TYPES:
            if len(words) < 2:
                raise ModelError(f"{where}: {head} needs a name")
            obj = words[1]
            if obj in objects:
                raise ModelError(f"{where}: duplicate object {obj!r}")
            if head == "chan":
                cap = _int(words[2], where) if len(words) > 2 else 0
                if cap < 0:
                    raise ModelError(f"{where}: negative capacity")
                objects[obj] = Decl(obj, "chan", cap)
            else:
                objects[obj] = Decl(obj, head)
                if head == "context":
                    objects[obj + ".done"] = Decl(obj + ".done", "chan", 0, implicit=True)
        elif head == "entry":
            entry = _int(words[1], where)
        elif head == "go":
            spec = line[2:].strip().rstrip(":").split()
            if not spec:
                raise ModelError(f"{where}: go <gid> [label]:")
            gid = _int(spec[0], where)
            if gid in bodies:
                raise ModelError(f"{where}: duplicate goroutine {gid}")
            label = spec[1] if len(spec) > 1 else f"g{gid}"
            bodies[gid] = {"label": label, "ops": [], "line": line_no}
            order.append(gid)
            current = gid
        else:
            if current is None:
                raise ModelError(f"{where}: operation outside a goroutine block")
            bodies[current]["ops"].append(_parse_op(words, line_no))
    if not order:
        raise ModelError("model declares no goroutines")
    goroutines = {
        gid: Body(gid, b["label"], tuple(b["ops"]), b["line"]) for gid, b in bodies.items()
    }
    return ProgramModel(name, objects, goroutines, order[0] if entry is None else entry, source)


def load_model(path: str | os.PathLike) -> ProgramModel:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), source=path.name)


def format_model(model: ProgramModel) -> str:
    lines = [f"program {model.name}"]
    for d in model.objects.values():
        if d.implicit:
            continue
        lines.append(f"chan {d.name} {d.capacity}" if d.type == "chan" else f"{d.type} {d.name}")
    lines.append(f"entry {model.entry}")
    for body in model.goroutines.values():
        lines.append(f"go {body.gid} {body.label}:")
        lines.extend(f"    {op}" for op in body.ops)
    return "\n".join(lines) + "\n"
