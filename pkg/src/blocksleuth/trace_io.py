"""Line-oriented trace files and runtime-function semantic tables.

Trace file layout::

    #trace {"go_version":null,"program":"demo","schema_version":"1"}
    seq=0 ts=0 gid=1 kind=MainStart phase=A
    seq=1 ts=1 gid=1 kind=MutexLock phase=B obj=0x100 ctx=[main@demo.model:3]

A record may name its event by ``func=<runtime function>`` instead of
``kind=``; the function is resolved through a :class:`SemanticTable`.
"""

from __future__ import annotations

import io
import json
import os
import re
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping

from .events import Event, Frame, Phase, SemanticKind, Trace, normalize_aux

SCHEMA_VERSION = "1"
DEFAULT_TABLE_VERSION = "1.17.3"
TABLE_DIR_ENV = "BLOCKSLEUTH_TABLE_DIR"
HEADER_PREFIX = "#trace "

_DECODER = json.JSONDecoder()
_PHASES = {p.value: p for p in Phase}
_FIELD_ORDER = ("seq", "ts", "gid", "kind", "func", "phase", "obj", "aux", "ctx")


class TraceFormatError(ValueError):
    pass


class MalformedRecord(TraceFormatError):
    def __init__(self, line_no: int, reason: str = "") -> None:
        self.line_no = line_no
        super().__init__(f"line {line_no}: malformed record{': ' + reason if reason else ''}")


class UnknownKind(TraceFormatError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unknown semantic kind or function {name!r}")


class UnsupportedVersion(LookupError):
    def __init__(self, version: str) -> None:
        self.version = version
        super().__init__(f"no semantic table bundled for go {version}")


class UnknownFieldWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SemanticTable:
    version: str
    entries: Mapping[str, SemanticKind]

    def lookup(self, function: str) -> SemanticKind:
        try:
            return self.entries[function]
        except KeyError:
            raise UnknownKind(function) from None

    def functions_for(self, kind: SemanticKind) -> list[str]:
        return sorted(f for f, k in self.entries.items() if k is kind)


def _table_text(version: str, table_dir: str | os.PathLike | None) -> str:
    name = f"go{version}.tsv"
    table_dir = table_dir or os.environ.get(TABLE_DIR_ENV)
    if table_dir:
        path = Path(table_dir) / name
        if not path.is_file():
            raise UnsupportedVersion(version)
        return path.read_text(encoding="utf-8")
    res = resources.files("blocksleuth") / "tables" / name
    if not res.is_file():
        raise UnsupportedVersion(version)
    return res.read_text(encoding="utf-8")


def load_semantic_table(version: str = DEFAULT_TABLE_VERSION, table_dir: str | os.PathLike | None = None) -> SemanticTable:
    text = _table_text(version, table_dir)
    entries: dict[str, SemanticKind] = {}
    declared = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, _, kind = line.partition("\t")
        if name == "version":
            declared = kind.strip()
            continue
        try:
            entries[name.strip()] = SemanticKind[kind.strip()]
        except KeyError:
            raise UnknownKind(kind.strip()) from None
    if declared is not None and declared != version:
        raise UnsupportedVersion(version)
    return SemanticTable(version, entries)


# ---------------------------------------------------------------------------
# parsing


def _split_fields(line: str, line_no: int) -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = []
    i, n = 0, len(line)
    while i < n:
        if line[i] == " ":
            i += 1
            continue
        eq = line.find("=", i)
        if eq < 0:
            raise MalformedRecord(line_no, f"expected key=value at column {i}")
        key = line[i:eq]
        i = eq + 1
        if i < n and line[i] == "{":
            try:
                value, i = _DECODER.raw_decode(line, i)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"bad aux: {exc.msg}") from None
        elif i < n and line[i] == "[":
            end = line.find("]", i)
            while end >= 0 and end + 1 < n and line[end + 1] != " ":
                end = line.find("]", end + 1)
            if end < 0:
                raise MalformedRecord(line_no, "unterminated list")
            value = line[i + 1 : end]
            i = end + 1
        else:
            end = line.find(" ", i)
            end = n if end < 0 else end
            value = line[i:end]
            i = end
        out.append((key, value))
    return out


def _parse_frames(text: str, line_no: int) -> tuple[Frame, ...]:
    if not text:
        return ()
    frames = []
    for part in text.split(";"):
        func, at, loc = part.partition("@")
        file, colon, lno = loc.rpartition(":")
        if not at or not colon or not lno.isdigit():
            raise MalformedRecord(line_no, f"bad frame {part!r}")
        frames.append(Frame(func, file, int(lno)))
    return tuple(frames)


# The canonical writer's layout; lines in this shape skip the general scanner.
_CANONICAL = re.compile(
    r"seq=(\d+) ts=(\d+) gid=(\d+) kind=(\w+) phase=([BEA])"
    r"(?: obj=0x([0-9a-f]+))?(?: aux=(\{.*?\}))?(?: ctx=\[([^\]]*)\])?"
)
_KINDS = {k.value: k for k in SemanticKind}


def _parse_canonical(line: str, line_no: int, frames: dict[str, tuple[Frame, ...]]) -> Event | None:
    m = _CANONICAL.fullmatch(line)
    if m is None:
        return None
    seq, ts, gid, kind, phase, obj, aux, ctx = m.groups()
    k = _KINDS.get(kind)
    if k is None:
        return None
    if aux is not None:
        try:
            aux = json.loads(aux)
        except json.JSONDecodeError:
            return None
        if not isinstance(aux, dict):
            return None
        aux = normalize_aux(aux)
    ctx = ctx or ""
    f = frames.get(ctx)
    if f is None:
        f = frames[ctx] = _parse_frames(ctx, line_no)
    return Event(int(seq), int(ts), int(gid), k, _PHASES[phase], None if obj is None else int(obj, 16), aux or {}, f)


def _parse_record(line: str, line_no: int, table: SemanticTable | None) -> Event:
    fields = dict()
    for key, value in _split_fields(line, line_no):
        if key not in _FIELD_ORDER:
            warnings.warn(f"line {line_no}: ignoring unknown field {key!r}", UnknownFieldWarning, stacklevel=3)
            continue
        fields[key] = value
    try:
        seq = int(fields["seq"])
        ts = int(fields["ts"])
        gid = int(fields["gid"])
        phase = _PHASES[fields["phase"]]
    except (KeyError, ValueError, TypeError):
        raise MalformedRecord(line_no, "missing or invalid seq/ts/gid/phase") from None
    if "kind" in fields:
        try:
            kind = SemanticKind[fields["kind"]]
        except KeyError:
            raise UnknownKind(str(fields["kind"])) from None
    elif "func" in fields:
        table = table or load_semantic_table()
        kind = table.lookup(str(fields["func"]))
    else:
        raise MalformedRecord(line_no, "record needs kind= or func=")
    obj = None
    if "obj" in fields:
        try:
            obj = int(str(fields["obj"]), 16)
        except ValueError:
            raise MalformedRecord(line_no, "obj must be hex") from None
    aux = fields.get("aux", {})
    if not isinstance(aux, dict):
        raise MalformedRecord(line_no, "aux must be an object")
    ctx = _parse_frames(str(fields.get("ctx", "")), line_no)
    return Event(seq, ts, gid, kind, phase, obj, normalize_aux(aux), ctx)


def parse_trace(source: str | bytes | IO[str] | Iterable[str], table: SemanticTable | None = None) -> Trace:
    """Parse trace records; ``source`` may be text, bytes, a file or an iterable of lines."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    meta = {"program": "", "schema_version": SCHEMA_VERSION, "go_version": None}
    events = []
    frames: dict[str, tuple[Frame, ...]] = {}
    for line_no, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith(HEADER_PREFIX):
            try:
                header = json.loads(line[len(HEADER_PREFIX) :])
            except json.JSONDecodeError:
                raise MalformedRecord(line_no, "bad header") from None
            if not isinstance(header, dict):
                raise MalformedRecord(line_no, "bad header")
            meta.update(header)
            continue
        if line.startswith("#"):
            continue
        e = _parse_canonical(line, line_no, frames)
        events.append(e if e is not None else _parse_record(line, line_no, table))
    return Trace(tuple(events), meta)


def read_trace(path: str | os.PathLike, table: SemanticTable | None = None) -> Trace:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh, table)


# ---------------------------------------------------------------------------
# writing


def _dump(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def format_event(e: Event) -> str:
    parts = [f"seq={e.seq}", f"ts={e.ts}", f"gid={e.gid}", f"kind={e.kind.value}", f"phase={e.phase.value}"]
    if e.obj is not None:
        parts.append(f"obj={e.obj:#x}")
    if e.aux:
        parts.append(f"aux={_dump(e.aux)}")
    if e.ctx:
        parts.append("ctx=[" + ";".join(f"{f.function}@{f.file}:{f.line}" for f in e.ctx) + "]")
    return " ".join(parts)


def write_trace(trace: Trace) -> bytes:
    meta = {"program": "", "schema_version": SCHEMA_VERSION, "go_version": None}
    meta.update(trace.meta)
    lines = [HEADER_PREFIX + _dump(meta)]
    lines.extend(format_event(e) for e in trace.events)
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_trace(trace: Trace, path: str | os.PathLike) -> None:
    Path(path).write_bytes(write_trace(trace))
