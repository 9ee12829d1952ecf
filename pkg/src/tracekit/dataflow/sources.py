"""Taint sources and the interned tag-set lattice."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

from ..errors import UsageError
from ..primitives import normalize_address

ENV_OPCODES = ("CALLER", "ORIGIN", "TIMESTAMP", "NUMBER", "CALLVALUE")


@dataclass(frozen=True, slots=True)
class CalldataRange:
    frame: int
    offset: int
    length: int

    def label(self) -> str:
        return f"calldata:{self.frame}:{self.offset}:{self.length}"


@dataclass(frozen=True, slots=True)
class StorageSlot:
    address: str
    slot: int

    def label(self) -> str:
        return f"storage:{self.address}:{hex(self.slot)}"


@dataclass(frozen=True, slots=True)
class EnvOpcode:
    op: str

    def __post_init__(self) -> None:
        if self.op not in ENV_OPCODES:
            raise ValueError(f"{self.op} is not an environment source; pick one of {', '.join(ENV_OPCODES)}")

    def label(self) -> str:
        return f"env:{self.op}"


@dataclass(frozen=True, slots=True)
class CallReturn:
    frame: int

    def label(self) -> str:
        return f"return:{self.frame}"


@dataclass(frozen=True, slots=True)
class Unknown:
    """Provenance lost through an unmodelled computation on tainted input."""

    def label(self) -> str:
        return "unknown"


TaintSource = Union[CalldataRange, StorageSlot, EnvOpcode, CallReturn, Unknown]
UNKNOWN = Unknown()

_KIND_ORDER = {CalldataRange: 0, StorageSlot: 1, EnvOpcode: 2, CallReturn: 3, Unknown: 4}


def source_key(src: TaintSource) -> tuple:
    """Total order used to emit facts deterministically."""
    if isinstance(src, CalldataRange):
        rest: tuple = (src.frame, src.offset, src.length)
    elif isinstance(src, StorageSlot):
        rest = (src.address, src.slot)
    elif isinstance(src, EnvOpcode):
        rest = (ENV_OPCODES.index(src.op),)
    elif isinstance(src, CallReturn):
        rest = (src.frame,)
    else:
        rest = ()
    return (_KIND_ORDER[type(src)],) + rest


def parse_source(text: str) -> TaintSource:
    """Parse a source spec: ``calldata:FRAME:OFF:LEN``, ``storage:ADDR:SLOT``,
    ``env:OP`` or ``return:FRAME``."""
    parts = text.strip().split(":")
    try:
        kind = parts[0].lower()
        if kind == "calldata" and len(parts) == 4:
            return CalldataRange(int(parts[1], 0), int(parts[2], 0), int(parts[3], 0))
        if kind == "storage" and len(parts) == 3:
            return StorageSlot(normalize_address(parts[1]), int(parts[2], 0))
        if kind == "env" and len(parts) == 2:
            return EnvOpcode(parts[1].upper())
        if kind == "return" and len(parts) == 2:
            return CallReturn(int(parts[1], 0))
    except ValueError as exc:
        raise UsageError(f"bad source spec {text!r}: {exc}") from None
    raise UsageError(f"bad source spec {text!r}")


class TagLattice:
    """Interns tag sets as small integers; id 0 is the empty set.

    Sets hold indices into ``sources``; unions are memoized.
    """

    def __init__(self, sources: Iterable[TaintSource] = ()) -> None:
        self.sources: list[TaintSource] = []
        self._index: dict[TaintSource, int] = {}
        self._sets: list[frozenset[int]] = [frozenset()]
        self._ids: dict[frozenset[int], int] = {frozenset(): 0}
        self._union: dict[tuple[int, int], int] = {}
        for src in sorted(set(sources), key=source_key):
            self.source_index(src)

    def source_index(self, src: TaintSource) -> int:
        idx = self._index.get(src)
        if idx is None:
            idx = self._index[src] = len(self.sources)
            self.sources.append(src)
        return idx

    def singleton(self, src: TaintSource) -> int:
        return self.intern(frozenset((self.source_index(src),)))

    def intern(self, members: frozenset[int]) -> int:
        tag = self._ids.get(members)
        if tag is None:
            tag = self._ids[members] = len(self._sets)
            self._sets.append(members)
        return tag

    def union(self, a: int, b: int) -> int:
        if a == b or b == 0:
            return a
        if a == 0:
            return b
        key = (a, b) if a < b else (b, a)
        tag = self._union.get(key)
        if tag is None:
            tag = self._union[key] = self.intern(self._sets[a] | self._sets[b])
        return tag

    def union_all(self, tags: Iterable[int]) -> int:
        out = 0
        for t in tags:
            if t:
                out = self.union(out, t)
        return out

    def members(self, tag: int) -> list[TaintSource]:
        return sorted((self.sources[i] for i in self._sets[tag]), key=source_key)

    def __len__(self) -> int:
        return len(self._sets)


__all__ = [
    "CallReturn",
    "CalldataRange",
    "ENV_OPCODES",
    "EnvOpcode",
    "StorageSlot",
    "TagLattice",
    "TaintSource",
    "UNKNOWN",
    "Unknown",
    "parse_source",
    "source_key",
]
