"""Per-instruction fact files for datalog-style trace analyzers.

Grammar (version 1), UTF-8 with LF endings::

    #tx <hash>
    #block <n>
    #from <addr>
    #to <addr>
    <index>\\t<relation>\\t<operand>,<operand>,...

``relation`` is the lower-cased mnemonic as it appears in the trace.
Operands are the consumed stack words, top first, then the produced word
when the instruction pushes one, all as minimal 0x-prefixed hex.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedTraceError, SchemaError
from .opcodes import lookup
from .primitives import min_hex
from .trace import RawTrace, TransactionMeta
from .tree import InvocationNode

FORMAT_VERSION = 1
HEADER_KEYS = ("tx", "block", "from", "to")


@dataclass(frozen=True, slots=True)
class FactLine:
    index: int
    relation: str
    operands: tuple[int, ...]

    def render(self) -> str:
        return f"{self.index}\t{self.relation}\t{','.join(min_hex(v) for v in self.operands)}"


def _next_same_depth(trace: RawTrace) -> list[int]:
    """For each entry, the next entry in the same frame (-1 if none).

    For calls and creates this skips the child frame, landing on the entry
    whose stack holds the call's result.
    """
    entries = trace.entries
    out = [-1] * len(entries)
    last: dict[int, int] = {}
    for i in range(len(entries) - 1, -1, -1):
        d = entries[i].depth
        out[i] = last.get(d, -1)
        last[d] = i
        # a shallower entry ends every deeper frame seen so far
        for deeper in [k for k in last if k > d]:
            del last[deeper]
    return out


def fact_lines(trace: RawTrace) -> list[FactLine]:
    entries = trace.entries
    successor = _next_same_depth(trace)
    out = []
    for i, entry in enumerate(entries):
        info = lookup(entry.op)
        relation = entry.op.lower()
        if info is None:
            out.append(FactLine(i, relation, ()))
            continue
        stack = entry.stack
        if info.pops > len(stack) and entry.error is None:
            raise MalformedTraceError(i, f"{entry.op} needs {info.pops} stack words, snapshot has {len(stack)}")
        operands = list(reversed(stack[len(stack) - min(info.pops, len(stack)):]))
        if info.pushes and entry.error is None:
            j = successor[i]
            if j >= 0 and entries[j].stack:
                operands.append(entries[j].stack[-1])
        out.append(FactLine(i, relation, tuple(operands)))
    return out


def to_fact_file(meta: TransactionMeta, trace: RawTrace, tree: InvocationNode | None = None) -> str:
    """Render the fact file; ``tree`` is accepted for interface symmetry and unused."""
    header = {
        "tx": meta.tx_hash,
        "block": str(meta.block_number),
        "from": meta.origin,
        "to": meta.target or "-",
    }
    lines = [f"#{key} {header[key]}" for key in HEADER_KEYS]
    lines.extend(line.render() for line in fact_lines(trace))
    return "\n".join(lines) + "\n"


def parse_fact_file(text: str) -> tuple[dict[str, str], list[FactLine]]:
    header: dict[str, str] = {}
    facts = []
    for n, raw in enumerate(text.split("\n")):
        if not raw:
            continue
        if raw.startswith("#"):
            key, _, value = raw[1:].partition(" ")
            header[key] = value
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise SchemaError(f"line {n + 1}", "expected index, relation and operands")
        try:
            operands = tuple(int(v, 16) for v in parts[2].split(",")) if parts[2] else ()
            facts.append(FactLine(int(parts[0]), parts[1], operands))
        except ValueError as exc:
            raise SchemaError(f"line {n + 1}", str(exc)) from None
    return header, facts


__all__ = ["FORMAT_VERSION", "FactLine", "fact_lines", "parse_fact_file", "to_fact_file"]
