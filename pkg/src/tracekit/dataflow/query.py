"""Filtering and export of flow facts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from ..errors import UsageError
from ..primitives import min_hex
from ..tree import InvocationNode, frame_by_id
from .engine import FlowFact


@dataclass(frozen=True)
class SinkPattern:
    """Matches facts by sink opcode, operand role and an instruction range.

    ``None`` fields match anything. ``index_range`` is inclusive, typically a
    frame's ``(entry_index, exit_index)``.
    """

    opcode: str | None = None
    role: str | None = None
    index_range: tuple[int, int] | None = None
    frame: int | None = None

    def resolve(self, tree: InvocationNode | None) -> SinkPattern:
        """Turn a frame id into an index range using ``tree``."""
        if self.frame is None or self.index_range is not None:
            return self
        if tree is None:
            raise UsageError("a frame filter needs the invocation tree")
        try:
            node = frame_by_id(tree, self.frame)
        except KeyError:
            raise UsageError(f"no frame {self.frame} in this transaction") from None
        return SinkPattern(self.opcode, self.role, (node.entry_index, node.exit_index), self.frame)

    def matches(self, fact: FlowFact) -> bool:
        sink = fact.sink
        if self.opcode is not None and sink.opcode != self.opcode:
            return False
        if self.role is not None and sink.role != self.role:
            return False
        if self.index_range is not None:
            lo, hi = self.index_range
            if not lo <= sink.instruction_index <= hi:
                return False
        return True


def parse_sink_filter(text: str | None) -> SinkPattern:
    """``OPCODE[:ROLE][@FRAME]``; ``*`` or an empty part matches anything."""
    if not text:
        return SinkPattern()
    frame = None
    if "@" in text:
        text, _, frame_text = text.partition("@")
        try:
            frame = int(frame_text, 0)
        except ValueError:
            raise UsageError(f"bad frame in sink filter: {frame_text!r}") from None
    opcode, _, role = text.partition(":")
    if ":" in role:
        raise UsageError(f"bad sink filter {text!r}")
    opcode = opcode.strip().upper()
    role = role.strip().lower()
    return SinkPattern(None if opcode in ("", "*") else opcode, None if role in ("", "*") else role, None, frame)


def query_flows(facts: Sequence[FlowFact], sink_filter: SinkPattern,
                tree: InvocationNode | None = None) -> list[FlowFact]:
    pattern = sink_filter.resolve(tree)
    return [f for f in facts if pattern.matches(f)]


def fact_to_json(fact: FlowFact) -> dict:
    return {
        "source": fact.source.label(),
        "sink_opcode": fact.sink.opcode,
        "operand_role": fact.sink.role,
        "instruction_index": fact.sink.instruction_index,
        "value_hex": min_hex(fact.value_at_sink),
    }


def write_jsonl(facts: Iterable[FlowFact], out: IO[str]) -> int:
    count = 0
    for fact in facts:
        out.write(json.dumps(fact_to_json(fact), sort_keys=True) + "\n")
        count += 1
    return count


__all__ = ["SinkPattern", "fact_to_json", "parse_sink_filter", "query_flows", "write_jsonl"]
