"""Recover structural paths for raw storage slots from the trace's SHA3 records.

Slots derive from a base slot by three rules:

* mapping value: ``keccak(key ++ pad32(parent))``
* dynamic array element: ``keccak(pad32(parent)) + index``
* struct member: ``parent + offset``

Decoding runs the rules backwards: find the SHA3 record whose output (maybe
plus a bounded additive offset) equals the slot, then recurse on the last
32 bytes of its preimage.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from ..errors import SchemaError
from ..primitives import WORD_MASK, keccak_word, pad32
from ..tree import InvocationNode, Sha3Record, StorageAccessEvent, map_tree, walk

MAX_ARRAY_SPAN = 1 << 16
SMALL_SLOT_THRESHOLD = 1 << 32
MAX_CHAIN = 64


@dataclass(frozen=True, slots=True)
class MappingKey:
    """A mapping key; ``int`` for 32-byte keys, raw ``bytes`` for other widths."""

    key: int | bytes


@dataclass(frozen=True, slots=True)
class ArrayIndex:
    index: int


@dataclass(frozen=True, slots=True)
class StructOffset:
    offset: int


Step = Union[MappingKey, ArrayIndex, StructOffset]


@dataclass(frozen=True, slots=True)
class DecodedSlotPath:
    base_slot: int
    steps: tuple[Step, ...] = ()
    variable_name: str | None = None

    def render(self) -> str:
        text = self.variable_name or f"slot[{self.base_slot}]"
        for step in self.steps:
            if isinstance(step, MappingKey):
                key = hex(step.key) if isinstance(step.key, int) else "0x" + step.key.hex()
                text += f"[{key}]"
            elif isinstance(step, ArrayIndex):
                text += f".data[{step.index}]"
            else:
                text += f"+{step.offset}"
        return text


def evaluate_path(path: DecodedSlotPath) -> int:
    """Apply the layout rules forward; the inverse of decoding."""
    slot = path.base_slot
    for step in path.steps:
        if isinstance(step, MappingKey):
            key = pad32(step.key) if isinstance(step.key, int) else step.key
            slot = keccak_word(key + pad32(slot))
        elif isinstance(step, ArrayIndex):
            slot = (keccak_word(pad32(slot)) + step.index) & WORD_MASK
        else:
            slot = (slot + step.offset) & WORD_MASK
    return slot


@dataclass(frozen=True)
class LayoutEntry:
    label: str
    slot: int
    type: str
    offset: int = 0


@dataclass(frozen=True)
class StorageLayout:
    entries: tuple[LayoutEntry, ...] = ()
    _by_slot: dict[int, str] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        grouped: dict[int, list[str]] = {}
        for e in self.entries:
            grouped.setdefault(e.slot, []).append(e.label)
        # packed variables share a slot; keep all labels
        self._by_slot.update({slot: "|".join(labels) for slot, labels in grouped.items()})

    def name_for(self, slot: int) -> str | None:
        return self._by_slot.get(slot)

    @classmethod
    def from_json(cls, obj: object) -> StorageLayout:
        items = obj.get("storage") if isinstance(obj, Mapping) else obj
        if not isinstance(items, list):
            raise SchemaError("storage", "expected an array of layout entries")
        entries = []
        for i, item in enumerate(items):
            try:
                label = str(item["label"])
                slot = int(str(item["slot"]), 0)
                type_ = str(item.get("type", ""))
                offset = int(item.get("offset", 0))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"storage[{i}]", f"bad layout entry ({exc})") from None
            entries.append(LayoutEntry(label, slot, type_, offset))
        return cls(tuple(entries))


def load_storage_layout(path: str | Path) -> StorageLayout:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"malformed JSON ({exc.msg})") from None
    return StorageLayout.from_json(obj)


class SlotDecoder:
    """Index over one transaction's SHA3 records answering slot queries.

    Records without a recoverable preimage are ignored. Lookups only see
    records strictly before the querying instruction.
    """

    def __init__(
        self,
        records: Iterable[Sha3Record],
        *,
        max_array_span: int = MAX_ARRAY_SPAN,
        small_slot_threshold: int = SMALL_SLOT_THRESHOLD,
    ) -> None:
        self.max_array_span = max_array_span
        self.small_slot_threshold = small_slot_threshold
        by_output: dict[int, list[Sha3Record]] = {}
        for rec in records:
            if rec.input is None or len(rec.input) < 32:
                continue
            by_output.setdefault(rec.output, []).append(rec)
        for recs in by_output.values():
            recs.sort(key=lambda r: r.instruction_index)
        self._by_output = by_output
        self._indices = {out: [r.instruction_index for r in recs] for out, recs in by_output.items()}
        self._outputs = sorted(by_output)

    def _latest(self, output: int, before: int) -> Sha3Record | None:
        recs = self._by_output.get(output)
        if not recs:
            return None
        pos = bisect.bisect_left(self._indices[output], before)
        return recs[pos - 1] if pos else None

    def match(self, slot: int, before: int) -> tuple[Sha3Record, int] | None:
        """Exact match first, then the nearest output within the additive span."""
        rec = self._latest(slot, before)
        if rec is not None:
            return rec, 0
        outputs = self._outputs
        pos = bisect.bisect_left(outputs, slot) - 1
        while pos >= 0:
            delta = slot - outputs[pos]
            if delta > self.max_array_span:
                break
            rec = self._latest(outputs[pos], before)
            if rec is not None:
                return rec, delta
            pos -= 1
        return None

    def decode(self, slot: int, before: int, layout: StorageLayout | None = None) -> DecodedSlotPath | None:
        steps: list[Step] = []
        current = slot
        for depth in range(MAX_CHAIN):
            if current < self.small_slot_threshold:
                break
            found = self.match(current, before)
            if found is None:
                if depth == 0:
                    return None
                # an unmatched keccak-range parent is itself the base
                break
            rec, delta = found
            preimage = rec.input
            parent = int.from_bytes(preimage[-32:], "big")
            if len(preimage) == 32:
                steps.append(ArrayIndex(delta))
            else:
                key_bytes = preimage[:-32]
                key = int.from_bytes(key_bytes, "big") if len(key_bytes) == 32 else bytes(key_bytes)
                if delta:
                    steps.append(StructOffset(delta))
                steps.append(MappingKey(key))
            current = parent
            before = rec.instruction_index
        else:
            return None
        steps.reverse()
        name = layout.name_for(current) if layout is not None else None
        return DecodedSlotPath(current, tuple(steps), name)


def decode_storage_access(
    event: StorageAccessEvent,
    sha3_records: Sequence[Sha3Record],
    layout: StorageLayout | None = None,
    *,
    max_array_span: int = MAX_ARRAY_SPAN,
    small_slot_threshold: int = SMALL_SLOT_THRESHOLD,
) -> DecodedSlotPath | None:
    decoder = SlotDecoder(sha3_records, max_array_span=max_array_span, small_slot_threshold=small_slot_threshold)
    return decoder.decode(event.raw_slot, event.instruction_index, layout)


def decode_tree_storage(
    root: InvocationNode,
    layouts: Mapping[str, StorageLayout] | None = None,
    **kwargs: int,
) -> InvocationNode:
    """Return a copy of the tree with ``decoded`` filled on every storage event."""
    records = [rec for node in walk(root) for rec in node.sha3_events]
    decoder = SlotDecoder(records, **kwargs)
    layouts = layouts or {}

    def fill(node: InvocationNode) -> InvocationNode:
        if not node.storage_events:
            return node
        layout = layouts.get(node.storage_address)
        events = tuple(
            replace(ev, decoded=decoder.decode(ev.raw_slot, ev.instruction_index, layout)) for ev in node.storage_events
        )
        return replace(node, storage_events=events)

    return map_tree(root, fill)


__all__ = [
    "ArrayIndex",
    "DecodedSlotPath",
    "LayoutEntry",
    "MappingKey",
    "SlotDecoder",
    "StorageLayout",
    "StructOffset",
    "decode_storage_access",
    "decode_tree_storage",
    "evaluate_path",
    "load_storage_layout",
]
