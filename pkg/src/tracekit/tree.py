"""Invocation tree data model and its text rendering."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Callable, Iterator

if TYPE_CHECKING:
    from .decoder.storage import DecodedSlotPath


class CallKind(str, enum.Enum):
    ROOT = "root"
    CALL = "call"
    CALLCODE = "callcode"
    STATICCALL = "staticcall"
    DELEGATECALL = "delegatecall"
    CREATE = "create"
    CREATE2 = "create2"


class ExitReason(str, enum.Enum):
    STOP = "stop"
    RETURN = "return"
    REVERT = "revert"
    SELFDESTRUCT = "selfdestruct"
    INVALID = "invalid"
    OUT_OF_GAS = "out_of_gas"

    @property
    def failed(self) -> bool:
        return self in (ExitReason.REVERT, ExitReason.INVALID, ExitReason.OUT_OF_GAS)


class StorageKind(str, enum.Enum):
    LOAD = "load"
    STORE = "store"


@dataclass(frozen=True, slots=True)
class StorageAccessEvent:
    kind: StorageKind
    raw_slot: int
    value: int
    instruction_index: int
    rolled_back: bool = False
    decoded: DecodedSlotPath | None = None


@dataclass(frozen=True, slots=True)
class Sha3Record:
    """Preimage and digest of one SHA3 instruction; ``input`` is None if memory was unrecoverable."""

    input: bytes | None
    output: int
    instruction_index: int


@dataclass(frozen=True, slots=True)
class InvocationNode:
    """One message-call frame.

    ``calldata``/``return_data`` are None when the bytes could not be
    recovered from the trace. ``call_index`` is the parent's enter
    instruction (None for the root). Frames that never executed code
    (code-less or precompile callees, calls that failed up front) are leaves
    whose ``entry_index == exit_index == call_index``.
    """

    call_kind: CallKind
    caller: str
    code_address: str
    storage_address: str
    value: int
    gas_at_entry: int
    calldata: bytes | None
    return_data: bytes | None
    selector: bytes | None
    exit_reason: ExitReason
    depth: int
    entry_index: int
    exit_index: int
    call_index: int | None = None
    children: tuple[InvocationNode, ...] = ()
    storage_events: tuple[StorageAccessEvent, ...] = ()
    sha3_events: tuple[Sha3Record, ...] = ()

    @property
    def executed(self) -> bool:
        return self.call_index is None or self.entry_index != self.call_index

    def contains_index(self, index: int) -> bool:
        return self.entry_index <= index <= self.exit_index


def extract_selector(calldata: bytes | None) -> bytes | None:
    if calldata is None or len(calldata) < 4:
        return None
    return bytes(calldata[:4])


def walk(node: InvocationNode) -> Iterator[InvocationNode]:
    """Pre-order traversal; the position in this walk is the node's frame id."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(cur.children))


def walk_with_parents(
    node: InvocationNode,
) -> Iterator[tuple[int, InvocationNode, InvocationNode | None, tuple[InvocationNode, ...]]]:
    """Yield ``(frame_id, node, parent, ancestors)`` in pre-order."""
    counter = 0
    stack: list[tuple[InvocationNode, tuple[InvocationNode, ...]]] = [(node, ())]
    while stack:
        cur, ancestors = stack.pop()
        yield counter, cur, (ancestors[-1] if ancestors else None), ancestors
        counter += 1
        path = ancestors + (cur,)
        stack.extend((child, path) for child in reversed(cur.children))


def frame_by_id(root: InvocationNode, frame_id: int) -> InvocationNode:
    for i, node in enumerate(walk(root)):
        if i == frame_id:
            return node
    raise KeyError(frame_id)


def all_storage_events(root: InvocationNode) -> list[StorageAccessEvent]:
    events = [ev for node in walk(root) for ev in node.storage_events]
    events.sort(key=lambda ev: ev.instruction_index)
    return events


def all_sha3_records(root: InvocationNode) -> list[Sha3Record]:
    records = [rec for node in walk(root) for rec in node.sha3_events]
    records.sort(key=lambda rec: rec.instruction_index)
    return records


def map_tree(root: InvocationNode, fn: Callable[[InvocationNode], InvocationNode]) -> InvocationNode:
    """Rebuild bottom-up, applying ``fn`` to each node after its children."""
    children = tuple(map_tree(child, fn) for child in root.children)
    if children != root.children:
        root = replace(root, children=children)
    return fn(root)


def render_tree(
    root: InvocationNode,
    label: Callable[[InvocationNode], str | None] | None = None,
    storage: Callable[[InvocationNode, StorageAccessEvent], str | None] | None = None,
) -> str:
    """One line per node: ``{kind} {code_address} {selector|-} calldata={N}B ret={M}B exit={reason}``.

    ``label`` may replace the selector column (e.g. with a decoded function
    signature); ``storage`` may add an indented line per storage event.
    """
    lines: list[str] = []

    def size(data: bytes | None) -> str:
        return "?" if data is None else str(len(data))

    def visit(node: InvocationNode, level: int) -> None:
        indent = "  " * level
        name = label(node) if label is not None else None
        if name is None:
            name = node.selector.hex() if node.selector is not None else "-"
        lines.append(
            f"{indent}{node.call_kind.value} {node.code_address} {name} "
            f"calldata={size(node.calldata)}B ret={size(node.return_data)}B exit={node.exit_reason.value}"
        )
        if storage is not None:
            for ev in node.storage_events:
                text = storage(node, ev)
                if text:
                    lines.append(f"{indent}  | {text}")
        for child in node.children:
            visit(child, level + 1)

    visit(root, 0)
    return "\n".join(lines)


__all__ = [
    "CallKind",
    "ExitReason",
    "InvocationNode",
    "Sha3Record",
    "StorageAccessEvent",
    "StorageKind",
    "all_sha3_records",
    "all_storage_events",
    "extract_selector",
    "frame_by_id",
    "map_tree",
    "render_tree",
    "walk",
    "walk_with_parents",
]
