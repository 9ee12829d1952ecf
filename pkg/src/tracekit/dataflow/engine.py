"""Shadow execution: propagate taint tags alongside a recorded trace.

The engine never re-executes concrete semantics. Concrete operand values
come from each entry's stack snapshot, frame boundaries and call outcomes
come from the invocation tree, and only the tags are computed here. Taint
is explicit-flow only: addresses and offsets used to read memory, calldata
or storage do not taint the value read, and branch conditions do not taint
later values.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .. import _kernels
from ..errors import MalformedTraceError, ShadowDivergenceError
from ..memory import MAX_TRACKED
from ..opcodes import OPCODES, canonical
from ..trace import RawTrace, TransactionMeta
from ..tree import CallKind, ExitReason, InvocationNode, walk_with_parents
from .sources import (
    UNKNOWN,
    CalldataRange,
    CallReturn,
    EnvOpcode,
    StorageSlot,
    TagLattice,
    TaintSource,
)


@dataclass(frozen=True, slots=True)
class Sink:
    opcode: str
    role: str
    instruction_index: int


@dataclass(frozen=True, slots=True)
class FlowFact:
    source: TaintSource
    sink: Sink
    value_at_sink: int
    frame: int = 0


class ShadowBuffer:
    """Per-byte tags of a read-only byte string; bytes past the end read as ``fill``."""

    __slots__ = ("tags", "fill")

    def __init__(self, tags: array | None = None, fill: int = 0) -> None:
        self.tags = tags
        self.fill = fill

    def read(self, lattice: TagLattice, off: int, n: int) -> int:
        if n <= 0:
            return 0
        tags = self.tags
        out = 0
        size = len(tags) if tags is not None else 0
        if off < size:
            out = lattice.union_all(_kernels.tags_distinct(tags, off, min(n, size - off)))
        if self.fill and off + n > size:
            out = lattice.union(out, self.fill)
        return out

    def slice(self, off: int, n: int) -> array | None:
        """Tags of ``n`` bytes from ``off``; None when they are all empty."""
        if n <= 0 or (self.tags is None and not self.fill):
            return None
        out = array("I", bytes(4 * n))
        if self.tags is not None:
            _kernels.tags_copy(out, 0, self.tags, off, n)
        if self.fill:
            start = max(0, (len(self.tags) if self.tags is not None else 0) - off)
            if start < n:
                _kernels.tags_fill(out, start, n - start, self.fill)
        return out

    def is_clean(self) -> bool:
        return not self.fill and (self.tags is None or not any(self.tags))


class FrameShadow:
    __slots__ = (
        "frame_id", "node", "stack", "memory", "mem_tainted", "calldata",
        "returndata", "pending", "output", "journal",
    )

    def __init__(self, frame_id: int, node: InvocationNode, calldata: ShadowBuffer) -> None:
        self.frame_id = frame_id
        self.node = node
        self.stack: list[int] = []
        self.memory = array("I")
        self.mem_tainted = False
        self.calldata = calldata
        self.returndata = ShadowBuffer()
        self.pending: tuple[int, int, InvocationNode] | None = None
        self.output: array | None = None
        # (map, key, previous tag or None) for undoing shadow storage writes
        self.journal: list[tuple[dict, tuple[str, int], int | None]] = []

    # memory helpers; untouched memory is all-empty so writes of 0 can be skipped
    def _grow(self, end: int) -> bool:
        if end > MAX_TRACKED:
            return False
        mem = self.memory
        if end > len(mem):
            mem.extend(array("I", bytes(4 * (end - len(mem)))))
        return True

    def mem_fill(self, off: int, n: int, tag: int) -> None:
        if n <= 0 or (not tag and not self.mem_tainted):
            return
        if self._grow(off + n):
            _kernels.tags_fill(self.memory, off, n, tag)
            if tag:
                self.mem_tainted = True

    def mem_copy(self, off: int, tags: array | None, n: int) -> None:
        if tags is None:
            self.mem_fill(off, n, 0)
            return
        if n <= 0:
            return
        if self._grow(off + n):
            _kernels.tags_copy(self.memory, off, tags, 0, n)
            self.mem_tainted = True

    def mem_read(self, lattice: TagLattice, off: int, n: int) -> int:
        if n <= 0 or not self.mem_tainted:
            return 0
        size = len(self.memory)
        if off >= size:
            return 0
        return lattice.union_all(_kernels.tags_distinct(self.memory, off, min(n, size - off)))

    def mem_slice(self, off: int, n: int) -> array | None:
        if n <= 0 or not self.mem_tainted or off >= len(self.memory):
            return None
        out = array("I", bytes(4 * n))
        _kernels.tags_copy(out, 0, self.memory, off, n)
        return out if any(out) else None

    def memory_tags(self, lattice: TagLattice, off: int, n: int) -> list[TaintSource]:
        return lattice.members(self.mem_read(lattice, off, n))


@dataclass
class ShadowState:
    lattice: TagLattice
    storage: dict[tuple[str, int], int] = field(default_factory=dict)
    transient: dict[tuple[str, int], int] = field(default_factory=dict)
    frames: dict[int, FrameShadow] = field(default_factory=dict)

    def storage_tags(self, address: str, slot: int) -> list[TaintSource]:
        return self.lattice.members(self.storage.get((address, slot), 0))

    def stack_tags(self, frame_id: int) -> list[list[TaintSource]]:
        return [self.lattice.members(t) for t in self.frames[frame_id].stack]

    def tag_ids(self) -> Iterator[int]:
        """Every tag id held anywhere in the final state."""
        yield from self.storage.values()
        yield from self.transient.values()
        for fr in self.frames.values():
            yield from fr.stack
            yield from _kernels.tags_distinct(fr.memory, 0, len(fr.memory))
            for buf in (fr.calldata, fr.returndata):
                if buf.tags is not None:
                    yield from _kernels.tags_distinct(buf.tags, 0, len(buf.tags))
                yield buf.fill
            if fr.output is not None:
                yield from _kernels.tags_distinct(fr.output, 0, len(fr.output))


# op categories for dispatch
(_GENERIC, _PUSH, _ENV, _DUP, _SWAP, _MLOAD, _MSTORE, _MSTORE8, _MCOPY, _CDLOAD, _CDCOPY,
 _CODECOPY, _EXTCODECOPY, _RDCOPY, _SHA3, _SLOAD, _SSTORE, _TLOAD, _TSTORE, _JUMPI, _CALL,
 _CREATE, _RETURN, _REVERT) = range(24)

_SPECIAL = {
    "MLOAD": _MLOAD, "MSTORE": _MSTORE, "MSTORE8": _MSTORE8, "MCOPY": _MCOPY,
    "CALLDATALOAD": _CDLOAD, "CALLDATACOPY": _CDCOPY, "CODECOPY": _CODECOPY,
    "EXTCODECOPY": _EXTCODECOPY, "RETURNDATACOPY": _RDCOPY, "SHA3": _SHA3,
    "SLOAD": _SLOAD, "SSTORE": _SSTORE, "TLOAD": _TLOAD, "TSTORE": _TSTORE, "JUMPI": _JUMPI,
    "CALL": _CALL, "CALLCODE": _CALL, "STATICCALL": _CALL, "DELEGATECALL": _CALL,
    "CREATE": _CREATE, "CREATE2": _CREATE, "RETURN": _RETURN, "REVERT": _REVERT,
    "CALLER": _ENV, "ORIGIN": _ENV, "TIMESTAMP": _ENV, "NUMBER": _ENV, "CALLVALUE": _ENV,
}


class _OpTable(dict):
    def __missing__(self, op: str) -> tuple[int, int, int, str]:
        name = canonical(op)
        info = OPCODES.get(name)
        if info is None:
            raise KeyError(op)
        if name in _SPECIAL:
            cat = _SPECIAL[name]
        elif name.startswith("DUP"):
            cat = _DUP
        elif name.startswith("SWAP"):
            cat = _SWAP
        elif info.pops == 0 and info.pushes == 1:
            cat = _PUSH
        else:
            cat = _GENERIC
        value = (cat, info.pops, info.pushes, name)
        self[op] = value
        return value


_OPS = _OpTable()


class _Engine:
    def __init__(self, meta: TransactionMeta, trace: RawTrace, tree: InvocationNode,
                 sources: Iterable[TaintSource], check_stack: bool) -> None:
        self.meta = meta
        self.entries = trace.entries
        self.tree = tree
        self.check_stack = check_stack
        sources = set(sources)
        self.lattice = lat = TagLattice(sources)
        self.env_tags = {s.op: lat.singleton(s) for s in sources if isinstance(s, EnvOpcode)}
        self.storage_src = {(s.address, s.slot): lat.singleton(s) for s in sources if isinstance(s, StorageSlot)}
        self.return_src = {s.frame: lat.singleton(s) for s in sources if isinstance(s, CallReturn)}
        self.calldata_src: dict[int, list[tuple[int, int, int]]] = {}
        for s in sources:
            if isinstance(s, CalldataRange):
                self.calldata_src.setdefault(s.frame, []).append((s.offset, s.length, lat.singleton(s)))
        self.unknown = lat.singleton(UNKNOWN)
        self.frame_ids: dict[int, int] = {}
        self.by_call: dict[int, InvocationNode] = {}
        for fid, node, _parent, _anc in walk_with_parents(tree):
            self.frame_ids[id(node)] = fid
            if node.call_index is not None:
                self.by_call[node.call_index] = node
        self.state = ShadowState(lat)
        self.facts: list[FlowFact] = []

    # -- helpers -------------------------------------------------------------

    def _calldata_buffer(self, frame_id: int, length: int, args: array | None) -> ShadowBuffer:
        ranges = self.calldata_src.get(frame_id)
        if not ranges:
            return ShadowBuffer(args)
        tags = args if args is not None else array("I", bytes(4 * length))
        if len(tags) < length:
            tags.extend(array("I", bytes(4 * (length - len(tags)))))
        union = self.lattice.union
        for off, n, tag in ranges:
            # a source range is clipped to the calldata actually present
            for i in range(off, min(off + n, length)):
                tags[i] = union(tags[i], tag)
        return ShadowBuffer(tags)

    def _emit(self, opcode: str, role: str, index: int, tag: int, value: int, frame: int) -> None:
        if not tag:
            return
        sink = Sink(opcode, role, index)
        for src in self.lattice.members(tag):
            self.facts.append(FlowFact(src, sink, value, frame))

    def _store(self, table: dict, fr: FrameShadow, key: tuple[str, int], tag: int) -> None:
        old = table.get(key)
        if old == tag or (old is None and not tag):
            return
        fr.journal.append((table, key, old))
        if tag or old is not None:
            table[key] = tag

    # -- main loop -----------------------------------------------------------

    def run(self) -> tuple[ShadowState, list[FlowFact]]:
        entries = self.entries
        if not entries:
            return self.state, self.facts
        root = self.tree
        # init code of a creation runs with empty calldata
        root_len = 0 if self.meta.is_creation else len(self.meta.input)
        frames = [FrameShadow(0, root, self._calldata_buffer(0, root_len, None))]
        self.state.frames[0] = frames[0]
        lat = self.lattice
        union = lat.union
        ops = _OPS
        check = self.check_stack
        for i, entry in enumerate(entries):
            fr = frames[-1]
            stack = fr.stack
            concrete = entry.stack
            if check and len(stack) != len(concrete):
                raise ShadowDivergenceError(i, len(stack), len(concrete))
            if entry.error is None:
                try:
                    cat, pops, pushes, name = ops[entry.op]
                except KeyError:
                    raise MalformedTraceError(i, f"unknown opcode {entry.op!r}") from None
                if len(stack) < pops:
                    raise MalformedTraceError(i, f"{name} needs {pops} stack operands, found {len(stack)}")
                if cat == _PUSH:
                    stack.append(0)
                elif cat == _GENERIC:
                    tag = 0
                    for _ in range(pops):
                        t = stack.pop()
                        if t:
                            tag = union(tag, t)
                    if pushes:
                        stack.append(tag)
                elif cat == _DUP:
                    stack.append(stack[-pops])
                elif cat == _SWAP:
                    stack[-1], stack[-pops] = stack[-pops], stack[-1]
                else:
                    child = self._special(cat, name, pops, fr, i, concrete)
                    if child is not None:
                        frames.append(child)
                        self.state.frames[child.frame_id] = child
            while frames and frames[-1].node.exit_index <= i:
                done = frames.pop()
                self._finish(done, frames[-1] if frames else None)
        while frames:
            done = frames.pop()
            self._finish(done, frames[-1] if frames else None)
        return self.state, self.facts

    def _special(self, cat: int, name: str, pops: int, fr: FrameShadow, i: int,
                 concrete: tuple[int, ...]) -> FrameShadow | None:
        lat = self.lattice
        stack = fr.stack
        if cat == _ENV:
            stack.append(self.env_tags.get(name, 0))
        elif cat == _MLOAD:
            stack.pop()
            stack.append(fr.mem_read(lat, concrete[-1], 32))
        elif cat == _MSTORE:
            stack.pop()
            fr.mem_fill(concrete[-1], 32, stack.pop())
        elif cat == _MSTORE8:
            stack.pop()
            fr.mem_fill(concrete[-1], 1, stack.pop())
        elif cat == _MCOPY:
            del stack[-3:]
            n = concrete[-3]
            fr.mem_copy(concrete[-1], fr.mem_slice(concrete[-2], n), n)
        elif cat == _CDLOAD:
            stack.pop()
            stack.append(fr.calldata.read(lat, concrete[-1], 32))
        elif cat == _CDCOPY:
            del stack[-3:]
            n = concrete[-3]
            fr.mem_copy(concrete[-1], fr.calldata.slice(concrete[-2], n), n)
        elif cat == _RDCOPY:
            del stack[-3:]
            n = concrete[-3]
            fr.mem_copy(concrete[-1], fr.returndata.slice(concrete[-2], n), n)
        elif cat == _CODECOPY:
            del stack[-3:]
            fr.mem_fill(concrete[-1], concrete[-3], 0)
        elif cat == _EXTCODECOPY:
            del stack[-4:]
            fr.mem_fill(concrete[-2], concrete[-4], 0)
        elif cat == _SHA3:
            del stack[-2:]
            stack.append(fr.mem_read(lat, concrete[-1], concrete[-2]))
        elif cat == _SLOAD or cat == _TLOAD:
            stack.pop()
            key = (fr.node.storage_address, concrete[-1])
            table = self.state.storage if cat == _SLOAD else self.state.transient
            tag = table.get(key, 0)
            if cat == _SLOAD:
                src = self.storage_src.get(key)
                if src:
                    tag = lat.union(tag, src)
            stack.append(tag)
        elif cat == _SSTORE or cat == _TSTORE:
            slot_tag = stack.pop()
            value_tag = stack.pop()
            key = (fr.node.storage_address, concrete[-1])
            if cat == _SSTORE:
                self._emit("SSTORE", "slot", i, slot_tag, concrete[-1], fr.frame_id)
                self._emit("SSTORE", "value", i, value_tag, concrete[-2], fr.frame_id)
                self._store(self.state.storage, fr, key, value_tag)
            else:
                self._store(self.state.transient, fr, key, value_tag)
        elif cat == _JUMPI:
            stack.pop()
            cond = stack.pop()
            self._emit("JUMPI", "condition", i, cond, concrete[-2], fr.frame_id)
        elif cat == _RETURN or cat == _REVERT:
            del stack[-2:]
            off, n = concrete[-1], concrete[-2]
            fr.output = fr.mem_slice(off, n)
            if cat == _RETURN:
                tag = fr.mem_read(lat, off, n)
                data = fr.node.return_data
                first = int.from_bytes(data[:32].ljust(32, b"\0"), "big") if data else 0
                self._emit("RETURN", "data", i, tag, first, fr.frame_id)
        elif cat == _CALL:
            return self._call(name, fr, i, concrete)
        elif cat == _CREATE:
            return self._create(name, pops, fr, i, concrete)
        return None

    def _call(self, name: str, fr: FrameShadow, i: int, concrete: tuple[int, ...]) -> FrameShadow | None:
        stack = fr.stack
        has_value = name in ("CALL", "CALLCODE")
        n = 7 if has_value else 6
        ops = stack[-n:][::-1]
        del stack[-n:]
        words = concrete[-n:][::-1]
        if has_value:
            _gas, addr_t, value_t = ops[0], ops[1], ops[2]
            a_off, a_len, r_off, r_len = words[3:7]
        else:
            _gas, addr_t, value_t = ops[0], ops[1], 0
            a_off, a_len, r_off, r_len = words[2:6]
        self._emit(name, "target_address", i, addr_t, words[1], fr.frame_id)
        if has_value:
            self._emit(name, "value", i, value_t, words[2], fr.frame_id)
        args = fr.mem_slice(a_off, a_len)
        child = self.by_call.get(i)
        if child is None:
            raise MalformedTraceError(i, f"{name} has no matching frame in the invocation tree")
        if child.executed:
            fr.pending = (r_off, r_len, child)
            fid = self.frame_ids[id(child)]
            return FrameShadow(fid, child, self._calldata_buffer(fid, a_len, args))
        # synthetic leaf: nothing ran, or a precompile whose output we cannot model
        fid = self.frame_ids[id(child)]
        out_tag = 0
        if child.return_data is None:
            arg_tag = fr.mem_read(self.lattice, a_off, a_len)
            if arg_tag:
                out_tag = self.lattice.union(arg_tag, self.unknown)
            src = self.return_src.get(fid)
            if src:
                out_tag = self.lattice.union(out_tag, src)
            fr.mem_fill(r_off, r_len, out_tag)
        fr.returndata = ShadowBuffer(None, out_tag)
        stack.append(0)
        return None

    def _create(self, name: str, pops: int, fr: FrameShadow, i: int, concrete: tuple[int, ...]) -> FrameShadow | None:
        stack = fr.stack
        ops = stack[-pops:][::-1]
        del stack[-pops:]
        self._emit(name, "value", i, ops[0], concrete[-1], fr.frame_id)
        child = self.by_call.get(i)
        if child is None:
            raise MalformedTraceError(i, f"{name} has no matching frame in the invocation tree")
        fid = self.frame_ids[id(child)]
        if child.executed:
            fr.pending = (0, 0, child)
            return FrameShadow(fid, child, ShadowBuffer())
        fr.returndata = ShadowBuffer()
        stack.append(0)
        return None

    def _finish(self, done: FrameShadow, parent: FrameShadow | None) -> None:
        node = done.node
        failed = node.exit_reason.failed
        if failed:
            for table, key, old in reversed(done.journal):
                if old is None:
                    table.pop(key, None)
                else:
                    table[key] = old
        elif parent is not None:
            parent.journal.extend(done.journal)
        done.journal = []
        if parent is None:
            return
        r_off, r_len, child = parent.pending
        parent.pending = None
        out = done.output if node.exit_reason in (ExitReason.RETURN, ExitReason.REVERT) else None
        src = self.return_src.get(done.frame_id)
        if src and node.exit_reason in (ExitReason.RETURN, ExitReason.REVERT) and node.return_data:
            size = len(node.return_data)
            tagged = array("I", bytes(4 * size))
            if out is not None:
                _kernels.tags_copy(tagged, 0, out, 0, size)
            union = self.lattice.union
            for k in range(size):
                tagged[k] = union(tagged[k], src)
            out = tagged
        if node.call_kind in (CallKind.CREATE, CallKind.CREATE2):
            parent.returndata = ShadowBuffer(out if node.exit_reason is ExitReason.REVERT else None)
        else:
            parent.returndata = ShadowBuffer(out)
            if node.exit_reason in (ExitReason.RETURN, ExitReason.REVERT):
                size = len(node.return_data) if node.return_data is not None else (len(out) if out is not None else 0)
                n = min(r_len, size)
                piece = None
                if out is not None and n:
                    piece = array("I", bytes(4 * n))
                    _kernels.tags_copy(piece, 0, out, 0, n)
                parent.mem_copy(r_off, piece, n)
        parent.stack.append(0)


def shadow_execute(
    meta: TransactionMeta,
    trace: RawTrace,
    tree: InvocationNode,
    sources: Iterable[TaintSource],
    *,
    check_stack: bool = True,
) -> tuple[ShadowState, list[FlowFact]]:
    """Propagate ``sources`` through the trace; returns the final state and facts in trace order."""
    return _Engine(meta, trace, tree, sources, check_stack).run()


__all__ = ["FlowFact", "FrameShadow", "ShadowBuffer", "ShadowState", "Sink", "shadow_execute"]
