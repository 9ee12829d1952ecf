"""Build an invocation tree from a structLog trace.

Frame boundaries come from depth transitions. A call's outcome is read from
the word the caller finds on top of its stack once the callee is done, and
callee frames that never produced trace entries become synthetic leaves.
Memory is replayed from stack operands (see :mod:`tracekit.memory`), so
calldata, return data and SHA3 preimages are recovered even from stack-only
traces.
"""

from __future__ import annotations

import enum
import itertools
from array import array
from dataclasses import dataclass

from . import _kernels
from .errors import MalformedTraceError
from .memory import FrameMemory, slice_padded
from .opcodes import CREATE_OPS, ENTER_OPS, EXIT_OPS, STORAGE_OPS, canonical
from .primitives import ZERO_ADDRESS, pad32, word_to_address
from .trace import RawTrace, StructLogEntry, TransactionMeta
from .tree import (
    CallKind,
    ExitReason,
    InvocationNode,
    Sha3Record,
    StorageAccessEvent,
    StorageKind,
    extract_selector,
)

PRECOMPILE_MAX = 9


class OpClass(str, enum.Enum):
    FUNCTION_ENTER = "function_enter"
    FUNCTION_EXIT = "function_exit"
    STORAGE_ACCESS = "storage_access"
    SHA3 = "sha3"
    OTHER = "other"


def classify_opcode(op: str) -> OpClass:
    name = canonical(op)
    if name in ENTER_OPS:
        return OpClass.FUNCTION_ENTER
    if name in EXIT_OPS:
        return OpClass.FUNCTION_EXIT
    if name in STORAGE_OPS:
        return OpClass.STORAGE_ACCESS
    if name == "SHA3":
        return OpClass.SHA3
    return OpClass.OTHER


@dataclass(frozen=True, slots=True)
class CallFrameArgs:
    kind: CallKind
    target: str | None
    value: int
    gas: int | None
    args_offset: int
    args_length: int
    ret_offset: int = 0
    ret_length: int = 0
    salt: int | None = None


_ARITY = {"CALL": 7, "CALLCODE": 7, "DELEGATECALL": 6, "STATICCALL": 6, "CREATE": 3, "CREATE2": 4}


def extract_call_frame_args(entry: StructLogEntry, index: int = -1) -> CallFrameArgs:
    """Decode the operands of a call-family or create instruction from its stack snapshot."""
    name = canonical(entry.op)
    arity = _ARITY.get(name)
    if arity is None:
        raise ValueError(f"{entry.op} is not a function-enter opcode")
    stack = entry.stack
    if len(stack) < arity:
        raise MalformedTraceError(index, f"{name} needs {arity} stack operands, found {len(stack)}")
    top = stack[::-1][:arity]
    kind = CallKind(name.lower())
    if name in ("CALL", "CALLCODE"):
        gas, addr, value, a_off, a_len, r_off, r_len = top
        return CallFrameArgs(kind, word_to_address(addr), value, gas, a_off, a_len, r_off, r_len)
    if name in ("DELEGATECALL", "STATICCALL"):
        gas, addr, a_off, a_len, r_off, r_len = top
        return CallFrameArgs(kind, word_to_address(addr), 0, gas, a_off, a_len, r_off, r_len)
    if name == "CREATE":
        value, off, length = top
        return CallFrameArgs(kind, None, value, None, off, length)
    value, off, length, salt = top
    return CallFrameArgs(kind, None, value, None, off, length, salt=salt)


# -- kernel op classes -------------------------------------------------------

_C_PLAIN, _C_ENTER, _C_EXIT, _C_STORAGE, _C_SHA3, _C_MEMWRITE, _C_ERROR = range(7)
_MEM_WRITERS = {"MSTORE", "MSTORE8", "CALLDATACOPY", "CODECOPY", "EXTCODECOPY", "RETURNDATACOPY", "MCOPY"}


class _ClassTable(dict):
    def __missing__(self, op: str) -> int:
        name = canonical(op)
        if name in ENTER_OPS:
            c = _C_ENTER
        elif name in EXIT_OPS:
            c = _C_EXIT
        elif name in STORAGE_OPS:
            c = _C_STORAGE
        elif name == "SHA3":
            c = _C_SHA3
        elif name in _MEM_WRITERS:
            c = _C_MEMWRITE
        else:
            c = _C_PLAIN
        self[op] = c
        return c


_CLASSES = _ClassTable()


def _op_classes(entries: tuple[StructLogEntry, ...]) -> array:
    classes = array("B", map(_CLASSES.__getitem__, [e.op for e in entries]))
    for i, e in enumerate(entries):
        if e.error is not None:
            classes[i] = _C_ERROR
    return classes


# -- frame builders ----------------------------------------------------------

_placeholders = itertools.count()


class _Frame:
    __slots__ = (
        "kind", "caller", "code_address", "storage_address", "value", "gas_at_entry",
        "calldata", "frame_calldata", "depth", "entry_index", "exit_index", "call_index",
        "children", "storage", "sha3", "memory", "returndata", "pending", "exit_data",
        "exit_reason", "placeholder", "root_creation",
    )

    def __init__(self, kind: CallKind, caller: str, code_address: str, storage_address: str,
                 value: int, gas_at_entry: int, calldata: bytes | None, frame_calldata: bytes | None,
                 depth: int, entry_index: int, call_index: int | None) -> None:
        self.kind = kind
        self.caller = caller
        self.code_address = code_address
        self.storage_address = storage_address
        self.value = value
        self.gas_at_entry = gas_at_entry
        self.calldata = calldata
        self.frame_calldata = frame_calldata
        self.depth = depth
        self.entry_index = entry_index
        self.exit_index = entry_index
        self.call_index = call_index
        self.children: list[_Frame] = []
        # storage entries are [kind, slot, value, index] lists, frozen at the end
        self.storage: list[tuple[StorageKind, int, int, int]] = []
        self.sha3: list[Sha3Record] = []
        self.memory = FrameMemory()
        self.returndata: bytes | None = b""
        self.pending: tuple[int, CallFrameArgs, bytes | None] | None = None
        self.exit_data: bytes | None = b""
        self.exit_reason = ExitReason.STOP
        self.placeholder: str | None = None
        self.root_creation = False

    def relabel(self, old: str, new: str) -> None:
        for attr in ("caller", "code_address", "storage_address"):
            if getattr(self, attr) == old:
                setattr(self, attr, new)
        for child in self.children:
            child.relabel(old, new)

    def freeze(self, failed_above: bool) -> InvocationNode:
        failed = failed_above or self.exit_reason.failed
        if self.kind in (CallKind.CREATE, CallKind.CREATE2) or self.root_creation:
            selector = None
        else:
            selector = extract_selector(self.calldata)
        return InvocationNode(
            call_kind=self.kind,
            caller=self.caller,
            code_address=self.code_address,
            storage_address=self.storage_address,
            value=self.value,
            gas_at_entry=self.gas_at_entry,
            calldata=self.calldata,
            return_data=self.exit_data,
            selector=selector,
            exit_reason=self.exit_reason,
            depth=self.depth,
            entry_index=self.entry_index,
            exit_index=self.exit_index,
            call_index=self.call_index,
            children=tuple(child.freeze(failed) for child in self.children),
            storage_events=tuple(
                StorageAccessEvent(kind, slot, value, index, failed) for kind, slot, value, index in self.storage
            ),
            sha3_events=tuple(self.sha3),
        )


def _exit_reason_of(entry: StructLogEntry, by_depth_drop: bool) -> ExitReason:
    error = entry.error
    if error is not None and "out of gas" in error.lower():
        return ExitReason.OUT_OF_GAS
    name = canonical(entry.op)
    if name in EXIT_OPS:
        return ExitReason(name.lower())
    if error is not None:
        return ExitReason.INVALID
    return ExitReason.OUT_OF_GAS if by_depth_drop else ExitReason.STOP


def _is_precompile(address: str) -> bool:
    return 1 <= int(address, 16) <= PRECOMPILE_MAX


class _TreeBuilder:
    def __init__(self, meta: TransactionMeta, trace: RawTrace) -> None:
        self.meta = meta
        self.entries = trace.entries
        self.failed = trace.failed

    def _need(self, entry: StructLogEntry, index: int, n: int) -> tuple[int, ...]:
        stack = entry.stack
        if len(stack) < n:
            raise MalformedTraceError(index, f"{entry.op} needs {n} stack operands, found {len(stack)}")
        return stack

    def _read(self, frame: _Frame, entry: StructLogEntry, offset: int, size: int) -> bytes | None:
        if entry.memory is not None:
            return slice_padded(entry.memory, offset, size)
        return frame.memory.read(offset, size)

    def _successor_top(self, index: int, depth: int) -> int | None:
        nxt = index + 1
        if nxt < len(self.entries):
            entry = self.entries[nxt]
            if entry.depth == depth and entry.stack:
                return entry.stack[-1]
        return None

    def build(self) -> InvocationNode:
        meta = self.meta
        entries = self.entries
        n = len(entries)
        root_addr = meta.target or ZERO_ADDRESS
        root_calldata = meta.input
        root = _Frame(
            CallKind.ROOT, meta.origin, root_addr, root_addr, meta.value,
            entries[0].gas if n else meta.gas_limit, root_calldata,
            b"" if meta.is_creation else root_calldata, 1, 0, None,
        )
        root.root_creation = meta.is_creation
        if n == 0:
            root.exit_index = -1
            return root.freeze(False)

        depths = array("i", [e.depth for e in entries])
        bad = _kernels.depth_scan(depths)
        if bad >= 0:
            raise MalformedTraceError(bad, f"depth {depths[bad]} breaks depth discipline")
        classes = _op_classes(entries)

        stack = [root]
        for i in _kernels.select_indices(classes, depths):
            entry = entries[i]
            d = entry.depth
            top = stack[-1]
            if d != top.depth:
                if d == top.depth + 1:
                    if top.pending is None:
                        raise MalformedTraceError(i, "depth increased without a call instruction")
                    top = self._open(top, i, entry)
                    stack.append(top)
                else:
                    while stack[-1].depth > d:
                        self._close(stack, i)
                    top = stack[-1]
            cls = classes[i]
            if cls == _C_PLAIN:
                continue
            if cls == _C_MEMWRITE:
                self._memory_write(top, entry, i)
            elif cls == _C_STORAGE:
                stk = self._need(entry, i, 1)
                if canonical(entry.op) == "SLOAD":
                    value = self._successor_top(i, d)
                    top.storage.append((StorageKind.LOAD, stk[-1], value if value is not None else 0, i))
                else:
                    self._need(entry, i, 2)
                    top.storage.append((StorageKind.STORE, stk[-1], stk[-2], i))
            elif cls == _C_SHA3:
                stk = self._need(entry, i, 2)
                output = self._successor_top(i, d)
                if output is not None:
                    top.sha3.append(Sha3Record(self._read(top, entry, stk[-1], stk[-2]), output, i))
            elif cls == _C_ENTER:
                self._enter(top, entry, i)
            elif cls == _C_EXIT:
                self._exit_data(top, entry, i)
            else:
                name = canonical(entry.op)
                if name in ("RETURN", "REVERT") and "out of gas" not in entry.error.lower():
                    self._exit_data(top, entry, i)
        while stack:
            self._close(stack, n)
        return root.freeze(False)

    # -- per-instruction handlers -------------------------------------------

    def _memory_write(self, frame: _Frame, entry: StructLogEntry, i: int) -> None:
        name = canonical(entry.op)
        mem = frame.memory
        if name == "MSTORE":
            s = self._need(entry, i, 2)
            mem.write(s[-1], pad32(s[-2]))
        elif name == "MSTORE8":
            s = self._need(entry, i, 2)
            mem.write(s[-1], bytes([s[-2] & 0xFF]))
        elif name == "CALLDATACOPY":
            s = self._need(entry, i, 3)
            mem.write(s[-1], slice_padded(frame.frame_calldata, s[-2], s[-3]), s[-3])
        elif name == "RETURNDATACOPY":
            s = self._need(entry, i, 3)
            mem.write(s[-1], slice_padded(frame.returndata, s[-2], s[-3]), s[-3])
        elif name == "CODECOPY":
            s = self._need(entry, i, 3)
            mem.write_unknown(s[-1], s[-3])
        elif name == "EXTCODECOPY":
            s = self._need(entry, i, 4)
            mem.write_unknown(s[-2], s[-4])
        elif name == "MCOPY":
            s = self._need(entry, i, 3)
            mem.write(s[-1], self._read(frame, entry, s[-2], s[-3]), s[-3])

    def _exit_data(self, frame: _Frame, entry: StructLogEntry, i: int) -> None:
        if canonical(entry.op) in ("RETURN", "REVERT"):
            s = self._need(entry, i, 2)
            frame.exit_data = self._read(frame, entry, s[-1], s[-2])

    def _enter(self, frame: _Frame, entry: StructLogEntry, i: int) -> None:
        args = extract_call_frame_args(entry, i)
        data = self._read(frame, entry, args.args_offset, args.args_length)
        frame.pending = (i, args, data)
        nxt = i + 1
        if nxt >= len(self.entries):
            self._synthetic(frame, None)
        elif self.entries[nxt].depth == entry.depth:
            self._synthetic(frame, self._successor_top(i, entry.depth))

    def _child_context(self, parent: _Frame, args: CallFrameArgs) -> tuple[str, str, str, int]:
        kind = args.kind
        if kind is CallKind.DELEGATECALL:
            return parent.caller, args.target, parent.storage_address, parent.value
        if kind is CallKind.CALLCODE:
            return parent.storage_address, args.target, parent.storage_address, args.value
        if kind in (CallKind.CREATE, CallKind.CREATE2):
            placeholder = f"<create:{next(_placeholders)}>"
            return parent.storage_address, placeholder, placeholder, args.value
        return parent.storage_address, args.target, args.target, args.value

    def _open(self, parent: _Frame, i: int, entry: StructLogEntry) -> _Frame:
        call_index, args, data = parent.pending
        caller, code, storage, value = self._child_context(parent, args)
        is_create = args.kind in (CallKind.CREATE, CallKind.CREATE2)
        child = _Frame(
            args.kind, caller, code, storage, value, entry.gas, data,
            b"" if is_create else data, parent.depth + 1, i, call_index,
        )
        if is_create:
            child.placeholder = code
        return child

    def _synthetic(self, parent: _Frame, word: int | None) -> None:
        call_index, args, data = parent.pending
        parent.pending = None
        success = word is None or word != 0
        caller, code, storage, value = self._child_context(parent, args)
        is_create = args.kind in (CallKind.CREATE, CallKind.CREATE2)
        ret: bytes | None = b""
        if is_create:
            address = word_to_address(word) if success and word else ZERO_ADDRESS
            code = storage = address
            exit_reason = ExitReason.STOP if success else ExitReason.REVERT
        elif success and _is_precompile(args.target):
            exit_reason = ExitReason.RETURN
            ret = None
            parent.memory.write_unknown(args.ret_offset, args.ret_length)
        else:
            exit_reason = ExitReason.STOP if success else ExitReason.REVERT
        leaf = _Frame(
            args.kind, caller, code, storage, value, 0 if is_create else args.gas, data,
            b"" if is_create else data, parent.depth + 1, call_index, call_index,
        )
        leaf.exit_reason = exit_reason
        leaf.exit_data = ret
        parent.returndata = ret
        parent.children.append(leaf)

    def _close(self, stack: list[_Frame], index: int) -> None:
        """Finish the top frame; ``index`` is the first entry after it (or len(trace))."""
        frame = stack.pop()
        if frame.pending is not None:
            self._synthetic(frame, 0)
        last = index - 1
        frame.exit_index = last
        by_drop = index < len(self.entries)
        frame.exit_reason = _exit_reason_of(self.entries[last], by_drop or frame.depth > 1 or self.failed)
        if frame.exit_reason not in (ExitReason.RETURN, ExitReason.REVERT):
            frame.exit_data = b""
        if not stack:
            return
        parent = stack[-1]
        word = None
        if by_drop and self.entries[index].stack:
            word = self.entries[index].stack[-1]
        call_index, args, _ = parent.pending
        parent.pending = None
        reason = frame.exit_reason
        if frame.placeholder is not None:
            if word:
                frame.relabel(frame.placeholder, word_to_address(word))
            else:
                frame.relabel(frame.placeholder, ZERO_ADDRESS)
                if reason is ExitReason.RETURN and word == 0:
                    # returned but the creation failed (code deposit)
                    frame.exit_reason = reason = ExitReason.OUT_OF_GAS
                    frame.exit_data = b""
            parent.returndata = frame.exit_data if reason is ExitReason.REVERT else b""
        elif reason in (ExitReason.RETURN, ExitReason.REVERT):
            ret = frame.exit_data
            parent.returndata = ret
            if ret is None:
                parent.memory.write_unknown(args.ret_offset, args.ret_length)
            else:
                parent.memory.write(args.ret_offset, ret[: args.ret_length])
        else:
            parent.returndata = b""
        parent.children.append(frame)


def build_invocation_tree(meta: TransactionMeta, trace: RawTrace) -> InvocationNode:
    return _TreeBuilder(meta, trace).build()


__all__ = [
    "CallFrameArgs",
    "OpClass",
    "build_invocation_tree",
    "classify_opcode",
    "extract_call_frame_args",
    "extract_selector",
]
