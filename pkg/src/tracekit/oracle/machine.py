"""A small EVM interpreter that emits structLogs together with the true call tree.

Only a fixed opcode subset is executed; anything else raises
``UnsupportedInstructionError``. Gas is a toy model (flat cost 1, SSTORE 100,
SHA3 30 + 6 per word, call family and creates 100 plus forwarded gas, with
the caller keeping 1/64 of what remains) that keeps numbers hand-checkable
while staying monotone within a frame.

The ground-truth tree follows the same observability conventions a trace
reader has to use:

* frames that never ran code are leaves with ``entry_index == exit_index ==
  call_index``; their ``gas_at_entry`` is the requested gas operand (0 for
  creates);
* the address of a creation that failed is not observable, so it appears as
  the zero address throughout that frame's subtree.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Any

from ..errors import UnsupportedInstructionError
from ..opcodes import BY_CODE
from ..primitives import (
    WORD_MASK,
    ZERO_ADDRESS,
    address_to_int,
    keccak256,
    normalize_address,
    pad32,
    word_to_address,
)
from ..trace import RawTrace, TransactionMeta, TxStatus, entries_from_json
from ..tree import (
    CallKind,
    ExitReason,
    InvocationNode,
    Sha3Record,
    StorageAccessEvent,
    StorageKind,
    extract_selector,
)

SUPPORTED = frozenset(
    [f"PUSH{n}" for n in range(1, 33)]
    + [f"DUP{n}" for n in range(1, 17)]
    + [f"SWAP{n}" for n in range(1, 17)]
    + """POP ADD SUB MUL DIV LT GT EQ ISZERO AND OR XOR NOT SHA3 MLOAD MSTORE
    CALLDATALOAD CALLDATASIZE CALLDATACOPY SLOAD SSTORE ADDRESS CALLER ORIGIN CALLVALUE
    TIMESTAMP NUMBER GAS JUMP JUMPI JUMPDEST PC RETURNDATASIZE RETURNDATACOPY
    LOG0 LOG1 LOG2 CALL CALLCODE STATICCALL DELEGATECALL CREATE CREATE2 STOP
    RETURN REVERT SELFDESTRUCT INVALID""".split()
)

CALL_BASE_COST = 100
SSTORE_COST = 100
MAX_DEPTH = 1024


@dataclass
class Account:
    code: bytes = b""
    storage: dict[int, int] = field(default_factory=dict)
    balance: int = 0
    nonce: int = 0


@dataclass
class MockWorld:
    accounts: dict[str, Account] = field(default_factory=dict)
    timestamp: int = 1_700_000_000

    def account(self, address: str) -> Account:
        address = normalize_address(address)
        acct = self.accounts.get(address)
        if acct is None:
            acct = self.accounts[address] = Account()
        return acct

    def deploy(self, address: str, code: bytes, *, balance: int = 0, storage: dict[int, int] | None = None) -> str:
        address = normalize_address(address)
        self.accounts[address] = Account(code=bytes(code), storage=dict(storage or {}), balance=balance, nonce=1)
        return address

    def copy(self) -> MockWorld:
        return copy.deepcopy(self)


@dataclass(frozen=True)
class GroundTruth:
    meta: TransactionMeta
    trace: RawTrace
    tree: InvocationNode
    storage_events: tuple[StorageAccessEvent, ...]
    struct_logs: list[dict[str, Any]]
    world: MockWorld

    @property
    def instruction_count(self) -> int:
        return len(self.struct_logs)

    def trace_json(self) -> dict[str, Any]:
        return {
            "structLogs": self.struct_logs,
            "failed": self.trace.failed,
            "returnValue": self.trace.return_value.hex(),
        }


def create_address(creator: str, nonce: int) -> str:
    return word_to_address(int.from_bytes(keccak256(bytes.fromhex(creator[2:]) + pad32(nonce)), "big"))


def create2_address(creator: str, salt: int, initcode: bytes) -> str:
    digest = keccak256(b"\xff" + bytes.fromhex(creator[2:]) + pad32(salt) + keccak256(initcode))
    return word_to_address(int.from_bytes(digest, "big"))


def jumpdests(code: bytes) -> frozenset[int]:
    dests = set()
    pc = 0
    while pc < len(code):
        op = code[pc]
        if op == 0x5B:
            dests.add(pc)
        if 0x60 <= op <= 0x7F:
            pc += op - 0x5F
        pc += 1
    return frozenset(dests)


class _Node:
    """Mutable ground-truth frame record."""

    def __init__(self, kind, caller, code_address, storage_address, value, gas, calldata, depth, entry, call_index):
        self.kind = kind
        self.caller = caller
        self.code_address = code_address
        self.storage_address = storage_address
        self.value = value
        self.gas = gas
        self.calldata = calldata
        self.depth = depth
        self.entry = entry
        self.exit = entry
        self.call_index = call_index
        self.return_data = b""
        self.exit_reason = ExitReason.STOP
        self.children: list[_Node] = []
        self.storage: list[tuple[StorageKind, int, int, int]] = []
        self.sha3: list[Sha3Record] = []
        self.root_creation = False

    def relabel(self, old: str, new: str) -> None:
        for attr in ("caller", "code_address", "storage_address"):
            if getattr(self, attr) == old:
                setattr(self, attr, new)
        for child in self.children:
            child.relabel(old, new)

    def finish(self, failed_above: bool) -> InvocationNode:
        failed = failed_above or self.exit_reason.failed
        creates = self.kind in (CallKind.CREATE, CallKind.CREATE2) or self.root_creation
        return InvocationNode(
            call_kind=self.kind,
            caller=self.caller,
            code_address=self.code_address,
            storage_address=self.storage_address,
            value=self.value,
            gas_at_entry=self.gas,
            calldata=self.calldata,
            return_data=self.return_data,
            selector=None if creates else extract_selector(self.calldata),
            exit_reason=self.exit_reason,
            depth=self.depth,
            entry_index=self.entry,
            exit_index=self.exit,
            call_index=self.call_index,
            children=tuple(c.finish(failed) for c in self.children),
            storage_events=tuple(StorageAccessEvent(k, s, v, i, failed) for k, s, v, i in self.storage),
            sha3_events=tuple(self.sha3),
        )


class _Halt(Exception):
    def __init__(self, reason: ExitReason, data: bytes = b"") -> None:
        self.reason = reason
        self.data = data


class _Machine:
    def __init__(self, world: MockWorld, tx: TransactionMeta, capture_memory: bool, error_strings: bool) -> None:
        self.world = world
        self.tx = tx
        self.capture_memory = capture_memory
        self.error_strings = error_strings
        self.logs: list[dict[str, Any]] = []
        self._jumpdest_cache: dict[bytes, frozenset[int]] = {}

    # -- frames --------------------------------------------------------------

    def run_frame(self, node: _Node, code: bytes, gas: int, static: bool) -> tuple[ExitReason, bytes, int]:
        """Execute one frame; returns (exit reason, output, gas left)."""
        dests = self._jumpdest_cache.get(code)
        if dests is None:
            dests = self._jumpdest_cache[code] = jumpdests(code)
        stack: list[int] = []
        memory = bytearray()
        returndata = b""
        pc = 0
        tx = self.tx
        logs = self.logs
        address = node.storage_address
        storage = self.world.account(address).storage
        depth = node.depth
        reason = ExitReason.STOP
        output = b""
        while True:
            opbyte = code[pc] if pc < len(code) else 0x00
            info = BY_CODE.get(opbyte)
            if info is None or info.name not in SUPPORTED:
                name = info.name if info is not None else f"0x{opbyte:02x}"
                raise UnsupportedInstructionError(name, pc)
            name = info.name
            index = len(logs)
            record: dict[str, Any] = {
                "pc": pc,
                "op": name,
                "gas": gas,
                "gasCost": 1,
                "depth": depth,
                "stack": [hex(w) for w in stack],
            }
            if self.capture_memory:
                record["memory"] = [memory[i : i + 32].hex() for i in range(0, len(memory), 32)]
            logs.append(record)
            try:
                if len(stack) < info.pops:
                    raise _Fault(f"stack underflow ({len(stack)} <=> {info.pops})")
                if len(stack) - info.pops + info.pushes > 1024:
                    raise _Fault("stack limit reached")
                if static and name in ("SSTORE", "LOG0", "LOG1", "LOG2", "CREATE", "CREATE2", "SELFDESTRUCT"):
                    raise _Fault("write protection")
                if static and name == "CALL" and stack[-3] != 0:
                    raise _Fault("write protection")
                cost = self._cost(name, stack, gas)
                record["gasCost"] = cost
                if gas < cost:
                    raise _OutOfGas()
                gas -= cost
                pc_next = pc + 1 + info.immediate

                if info.immediate:
                    raw = code[pc + 1 : pc + 1 + info.immediate]
                    stack.append(int.from_bytes(raw.ljust(info.immediate, b"\0"), "big"))
                elif name.startswith("DUP"):
                    stack.append(stack[-info.pops])
                elif name.startswith("SWAP"):
                    k = info.pops - 1
                    stack[-1], stack[-1 - k] = stack[-1 - k], stack[-1]
                elif name == "POP":
                    stack.pop()
                elif name in _BINARY:
                    a = stack.pop()
                    b = stack.pop()
                    stack.append(_BINARY[name](a, b) & WORD_MASK)
                elif name == "ISZERO":
                    stack.append(int(stack.pop() == 0))
                elif name == "NOT":
                    stack.append(~stack.pop() & WORD_MASK)
                elif name == "SHA3":
                    off, size = stack.pop(), stack.pop()
                    data = _mem_read(memory, off, size)
                    digest = int.from_bytes(keccak256(data), "big")
                    node.sha3.append(Sha3Record(data, digest, index))
                    stack.append(digest)
                elif name == "MLOAD":
                    stack.append(int.from_bytes(_mem_read(memory, stack.pop(), 32), "big"))
                elif name == "MSTORE":
                    off, val = stack.pop(), stack.pop()
                    _mem_write(memory, off, pad32(val))
                elif name == "CALLDATALOAD":
                    off = stack.pop()
                    stack.append(int.from_bytes(_slice(node_calldata(node), off, 32), "big"))
                elif name == "CALLDATASIZE":
                    stack.append(len(node_calldata(node)))
                elif name == "CALLDATACOPY":
                    dst, src, size = stack.pop(), stack.pop(), stack.pop()
                    _mem_write(memory, dst, _slice(node_calldata(node), src, size))
                elif name == "SLOAD":
                    slot = stack.pop()
                    value = storage.get(slot, 0)
                    node.storage.append((StorageKind.LOAD, slot, value, index))
                    stack.append(value)
                elif name == "SSTORE":
                    slot, value = stack.pop(), stack.pop()
                    node.storage.append((StorageKind.STORE, slot, value, index))
                    storage[slot] = value
                elif name == "ADDRESS":
                    stack.append(address_to_int(address))
                elif name == "CALLER":
                    stack.append(address_to_int(node.caller))
                elif name == "ORIGIN":
                    stack.append(address_to_int(tx.origin))
                elif name == "CALLVALUE":
                    stack.append(node.value)
                elif name == "TIMESTAMP":
                    stack.append(self.world.timestamp)
                elif name == "NUMBER":
                    stack.append(tx.block_number)
                elif name == "GAS":
                    stack.append(gas)
                elif name == "PC":
                    stack.append(pc)
                elif name == "JUMPDEST":
                    pass
                elif name == "JUMP":
                    dest = stack.pop()
                    if dest not in dests:
                        raise _Fault("invalid jump destination")
                    pc_next = dest
                elif name == "JUMPI":
                    dest, cond = stack.pop(), stack.pop()
                    if cond:
                        if dest not in dests:
                            raise _Fault("invalid jump destination")
                        pc_next = dest
                elif name == "RETURNDATASIZE":
                    stack.append(len(returndata))
                elif name == "RETURNDATACOPY":
                    dst, src, size = stack.pop(), stack.pop(), stack.pop()
                    if src + size > len(returndata):
                        raise _Fault("return data out of bounds")
                    _mem_write(memory, dst, returndata[src : src + size])
                elif name.startswith("LOG"):
                    off, size = stack.pop(), stack.pop()
                    _mem_read(memory, off, size)
                    for _ in range(info.pops - 2):
                        stack.pop()
                elif name in ("CALL", "CALLCODE", "STATICCALL", "DELEGATECALL"):
                    result, returndata, leftover = self._call(node, name, stack, memory, cost, index, static)
                    gas += leftover
                    stack.append(result)
                    storage = self.world.account(address).storage
                elif name in ("CREATE", "CREATE2"):
                    result, returndata, leftover = self._create(node, name, stack, memory, cost, index)
                    gas += leftover
                    stack.append(result)
                    storage = self.world.account(address).storage
                elif name == "STOP":
                    raise _Halt(ExitReason.STOP)
                elif name == "RETURN":
                    off, size = stack.pop(), stack.pop()
                    raise _Halt(ExitReason.RETURN, _mem_read(memory, off, size))
                elif name == "REVERT":
                    off, size = stack.pop(), stack.pop()
                    raise _Halt(ExitReason.REVERT, _mem_read(memory, off, size))
                elif name == "SELFDESTRUCT":
                    beneficiary = word_to_address(stack.pop())
                    me = self.world.account(address)
                    self.world.account(beneficiary).balance += me.balance
                    me.balance = 0
                    raise _Halt(ExitReason.SELFDESTRUCT)
                elif name == "INVALID":
                    raise _Fault("invalid opcode: INVALID")
                else:  # pragma: no cover - SUPPORTED and this dispatch must agree
                    raise UnsupportedInstructionError(name, pc)
                pc = pc_next
            except _Halt as halt:
                reason, output = halt.reason, halt.data
                break
            except _OutOfGas:
                if self.error_strings:
                    record["error"] = "out of gas"
                reason, output, gas = ExitReason.OUT_OF_GAS, b"", 0
                break
            except _Fault as fault:
                if self.error_strings:
                    record["error"] = fault.message
                reason, output, gas = ExitReason.INVALID, b"", 0
                break
        node.exit = len(logs) - 1
        node.exit_reason = reason
        node.return_data = output if reason in (ExitReason.RETURN, ExitReason.REVERT) else b""
        return reason, output, gas

    def _cost(self, name: str, stack: list[int], gas: int) -> int:
        if name == "SSTORE":
            return SSTORE_COST
        if name == "SHA3":
            return 30 + 6 * ((stack[-2] + 31) // 32)
        if name in ("CALL", "CALLCODE", "STATICCALL", "DELEGATECALL"):
            if gas < CALL_BASE_COST:
                return CALL_BASE_COST
            return CALL_BASE_COST + min(stack[-1], _all_but_64th(gas - CALL_BASE_COST))
        if name in ("CREATE", "CREATE2"):
            if gas < CALL_BASE_COST:
                return CALL_BASE_COST
            return CALL_BASE_COST + _all_but_64th(gas - CALL_BASE_COST)
        return 1

    def _call(self, parent: _Node, name: str, stack: list[int], memory: bytearray, cost: int,
              index: int, static: bool) -> tuple[int, bytes, int]:
        gas_req = stack.pop()
        target = word_to_address(stack.pop())
        value = stack.pop() if name in ("CALL", "CALLCODE") else 0
        a_off, a_len, r_off, r_len = stack.pop(), stack.pop(), stack.pop(), stack.pop()
        forwarded = cost - CALL_BASE_COST
        calldata = _mem_read(memory, a_off, a_len)
        if 1 <= address_to_int(target) <= 9:
            raise UnsupportedInstructionError(f"{name} to precompile {target}", 0)
        kind = CallKind(name.lower())
        if kind is CallKind.DELEGATECALL:
            caller, storage_addr, value = parent.caller, parent.storage_address, parent.value
        elif kind is CallKind.CALLCODE:
            caller, storage_addr = parent.storage_address, parent.storage_address
        else:
            caller, storage_addr = parent.storage_address, target
        child_depth = parent.depth + 1
        code = self.world.account(target).code
        sender = self.world.account(parent.storage_address)
        transfers = kind in (CallKind.CALL, CallKind.CALLCODE) and value > 0
        if (transfers and sender.balance < value) or child_depth > MAX_DEPTH or not code:
            ok = not ((transfers and sender.balance < value) or child_depth > MAX_DEPTH)
            if ok and transfers and kind is CallKind.CALL:
                sender.balance -= value
                self.world.account(target).balance += value
            leaf = _Node(kind, caller, target, storage_addr, value, gas_req, calldata, child_depth, index, index)
            leaf.exit_reason = ExitReason.STOP if ok else ExitReason.REVERT
            parent.children.append(leaf)
            return int(ok), b"", forwarded
        child = _Node(kind, caller, target, storage_addr, value, forwarded, calldata, child_depth,
                      len(self.logs), index)
        parent.children.append(child)
        saved = copy.deepcopy(self.world.accounts)
        if transfers and kind is CallKind.CALL:
            sender.balance -= value
            self.world.account(target).balance += value
        reason, output, left = self.run_frame(child, code, forwarded, static or kind is CallKind.STATICCALL)
        if reason.failed:
            self.world.accounts = saved
        if reason in (ExitReason.RETURN, ExitReason.REVERT):
            _mem_write(memory, r_off, output[:r_len])
            ret = output
        else:
            ret = b""
        return int(not reason.failed), ret, left

    def _create(self, parent: _Node, name: str, stack: list[int], memory: bytearray, cost: int,
                index: int) -> tuple[int, bytes, int]:
        value, off, size = stack.pop(), stack.pop(), stack.pop()
        salt = stack.pop() if name == "CREATE2" else None
        initcode = _mem_read(memory, off, size)
        forwarded = cost - CALL_BASE_COST
        creator_addr = parent.storage_address
        creator = self.world.account(creator_addr)
        kind = CallKind(name.lower())
        child_depth = parent.depth + 1
        if creator.balance < value or child_depth > MAX_DEPTH:
            leaf = _Node(kind, creator_addr, ZERO_ADDRESS, ZERO_ADDRESS, value, 0, initcode, child_depth, index, index)
            leaf.exit_reason = ExitReason.REVERT
            parent.children.append(leaf)
            return 0, b"", forwarded
        if salt is None:
            new = create_address(creator_addr, creator.nonce)
        else:
            new = create2_address(creator_addr, salt, initcode)
        creator.nonce += 1
        existing = self.world.accounts.get(new)
        if existing is not None and (existing.code or existing.nonce):
            leaf = _Node(kind, creator_addr, ZERO_ADDRESS, ZERO_ADDRESS, value, 0, initcode, child_depth, index, index)
            leaf.exit_reason = ExitReason.REVERT
            parent.children.append(leaf)
            return 0, b"", 0
        if not initcode:
            self.world.accounts[new] = Account(balance=(existing.balance if existing else 0) + value, nonce=1)
            creator.balance -= value
            leaf = _Node(kind, creator_addr, new, new, value, 0, initcode, child_depth, index, index)
            parent.children.append(leaf)
            return address_to_int(new), b"", forwarded
        child = _Node(kind, creator_addr, new, new, value, forwarded, initcode, child_depth, len(self.logs), index)
        parent.children.append(child)
        saved = copy.deepcopy(self.world.accounts)
        creator.balance -= value
        acct = self.world.account(new)
        acct.balance += value
        acct.nonce = 1
        reason, output, left = self.run_frame(child, initcode, forwarded, False)
        if reason.failed:
            self.world.accounts = saved
            # the failed creation's address never reaches the caller
            child.relabel(new, ZERO_ADDRESS)
            return 0, (output if reason is ExitReason.REVERT else b""), left
        self.world.account(new).code = output
        return address_to_int(new), b"", left


class _Fault(Exception):
    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class _OutOfGas(Exception):
    pass


_BINARY = {
    "ADD": lambda a, b: a + b,
    "SUB": lambda a, b: a - b,
    "MUL": lambda a, b: a * b,
    "DIV": lambda a, b: a // b if b else 0,
    "LT": lambda a, b: int(a < b),
    "GT": lambda a, b: int(a > b),
    "EQ": lambda a, b: int(a == b),
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
}


def _all_but_64th(gas: int) -> int:
    # a caller always keeps 1/64 of its remaining gas
    return gas - gas // 64


def node_calldata(node: _Node) -> bytes:
    # init code runs with empty calldata
    if node.kind in (CallKind.CREATE, CallKind.CREATE2) or node.root_creation:
        return b""
    return node.calldata


def _mem_expand(memory: bytearray, end: int) -> None:
    if end > len(memory):
        memory.extend(bytes(((end + 31) // 32) * 32 - len(memory)))


def _mem_read(memory: bytearray, off: int, size: int) -> bytes:
    if size == 0:
        return b""
    _mem_expand(memory, off + size)
    return bytes(memory[off : off + size])


def _mem_write(memory: bytearray, off: int, data: bytes) -> None:
    if not data:
        return
    _mem_expand(memory, off + len(data))
    memory[off : off + len(data)] = data


def _slice(data: bytes, off: int, size: int) -> bytes:
    chunk = data[off : off + size] if off < len(data) else b""
    return chunk + bytes(size - len(chunk))


def make_tx(
    origin: str,
    to: str | None,
    data: bytes = b"",
    *,
    value: int = 0,
    gas: int = 1_000_000,
    block: int = 1,
    tx_hash: str | None = None,
    tx_index: int = 0,
) -> TransactionMeta:
    if tx_hash is None:
        seed = f"{origin}:{to}:{data.hex()}:{value}:{gas}:{block}:{tx_index}".encode()
        tx_hash = "0x" + keccak256(seed).hex()
    return TransactionMeta(
        tx_hash=tx_hash,
        block_number=block,
        origin=normalize_address(origin),
        to=normalize_address(to) if to is not None else None,
        value=value,
        input=bytes(data),
        gas_limit=gas,
        gas_used=0,
        status=TxStatus.SUCCESS,
        tx_index=tx_index,
    )


def execute(
    world: MockWorld,
    tx: TransactionMeta,
    *,
    capture_memory: bool = False,
    error_strings: bool = True,
) -> GroundTruth:
    """Run ``tx`` against a copy of ``world``; the input world is never mutated.

    ``error_strings=False`` omits the ``error`` field from faulting entries,
    mimicking clients that only signal failure through the depth drop.
    """
    world = world.copy()
    machine = _Machine(world, tx, capture_memory, error_strings)
    origin = world.account(tx.origin)
    if origin.balance < tx.value:
        raise ValueError(f"origin {tx.origin} cannot pay value {tx.value}")
    origin_nonce = origin.nonce
    origin.nonce += 1
    if tx.to is None:
        target = create_address(tx.origin, origin_nonce)
        code = tx.input
    else:
        target = tx.to
        code = world.account(target).code
    origin.balance -= tx.value
    world.account(target).balance += tx.value
    root = _Node(CallKind.ROOT, tx.origin, target, target, tx.value, tx.gas_limit, tx.input, 1, 0, None)
    root.root_creation = tx.to is None
    if not code:
        root.exit = -1
        reason, output, left = ExitReason.STOP, b"", tx.gas_limit
    else:
        if tx.to is None:
            world.account(target).nonce = 1
        saved = copy.deepcopy(world.accounts)
        reason, output, left = machine.run_frame(root, code, tx.gas_limit, False)
        if reason.failed:
            # only the nonce bump and value transfer survive
            world.accounts = saved
        elif tx.to is None:
            world.account(target).code = output
    tree = root.finish(False)
    trace = RawTrace(entries_from_json(machine.logs), reason.failed,
                     output if reason in (ExitReason.RETURN, ExitReason.REVERT) else b"")
    meta = replace(
        tx,
        gas_used=tx.gas_limit - left,
        status=TxStatus.REVERTED if reason.failed else TxStatus.SUCCESS,
        contract_address=target if tx.to is None else None,
    )
    events: list[StorageAccessEvent] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        events.extend(node.storage_events)
        stack.extend(node.children)
    events.sort(key=lambda ev: ev.instruction_index)
    return GroundTruth(meta, trace, tree, tuple(events), machine.logs, world)
