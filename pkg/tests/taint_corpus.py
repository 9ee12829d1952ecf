"""Ten small taint programs with expected flow facts worked out by hand.

Each expected fact is ``(source label, sink opcode, operand role,
instruction index, value at sink)``. Indices were counted off the listings
(comments give each instruction's index); values follow from the calldata
below. Callee frames are numbered in pre-order, so the first callee is 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from tracekit.dataflow import CalldataRange, CallReturn, EnvOpcode, StorageSlot, shadow_execute
from tracekit.oracle import MockWorld, assemble, execute, make_tx
from tracekit.oracle.corpus import A, B, EMPTY, ORIGIN, RETURN_WORD
from tracekit.primitives import keccak_word, pad32

W1 = 0x1234
W2 = 0xABCD
CALLDATA = bytes(4) + pad32(W1) + pad32(W2)


@dataclass(frozen=True)
class TaintProgram:
    name: str
    source: str
    sources: tuple
    expected: tuple
    calldata: bytes = CALLDATA
    value: int = 0
    callees: dict = field(default_factory=dict)
    storage: dict = field(default_factory=dict)

    def run(self):
        world = MockWorld()
        world.account(ORIGIN).balance = 10**18
        world.deploy(A, assemble(self.source), storage=self.storage)
        for addr, code in self.callees.items():
            world.deploy(addr, assemble(code))
        return execute(world, make_tx(ORIGIN, A, self.calldata, value=self.value))


def facts_of(gt, sources):
    _state, facts = shadow_execute(gt.meta, gt.trace, gt.tree, sources)
    return facts


def as_tuples(facts):
    return sorted((f.source.label(), f.sink.opcode, f.sink.role, f.sink.instruction_index, f.value_at_sink) for f in facts)


CD_4 = CalldataRange(0, 4, 32)
CD_36 = CalldataRange(0, 36, 32)

CORPUS: tuple[TaintProgram, ...] = (
    TaintProgram(
        "calldata_picks_slot",
        """
        PUSH1 1        ; 0
        PUSH1 4        ; 1
        CALLDATALOAD   ; 2
        SSTORE         ; 3  slot = W1, value = 1
        STOP           ; 4
        """,
        (CD_4,),
        (("calldata:0:4:32", "SSTORE", "slot", 3, W1),),
    ),
    TaintProgram(
        "two_sources_meet_in_add",
        """
        PUSH1 4        ; 0
        CALLDATALOAD   ; 1
        PUSH1 36       ; 2
        CALLDATALOAD   ; 3
        ADD            ; 4
        PUSH1 0        ; 5
        SSTORE         ; 6  value = W1 + W2
        STOP           ; 7
        """,
        (CD_4, CD_36),
        (
            ("calldata:0:36:32", "SSTORE", "value", 6, W1 + W2),
            ("calldata:0:4:32", "SSTORE", "value", 6, W1 + W2),
        ),
    ),
    TaintProgram(
        "tainted_word_left_unused",
        """
        PUSH1 4        ; 0
        CALLDATALOAD   ; 1  tainted, never reaches a sink
        PUSH1 7        ; 2
        PUSH1 0        ; 3
        SSTORE         ; 4  constant slot and value
        POP            ; 5
        STOP           ; 6
        """,
        (CD_4,),
        (),
    ),
    TaintProgram(
        "memory_round_trip_then_return",
        """
        PUSH1 4        ; 0
        CALLDATALOAD   ; 1
        PUSH1 0        ; 2
        MSTORE         ; 3
        PUSH1 0        ; 4
        MLOAD          ; 5
        PUSH1 1        ; 6
        SSTORE         ; 7  value = W1
        PUSH1 32       ; 8
        PUSH1 0        ; 9
        RETURN         ; 10 data = mem[0:32] = W1
        """,
        (CD_4,),
        (
            ("calldata:0:4:32", "RETURN", "data", 10, W1),
            ("calldata:0:4:32", "SSTORE", "value", 7, W1),
        ),
    ),
    TaintProgram(
        "two_byte_source_inside_a_word",
        """
        PUSH1 4        ; 0  reads bytes 4..35, overlapping 10..11
        CALLDATALOAD   ; 1
        PUSH1 0        ; 2
        SSTORE         ; 3  value = W1
        PUSH1 36       ; 4  reads bytes 36..67, disjoint
        CALLDATALOAD   ; 5
        PUSH1 1        ; 6
        SSTORE         ; 7
        STOP           ; 8
        """,
        (CalldataRange(0, 10, 2),),
        (("calldata:0:10:2", "SSTORE", "value", 3, W1),),
    ),
    TaintProgram(
        "caller_steers_branch",
        """
        CALLER         ; 0
        PUSH1 @dest    ; 1
        JUMPI          ; 2  condition = caller
        INVALID
        dest:
        JUMPDEST       ; 3
        STOP           ; 4
        """,
        (EnvOpcode("CALLER"),),
        (("env:CALLER", "JUMPI", "condition", 2, int(ORIGIN, 16)),),
    ),
    TaintProgram(
        "storage_slot_copied",
        """
        PUSH1 3        ; 0
        SLOAD          ; 1  reads 0x55
        PUSH1 4        ; 2
        SSTORE         ; 3  value = 0x55
        STOP           ; 4
        """,
        (StorageSlot(A, 3),),
        ((f"storage:{A}:0x3", "SSTORE", "value", 3, 0x55),),
        storage={3: 0x55},
    ),
    TaintProgram(
        "calldata_target_callvalue_amount",
        f"""
        PUSH1 0        ; 0  retLen
        PUSH1 0        ; 1  retOff
        PUSH1 0        ; 2  argLen
        PUSH1 0        ; 3  argOff
        CALLVALUE      ; 4  value = 3
        PUSH1 4        ; 5
        CALLDATALOAD   ; 6  target = EMPTY
        GAS            ; 7
        CALL           ; 8  code-less callee, synthetic leaf
        STOP           ; 9
        """,
        (CD_4, EnvOpcode("CALLVALUE")),
        (
            ("calldata:0:4:32", "CALL", "target_address", 8, int(EMPTY, 16)),
            ("env:CALLVALUE", "CALL", "value", 8, 3),
        ),
        calldata=bytes(4) + pad32(int(EMPTY, 16)),
        value=3,
    ),
    TaintProgram(
        "callee_result_stored",
        f"""
        PUSH1 32       ; 0  retLen
        PUSH1 0        ; 1  retOff
        PUSH1 0        ; 2  argLen
        PUSH1 0        ; 3  argOff
        PUSH1 0        ; 4  value
        PUSH20 {B}     ; 5
        GAS            ; 6
        CALL           ; 7  callee runs entries 8..13 and returns 0x2a
        POP            ; 14
        PUSH1 0        ; 15
        MLOAD          ; 16
        PUSH1 5        ; 17
        SSTORE         ; 18 value = 0x2a
        STOP           ; 19
        """,
        (CallReturn(1),),
        (("return:1", "SSTORE", "value", 18, 0x2A),),
        callees={B: RETURN_WORD},
    ),
    TaintProgram(
        "hashed_key_picks_slot",
        """
        PUSH1 4        ; 0
        CALLDATALOAD   ; 1
        PUSH1 0        ; 2
        MSTORE         ; 3
        PUSH1 2        ; 4
        PUSH1 32       ; 5
        MSTORE         ; 6
        PUSH1 64       ; 7
        PUSH1 0        ; 8
        SHA3           ; 9  keccak(pad32(W1) ++ pad32(2))
        CALLER         ; 10
        SWAP1          ; 11
        SSTORE         ; 12 slot tainted, value = caller untainted
        STOP           ; 13
        """,
        (CD_4,),
        (("calldata:0:4:32", "SSTORE", "slot", 12, keccak_word(pad32(W1) + pad32(2))),),
    ),
)


# The three worked examples of the dataflow module's contract.
STORE_CALLDATA = """
PUSH1 4
CALLDATALOAD
PUSH1 0
SSTORE
STOP
"""

STORE_CALLER_AT_HASHED_SLOT = """
PUSH20 0x2222222222222222222222222222222222222222
PUSH1 0
MSTORE
PUSH1 9
PUSH1 32
MSTORE
CALLER
PUSH1 64
PUSH1 0
SHA3
SSTORE
STOP
"""

EXAMPLES = (
    TaintProgram(
        "calldata_word_to_slot_zero",
        STORE_CALLDATA,
        (CD_4,),
        (("calldata:0:4:32", "SSTORE", "value", 3, W1),),
    ),
    TaintProgram("disjoint_calldata_range", STORE_CALLDATA, (CalldataRange(0, 100, 32),), ()),
    TaintProgram(
        "caller_at_hashed_slot",
        STORE_CALLER_AT_HASHED_SLOT,
        (EnvOpcode("CALLER"),),
        (("env:CALLER", "SSTORE", "value", 10, int(ORIGIN, 16)),),
    ),
)
