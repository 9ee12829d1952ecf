from __future__ import annotations

import pytest

from tracekit.errors import UnsupportedInstructionError
from tracekit.oracle import (
    AssemblyError,
    MockWorld,
    assemble,
    create2_address,
    create_address,
    execute,
    initcode_for,
    make_tx,
)
from tracekit.oracle.corpus import A, B, ORIGIN, SCENARIOS, scenario
from tracekit.primitives import keccak256, pad32, word_to_address
from tracekit.trace import entry_from_json
from tracekit.tree import CallKind, ExitReason, StorageKind, walk

ENTRY_KEYS = {"pc", "op", "gas", "gasCost", "depth", "stack", "memory", "error"}


def _run(source: str, **callees: str):
    world = MockWorld()
    world.deploy(A, assemble(source))
    for addr, code in callees.items():
        world.deploy(addr, assemble(code))
    return execute(world, make_tx(ORIGIN, A))


def test_return_program_has_three_entries_and_a_bare_root():
    gt = _run("PUSH1 0\nPUSH1 0\nRETURN")
    assert gt.instruction_count == 3
    assert gt.tree.children == ()
    assert gt.tree.exit_reason is ExitReason.RETURN


def test_reverting_callee_pushes_zero_to_caller():
    gt = scenario("callee_revert").run()
    (child,) = gt.tree.children
    assert child.exit_reason is ExitReason.REVERT
    after = gt.trace.entries[child.exit_index + 1]
    assert after.depth == 1 and after.stack[-1] == 0
    assert gt.tree.exit_reason is ExitReason.STOP


def test_single_sstore_event():
    gt = _run("PUSH1 7\nPUSH1 5\nSSTORE\nSTOP")
    assert [(e.kind, e.raw_slot, e.value) for e in gt.storage_events] == [(StorageKind.STORE, 5, 7)]


def test_unsupported_opcode_is_an_error():
    with pytest.raises(UnsupportedInstructionError, match="BALANCE"):
        _run("PUSH1 0\nBALANCE\nSTOP")


def test_assembler_labels_and_errors():
    code = assemble("start:\nJUMPDEST\nPUSH2 @start\nJUMP")
    assert code == bytes([0x5B, 0x61, 0x00, 0x00, 0x56])
    with pytest.raises(AssemblyError):
        assemble("PUSH1 0x1ff")
    with pytest.raises(AssemblyError):
        assemble("NOTANOP")


def test_create_addresses():
    want = word_to_address(int.from_bytes(keccak256(bytes.fromhex(A[2:]) + pad32(1)), "big"))
    assert create_address(A, 1) == want
    init = initcode_for(assemble("STOP"))
    digest = keccak256(b"\xff" + bytes.fromhex(A[2:]) + pad32(7) + keccak256(init))
    assert create2_address(A, 7, init) == word_to_address(int.from_bytes(digest, "big"))


def test_created_child_lives_at_computed_address():
    gt = scenario("create_then_call").run()
    created = gt.tree.children[0]
    assert created.call_kind is CallKind.CREATE
    assert created.code_address == create_address(A, 1)


def test_world_is_not_mutated():
    world = MockWorld()
    world.deploy(A, assemble("PUSH1 7\nPUSH1 5\nSSTORE\nSTOP"))
    before = world.copy()
    gt = execute(world, make_tx(ORIGIN, A))
    assert world.accounts == before.accounts
    assert gt.world.account(A).storage == {5: 7}


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_schema_conformance(sc, ground_truths):
    gt = ground_truths[sc.name]
    for i, raw in enumerate(gt.struct_logs):
        assert set(raw) <= ENTRY_KEYS
        assert entry_from_json(raw, i) == gt.trace.entries[i]


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_gas_monotone_within_frames(sc, ground_truths):
    gt = ground_truths[sc.name]
    for node in walk(gt.tree):
        if not node.executed:
            continue
        own = [e.gas for e in gt.trace.entries[node.entry_index : node.exit_index + 1] if e.depth == node.depth]
        assert all(a >= b for a, b in zip(own, own[1:]))


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_depth_discipline(sc, ground_truths):
    entries = ground_truths[sc.name].trace.entries
    if entries:
        assert entries[0].depth == 1
    for prev, cur in zip(entries, entries[1:]):
        assert cur.depth <= prev.depth + 1
        if cur.depth == prev.depth + 1:
            assert prev.op in ("CALL", "CALLCODE", "STATICCALL", "DELEGATECALL", "CREATE", "CREATE2")


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_node_count_matches_entered_frames(sc, ground_truths):
    gt = ground_truths[sc.name]
    entries = gt.trace.entries
    entered = sum(1 for a, b in zip(entries, entries[1:]) if b.depth == a.depth + 1)
    # the root is always a real frame, even when its code is empty
    executed = [n for n in walk(gt.tree) if n.executed]
    assert len(executed) == 1 + entered


def test_callee_only_touches_its_own_storage():
    gt = scenario("callee_revert").run()
    assert gt.world.account(B).storage == {}
