from __future__ import annotations

import pytest

from tracekit.errors import MalformedTraceError
from tracekit.oracle.corpus import A, B, SCENARIOS, scenario
from tracekit.parser import OpClass, build_invocation_tree, classify_opcode, extract_call_frame_args, extract_selector
from tracekit.primitives import keccak256
from tracekit.trace import RawTrace, StructLogEntry
from tracekit.tree import CallKind, ExitReason, render_tree, walk

ENTER = ("CALL", "CALLCODE", "STATICCALL", "DELEGATECALL", "CREATE", "CREATE2")
EXIT = ("STOP", "RETURN", "REVERT", "SELFDESTRUCT", "INVALID")


@pytest.mark.parametrize("op", ENTER)
def test_enter_opcodes(op):
    assert classify_opcode(op) is OpClass.FUNCTION_ENTER
    assert classify_opcode(op.lower()) is OpClass.FUNCTION_ENTER


@pytest.mark.parametrize("op", EXIT)
def test_exit_opcodes(op):
    assert classify_opcode(op) is OpClass.FUNCTION_EXIT


def test_other_classes():
    assert classify_opcode("ADD") is OpClass.OTHER
    assert classify_opcode("SLOAD") is OpClass.STORAGE_ACCESS
    assert classify_opcode("SSTORE") is OpClass.STORAGE_ACCESS
    assert classify_opcode("SHA3") is OpClass.SHA3
    assert classify_opcode("KECCAK256") is OpClass.SHA3
    assert classify_opcode("NOT_AN_OPCODE") is OpClass.OTHER


def test_extract_selector():
    assert extract_selector(b"") is None
    assert extract_selector(b"\x01\x02\x03") is None
    transfer = keccak256(b"transfer(address,uint256)")[:4]
    assert transfer.hex() == "a9059cbb"
    assert extract_selector(transfer + bytes(64)) == transfer


def _entry(op, stack, depth=1):
    return StructLogEntry(pc=0, op=op, gas=1000, gas_cost=1, depth=depth, stack=tuple(stack))


def test_call_frame_args_reads_operands_top_down():
    # bottom .. top: retLen, retOff, argLen, argOff, value, addr, gas
    args = extract_call_frame_args(_entry("CALL", [32, 0, 36, 0x80, 5, int(B, 16), 5000]))
    assert args.kind is CallKind.CALL
    assert (args.gas, args.target, args.value) == (5000, B, 5)
    assert (args.args_offset, args.args_length, args.ret_offset, args.ret_length) == (0x80, 36, 0, 32)


def test_staticcall_has_no_value():
    args = extract_call_frame_args(_entry("STATICCALL", [32, 0, 4, 0, int(B, 16), 100]))
    assert args.value == 0 and args.target == B and args.args_length == 4


def test_create2_operands():
    args = extract_call_frame_args(_entry("CREATE2", [9, 12, 0, 3]))
    assert args.kind is CallKind.CREATE2
    assert (args.value, args.args_offset, args.args_length, args.salt) == (3, 0, 12, 9)


def test_call_frame_args_underflow():
    with pytest.raises(MalformedTraceError):
        extract_call_frame_args(_entry("CALL", [1, 2, 3]), 17)


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_oracle_equivalence(sc, ground_truths):
    gt = ground_truths[sc.name]
    assert build_invocation_tree(gt.meta, gt.trace) == gt.tree


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_event_conservation(sc, ground_truths):
    gt = ground_truths[sc.name]
    tree = build_invocation_tree(gt.meta, gt.trace)
    storage_ops = sum(1 for e in gt.trace.entries if classify_opcode(e.op) is OpClass.STORAGE_ACCESS and not e.error)
    sha3_ops = sum(1 for e in gt.trace.entries if classify_opcode(e.op) is OpClass.SHA3 and not e.error)
    assert sum(len(n.storage_events) for n in walk(tree)) == storage_ops
    assert sum(len(n.sha3_events) for n in walk(tree)) == sha3_ops


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_nesting_soundness(sc, ground_truths):
    tree = build_invocation_tree(ground_truths[sc.name].meta, ground_truths[sc.name].trace)
    executed = [n.entry_index for n in walk(tree) if n.executed and n.exit_index >= 0]
    assert executed == sorted(executed) and len(set(executed)) == len(executed)
    for node in walk(tree):
        for child in node.children:
            if node.exit_index >= 0:
                assert node.entry_index < child.entry_index <= child.exit_index < node.exit_index
        for a, b in zip(node.children, node.children[1:]):
            assert a.exit_index < b.entry_index


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_rollback_propagation(sc, ground_truths):
    tree = build_invocation_tree(ground_truths[sc.name].meta, ground_truths[sc.name].trace)

    def visit(node, failed_above):
        failed = failed_above or node.exit_reason.failed
        for ev in node.storage_events:
            assert ev.rolled_back == failed
        for child in node.children:
            visit(child, failed)

    visit(tree, False)


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_selector_rule(sc, ground_truths):
    tree = build_invocation_tree(ground_truths[sc.name].meta, ground_truths[sc.name].trace)
    for node in walk(tree):
        creates = node.call_kind in (CallKind.CREATE, CallKind.CREATE2)
        creates = creates or (node.call_kind is CallKind.ROOT and ground_truths[sc.name].meta.is_creation)
        expect = node.calldata is not None and len(node.calldata) >= 4 and not creates
        assert (node.selector is not None) == expect


def test_call_then_staticcall_chain():
    gt = scenario("call_staticcall_chain").run()
    tree = build_invocation_tree(gt.meta, gt.trace)
    (a,) = tree.children
    (b,) = a.children
    assert (a.call_kind, b.call_kind) == (CallKind.CALL, CallKind.STATICCALL)
    assert (tree.exit_reason, a.exit_reason, b.exit_reason) == (ExitReason.STOP, ExitReason.RETURN, ExitReason.RETURN)


def test_zero_entry_trace():
    gt = scenario("value_transfer_only").run()
    tree = build_invocation_tree(gt.meta, RawTrace(()))
    assert tree.children == () and tree.exit_reason is ExitReason.STOP


@pytest.mark.parametrize("name", ["callee_out_of_gas", "callee_out_of_gas_silent"])
def test_out_of_gas_child(name):
    gt = scenario(name).run()
    tree = build_invocation_tree(gt.meta, gt.trace)
    (child,) = tree.children
    assert child.exit_reason is ExitReason.OUT_OF_GAS
    assert child.storage_events and all(ev.rolled_back for ev in child.storage_events)


def test_delegatecall_keeps_storage_context():
    gt = scenario("delegatecall_library").run()
    (lib,) = build_invocation_tree(gt.meta, gt.trace).children
    assert lib.call_kind is CallKind.DELEGATECALL
    assert lib.storage_address == A and lib.code_address == B


def test_codeless_callee_is_a_synthetic_leaf():
    gt = scenario("codeless_callee").run()
    tree = build_invocation_tree(gt.meta, gt.trace)
    assert len(tree.children) == 2
    for leaf in tree.children:
        assert leaf.entry_index == leaf.exit_index == leaf.call_index
        assert not leaf.executed


def test_depth_jump_is_malformed():
    gt = scenario("single_sstore").run()
    entries = list(gt.trace.entries)
    entries[1] = StructLogEntry(entries[1].pc, entries[1].op, entries[1].gas, 1, 3, entries[1].stack)
    with pytest.raises(MalformedTraceError) as info:
        build_invocation_tree(gt.meta, RawTrace(tuple(entries)))
    assert info.value.index == 1


def test_render_format():
    gt = scenario("call_staticcall_chain").run()
    lines = render_tree(build_invocation_tree(gt.meta, gt.trace)).splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("root 0x3333")
    assert lines[1].startswith("  call 0x1111") and lines[2].startswith("    staticcall 0x2222")
    assert lines[2].endswith("calldata=0B ret=32B exit=return")
