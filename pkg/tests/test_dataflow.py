from __future__ import annotations

import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracekit.dataflow import (
    CalldataRange,
    CallReturn,
    EnvOpcode,
    FlowFact,
    Sink,
    SinkPattern,
    StorageSlot,
    parse_sink_filter,
    parse_source,
    query_flows,
    shadow_execute,
    write_jsonl,
)
from tracekit.errors import UsageError
from tracekit.oracle.corpus import A, B, SCENARIOS, call_asm
from tracekit.parser import build_invocation_tree

from taint_corpus import CORPUS, EXAMPLES, W1, TaintProgram, as_tuples, facts_of

PROGRAMS = EXAMPLES + CORPUS


@pytest.mark.parametrize("prog", PROGRAMS, ids=lambda p: p.name)
def test_hand_derived_facts(prog):
    gt = prog.run()
    assert as_tuples(facts_of(gt, prog.sources)) == sorted(prog.expected)


def test_hashed_slot_operand_stays_clean():
    prog = EXAMPLES[2]
    facts = facts_of(prog.run(), prog.sources)
    assert [f.sink.role for f in facts] == ["value"]


@pytest.mark.parametrize("prog", PROGRAMS, ids=lambda p: p.name)
def test_sink_index_names_a_matching_opcode(prog):
    gt = prog.run()
    for fact in facts_of(gt, prog.sources):
        assert gt.trace.entries[fact.sink.instruction_index].op == fact.sink.opcode


# -- query_flows ---------------------------------------------------------------


def _fact(opcode, role, index):
    return FlowFact(EnvOpcode("CALLER"), Sink(opcode, role, index), 1)


def test_query_empty():
    assert query_flows([], SinkPattern("SSTORE", "value")) == []


def test_query_preserves_order():
    facts = [_fact("SSTORE", "value", 3), _fact("JUMPI", "condition", 5), _fact("SSTORE", "value", 9)]
    assert query_flows(facts, parse_sink_filter("sstore:value")) == [facts[0], facts[2]]
    assert query_flows(facts, parse_sink_filter("*")) == facts


PARENT_AND_CHILD = TaintProgram(
    "parent_and_child",
    "\n".join([
        "PUSH1 68", "PUSH1 0", "PUSH1 0", "CALLDATACOPY",
        call_asm("CALL", B, args=(0, 68)),
        "POP",
        "PUSH1 4", "CALLDATALOAD", "PUSH1 0", "SSTORE",
        "STOP",
    ]),
    (CalldataRange(0, 4, 32),),
    (),
    callees={B: "PUSH1 4\nCALLDATALOAD\nPUSH1 1\nSSTORE\nSTOP"},
)


def test_query_restricted_to_child_frame():
    gt = PARENT_AND_CHILD.run()
    tree = build_invocation_tree(gt.meta, gt.trace)
    facts = facts_of(gt, PARENT_AND_CHILD.sources)
    stores = query_flows(facts, parse_sink_filter("SSTORE:value"))
    assert len(stores) == 2 and all(f.value_at_sink == W1 for f in stores)
    (child,) = tree.children
    in_child = query_flows(facts, parse_sink_filter("SSTORE@1"), tree)
    assert len(in_child) == 1
    assert child.entry_index <= in_child[0].sink.instruction_index <= child.exit_index
    assert in_child[0].frame == 1


def test_frame_filter_needs_tree():
    with pytest.raises(UsageError):
        query_flows([], parse_sink_filter("SSTORE@1"))


def test_bad_filters_and_sources():
    with pytest.raises(UsageError):
        parse_sink_filter("SSTORE@x")
    with pytest.raises(UsageError):
        parse_source("calldata:0:4")
    assert parse_source("storage:0x" + "11" * 20 + ":3") == StorageSlot(A, 3)
    assert parse_source("env:caller") == EnvOpcode("CALLER")
    assert parse_source("return:2") == CallReturn(2)


def test_jsonl_export():
    out = io.StringIO()
    assert write_jsonl([_fact("SSTORE", "value", 3)], out) == 1
    assert json.loads(out.getvalue()) == {
        "source": "env:CALLER",
        "sink_opcode": "SSTORE",
        "operand_role": "value",
        "instruction_index": 3,
        "value_hex": "0x1",
    }


# -- properties ------------------------------------------------------------------

ALL_SOURCES = (
    CalldataRange(0, 0, 4),
    CalldataRange(0, 4, 32),
    CalldataRange(0, 36, 32),
    EnvOpcode("CALLER"),
    EnvOpcode("ORIGIN"),
    EnvOpcode("CALLVALUE"),
    EnvOpcode("NUMBER"),
    EnvOpcode("TIMESTAMP"),
    StorageSlot(A, 0),
    StorageSlot(A, 3),
    CallReturn(1),
)


def _pairs(facts):
    return [(f.sink, f.source) for f in facts]


def _is_subsequence(small, big):
    it = iter(big)
    return all(any(x == y for y in it) for x in small)


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_no_spontaneous_taint(sc, ground_truths):
    gt = ground_truths[sc.name]
    state, facts = shadow_execute(gt.meta, gt.trace, gt.tree, [])
    assert facts == []
    assert set(state.tag_ids()) <= {0}


@pytest.mark.parametrize("prog", PROGRAMS + (PARENT_AND_CHILD,), ids=lambda p: p.name)
def test_no_spontaneous_taint_in_taint_corpus(prog):
    gt = prog.run()
    state, facts = shadow_execute(gt.meta, gt.trace, gt.tree, [])
    assert facts == [] and set(state.tag_ids()) <= {0}


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_shadow_stack_agrees_with_trace(sc, ground_truths):
    # check_stack raises on the first depth mismatch against the recorded stack
    gt = ground_truths[sc.name]
    shadow_execute(gt.meta, gt.trace, gt.tree, ALL_SOURCES, check_stack=True)


_GTS = {p.name: p.run() for p in PROGRAMS + (PARENT_AND_CHILD,)}


@given(
    st.sampled_from(sorted(_GTS)),
    st.lists(st.sampled_from(ALL_SOURCES), unique=True, max_size=5),
    st.sampled_from(ALL_SOURCES),
)
def test_adding_a_source_keeps_every_fact(name, sources, extra):
    gt = _GTS[name]
    before = facts_of(gt, sources)
    after = facts_of(gt, list(sources) + [extra])
    assert _is_subsequence(_pairs(before), _pairs(after))


@given(st.sampled_from([sc.name for sc in SCENARIOS]), st.lists(st.sampled_from(ALL_SOURCES), unique=True, max_size=4),
       st.sampled_from(ALL_SOURCES))
def test_monotone_over_oracle_scenarios(name, sources, extra):
    gt = next(sc for sc in SCENARIOS if sc.name == name).run()
    assert _is_subsequence(_pairs(facts_of(gt, sources)), _pairs(facts_of(gt, list(sources) + [extra])))
