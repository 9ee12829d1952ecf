from __future__ import annotations

import pytest

from tracekit.errors import MalformedTraceError, SchemaError
from tracekit.oracle import MockWorld, assemble, execute, make_tx
from tracekit.oracle.corpus import A, ORIGIN, SCENARIOS, protocol_corpus, scenario
from tracekit.translator import FactLine, fact_lines, parse_fact_file, to_fact_file
from tracekit.trace import RawTrace, StructLogEntry

PROTOCOL = protocol_corpus()


def _run(source):
    world = MockWorld()
    world.deploy(A, assemble(source))
    return execute(world, make_tx(ORIGIN, A))


def test_three_entries_three_lines():
    gt = scenario("return_empty").run()
    header, facts = parse_fact_file(to_fact_file(gt.meta, gt.trace))
    assert len(facts) == 3
    assert header == {"tx": gt.meta.tx_hash, "block": str(gt.meta.block_number), "from": ORIGIN, "to": A}


def test_add_operands_and_result():
    gt = _run("PUSH1 2\nPUSH1 3\nADD\nSTOP")
    assert fact_lines(gt.trace)[2] == FactLine(2, "add", (3, 2, 5))
    assert fact_lines(gt.trace)[0] == FactLine(0, "push1", (2,))


def test_revert_has_range_operands_and_no_result():
    gt = _run("PUSH1 32\nPUSH1 0\nREVERT")
    last = fact_lines(gt.trace)[-1]
    assert last == FactLine(2, "revert", (0, 32))


def test_call_result_comes_from_after_the_child():
    gt = scenario("callee_revert").run()
    lines = fact_lines(gt.trace)
    (child,) = gt.tree.children
    call = lines[child.call_index]
    assert call.relation == "call"
    assert call.operands[-1] == 0 == gt.trace.entries[child.exit_index + 1].stack[-1]


def test_rendered_line_format():
    gt = _run("PUSH1 2\nPUSH1 3\nADD\nSTOP")
    text = to_fact_file(gt.meta, gt.trace)
    assert text.endswith("\n") and "\r" not in text
    assert text.splitlines()[4:] == ["0\tpush1\t0x2", "1\tpush1\t0x3", "2\tadd\t0x3,0x2,0x5", "3\tstop\t"]


ALL = [sc.name for sc in SCENARIOS] + [f"protocol_{i}" for i in range(len(PROTOCOL))]


def _gt(name, ground_truths):
    if name.startswith("protocol_"):
        return PROTOCOL[int(name.split("_")[1])]
    return ground_truths[name]


@pytest.mark.parametrize("name", ALL)
def test_count_lossless_and_deterministic(name, ground_truths):
    gt = _gt(name, ground_truths)
    text = to_fact_file(gt.meta, gt.trace, gt.tree)
    assert text == to_fact_file(gt.meta, gt.trace, gt.tree)
    assert text.encode("utf-8") == to_fact_file(gt.meta, gt.trace).encode("utf-8")
    _header, facts = parse_fact_file(text)
    assert len(facts) == len(gt.trace.entries)
    assert [f.index for f in facts] == list(range(len(facts)))
    assert [f.relation.upper() for f in facts] == [e.op for e in gt.trace.entries]


def test_shallow_stack_is_malformed():
    bad = RawTrace((StructLogEntry(0, "PUSH1", 100, 3, 1, ()), StructLogEntry(2, "ADD", 97, 3, 1, (1,))))
    with pytest.raises(MalformedTraceError) as info:
        fact_lines(bad)
    assert info.value.index == 1


def test_errored_entry_keeps_partial_operands():
    trace = RawTrace((StructLogEntry(0, "ADD", 100, 3, 1, (1,), error="stack underflow"),), failed=True)
    assert fact_lines(trace) == [FactLine(0, "add", (1,))]


def test_parse_rejects_garbage():
    with pytest.raises(SchemaError):
        parse_fact_file("#tx 0x1\n0\tadd\n")
    with pytest.raises(SchemaError):
        parse_fact_file("0\tadd\tzz\n")
