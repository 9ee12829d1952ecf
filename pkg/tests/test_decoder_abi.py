from __future__ import annotations

import json

import eth_abi
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracekit.decoder import AbiFunction, DecodeStatus, decode, decode_call, encode, load_abi, parse_type
from tracekit.errors import AbiError
from tracekit.oracle.corpus import SCENARIOS
from tracekit.primitives import keccak256
from tracekit.tree import CallKind, ExitReason, InvocationNode, walk

TRANSFER = AbiFunction.build("transfer", [("to", "address"), ("amount", "uint256")], [("ok", "bool")])
STORE_BLOB = AbiFunction.build("store", [("blob", "bytes")])
ADDR = "0x" + "11" * 20


def _node(calldata, return_data=b"", exit_reason=ExitReason.RETURN):
    return InvocationNode(
        call_kind=CallKind.ROOT,
        caller="0x" + "aa" * 20,
        code_address=ADDR,
        storage_address=ADDR,
        value=0,
        gas_at_entry=100_000,
        calldata=calldata,
        return_data=return_data,
        selector=calldata[:4] if calldata is not None and len(calldata) >= 4 else None,
        exit_reason=exit_reason,
        depth=1,
        entry_index=0,
        exit_index=0,
    )


def test_no_selector_is_undecoded():
    assert decode_call(_node(b""), {TRANSFER}).decode_status is DecodeStatus.UNDECODED


def test_transfer_by_hand():
    # selector, then address left-padded to 32 bytes, then amount
    calldata = bytes.fromhex("a9059cbb") + bytes(12) + bytes.fromhex("11" * 20) + (5).to_bytes(32, "big")
    dc = decode_call(_node(calldata, (1).to_bytes(32, "big")), {TRANSFER})
    assert dc.decode_status is DecodeStatus.FULL
    assert dc.args == (("to", "address", ADDR), ("amount", "uint256", 5))
    assert dc.returns == (("ok", "bool", True),)


def test_bad_dynamic_offset_is_selector_only():
    calldata = STORE_BLOB.selector + (0x1000).to_bytes(32, "big")
    assert decode_call(_node(calldata), {STORE_BLOB}).decode_status is DecodeStatus.SELECTOR_ONLY


def test_unknown_selector_is_selector_only():
    assert decode_call(_node(b"\xde\xad\xbe\xef"), {TRANSFER}).decode_status is DecodeStatus.SELECTOR_ONLY


def test_bad_return_is_args_only():
    calldata = TRANSFER.encode_call(ADDR, 5)
    assert decode_call(_node(calldata, (7).to_bytes(32, "big")), {TRANSFER}).decode_status is DecodeStatus.ARGS_ONLY
    failed = _node(calldata, None, ExitReason.REVERT)
    assert decode_call(failed, {TRANSFER}).decode_status is DecodeStatus.ARGS_ONLY


def test_trailing_garbage_is_not_full():
    calldata = TRANSFER.encode_call(ADDR, 5) + b"\x01"
    assert decode_call(_node(calldata), {TRANSFER}).decode_status is DecodeStatus.SELECTOR_ONLY


@pytest.mark.parametrize("sc", SCENARIOS, ids=lambda s: s.name)
def test_decode_is_total(sc, ground_truths):
    for node in walk(ground_truths[sc.name].tree):
        assert decode_call(node, {TRANSFER, STORE_BLOB}).decode_status in DecodeStatus


def _write_abi(tmp_path, entries):
    path = tmp_path / "abi.json"
    path.write_text(json.dumps(entries))
    return path


def test_load_abi_foo(tmp_path):
    (fn,) = load_abi(_write_abi(tmp_path, [{"type": "function", "name": "foo", "inputs": [], "outputs": []}]))
    assert fn.selector == keccak256(b"foo()")[:4]


def test_load_abi_empty_and_events_only(tmp_path):
    assert load_abi(_write_abi(tmp_path, [])) == frozenset()
    event = {"type": "event", "name": "Transfer", "inputs": [{"name": "from", "type": "address", "indexed": True}]}
    assert load_abi(_write_abi(tmp_path, [event])) == frozenset()


def test_load_abi_tuple_components(tmp_path):
    entry = {
        "type": "function",
        "name": "f",
        "inputs": [{"name": "p", "type": "tuple[]", "components": [{"type": "uint8"}, {"type": "address"}]}],
    }
    (fn,) = load_abi(_write_abi(tmp_path, [entry]))
    assert fn.signature == "f((uint8,address)[])"


def test_unknown_type_names_the_type(tmp_path):
    entry = {"type": "function", "name": "f", "inputs": [{"name": "x", "type": "uint7"}]}
    with pytest.raises(AbiError, match="uint7"):
        load_abi(_write_abi(tmp_path, [entry]))
    with pytest.raises(AbiError, match="decimal"):
        parse_type("decimal")


def test_malformed_json(tmp_path):
    path = tmp_path / "abi.json"
    path.write_text("[{")
    with pytest.raises(AbiError):
        load_abi(path)


# -- round trip and agreement with an independent codec ----------------------

STATIC = {
    "uint8": st.integers(0, 2**8 - 1),
    "uint256": st.integers(0, 2**256 - 1),
    "int16": st.integers(-(2**15), 2**15 - 1),
    "int256": st.integers(-(2**255), 2**255 - 1),
    "bool": st.booleans(),
    "address": st.binary(min_size=20, max_size=20).map(lambda b: "0x" + b.hex()),
    "bytes4": st.binary(min_size=4, max_size=4),
    "bytes32": st.binary(min_size=32, max_size=32),
}
DYNAMIC = {"bytes": st.binary(max_size=80), "string": st.text(max_size=40)}
ELEMENT = {**STATIC, **DYNAMIC}


@st.composite
def typed_values(draw):
    """A short list of (abi type, value) pairs including one level of arrays."""
    out = []
    for _ in range(draw(st.integers(1, 4))):
        base = draw(st.sampled_from(sorted(ELEMENT)))
        shape = draw(st.sampled_from(["", "[]", "[2]"]))
        if shape == "":
            out.append((base, draw(ELEMENT[base])))
        elif shape == "[]":
            out.append((base + "[]", draw(st.lists(ELEMENT[base], max_size=4))))
        else:
            out.append((base + "[2]", draw(st.lists(ELEMENT[base], min_size=2, max_size=2))))
    return out


@given(typed_values())
def test_abi_round_trip(pairs):
    types = [t for t, _ in pairs]
    values = [v for _, v in pairs]
    assert decode(types, encode(types, values)) == values


@given(typed_values())
def test_encoding_matches_eth_abi(pairs):
    types = [t for t, _ in pairs]
    values = [v for _, v in pairs]
    theirs = eth_abi.encode(types, values)
    assert encode(types, values) == theirs
    back = eth_abi.decode(types, theirs)
    for t, ours, other in zip(types, decode(types, theirs), back):
        if t.startswith("address"):
            other = other.lower() if isinstance(other, str) else [x.lower() for x in other]
        assert (list(ours) if isinstance(ours, (list, tuple)) else ours) == (list(other) if isinstance(other, (list, tuple)) else other)


def test_nested_tuple_round_trip():
    types = ["(uint8,(bytes,address[]))"]
    values = [(3, (b"xyz", [ADDR, "0x" + "22" * 20]))]
    assert decode(types, encode(types, values)) == values
    assert encode(types, values) == eth_abi.encode(types, values)
