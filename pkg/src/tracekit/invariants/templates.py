"""The template roster: 23 guard shapes in 8 categories.

Every template reduces one invocation of its target to a list of items.
What the items mean depends on the template's kind:

* ``upper`` / ``lower`` / ``range``: numbers to bound;
* ``keyed_upper`` / ``keyed_lower``: ``(key, number)`` pairs bounded per key;
* ``set``: members of an allowlist;
* ``lock``: witnesses of a violation (an empty list means the invocation is fine);
* ``pinned``: ``(caller, origin)`` pairs that must all equal one address.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from ..dataflow.sources import CalldataRange
from ..decoder.abi import DecodedCall
from ..tree import CallKind, InvocationNode, StorageKind
from .artifacts import History, Target, TxArtifacts


class Category(str, enum.Enum):
    ACCESS_CONTROL = "access_control"
    TIME_LOCK = "time_lock"
    GAS_CONTROL = "gas_control"
    ORACLE_SLIPPAGE = "oracle_slippage"
    REENTRANCY = "reentrancy"
    MONEY_FLOW = "money_flow"
    SPECIAL_STORAGE = "special_storage"
    DATA_FLOW = "data_flow"


class Tier(str, enum.Enum):
    TREE_ONLY = "tree_only"
    STORAGE = "storage"
    DATAFLOW = "dataflow"


TIER_OF = {c: Tier.TREE_ONLY for c in Category}
TIER_OF[Category.SPECIAL_STORAGE] = Tier.STORAGE
TIER_OF[Category.DATA_FLOW] = Tier.DATAFLOW

MAX_SET_SIZE = 64


@dataclass(frozen=True)
class Invocation:
    """One executed frame of the target, with what templates may consult."""

    artifacts: TxArtifacts
    frame_id: int
    node: InvocationNode
    ancestors: tuple[InvocationNode, ...]
    history: History | None
    frame_nodes: tuple[InvocationNode, ...] = field(repr=False, default=())

    @property
    def target(self) -> Target:
        return Target.of(self.node)

    def subtree(self) -> list[tuple[int, InvocationNode, bool]]:
        """``(frame_id, node, effective)`` for the frame and its descendants.

        ``effective`` is False when the node or any ancestor failed, i.e. its
        effects were rolled back.
        """
        base_ok = not any(a.exit_reason.failed for a in self.ancestors)
        out = []
        stack = [(self.node, base_ok)]
        # frame ids are pre-order positions, so they follow from the start id
        next_id = self.frame_id
        while stack:
            node, ok = stack.pop()
            ok = ok and not node.exit_reason.failed
            out.append((next_id, node, ok))
            next_id += 1
            stack.extend((child, ok) for child in reversed(node.children))
        return out


Extractor = Callable[[Invocation], list]


@dataclass(frozen=True)
class InvariantTemplate:
    id: str
    category: Category
    kind: str
    parameter_shape: str
    description: str
    extract: Extractor = field(compare=False, repr=False)

    @property
    def tier(self) -> Tier:
        return TIER_OF[self.category]

    @property
    def is_bound(self) -> bool:
        return self.kind in ("upper", "lower", "keyed_upper", "keyed_lower")


# -- extractors --------------------------------------------------------------


def _eoa_sender(inv: Invocation) -> list:
    return [inv.node.caller] if inv.node.caller != inv.artifacts.meta.origin else []


def _same_block(inv: Invocation) -> list:
    if inv.history is None:
        return []
    meta = inv.artifacts.meta
    earlier = inv.history.same_block(inv.target, meta.block_number, meta.tx_hash)
    return [meta.block_number] if earlier else []


def _block_delay(inv: Invocation) -> list:
    if inv.history is None:
        return []
    meta = inv.artifacts.meta
    prev = inv.history.previous(inv.target, meta.tx_hash)
    return [meta.block_number - prev.block_number] if prev is not None else []


def _gas_consumed(inv: Invocation) -> list:
    node = inv.node
    entries = inv.artifacts.trace.entries
    if not node.executed or node.exit_index < 0 or node.exit_index >= len(entries):
        return [0]
    last = entries[node.exit_index]
    return [max(0, node.gas_at_entry - last.gas + last.gas_cost)]


def _uint_args(call: DecodedCall) -> list[tuple[str, int]]:
    return [(n.lower(), v) for n, t, v in call.args if t.startswith("uint")]


def _swaps(inv: Invocation) -> list[tuple[int, int]]:
    """``(amount_in, amount_out)`` of every decoded swap-shaped call in the subtree.

    A call is swap-shaped when its function name contains "swap" and it has at
    least two unsigned amounts. Parameters named with "in"/"out" are preferred;
    otherwise the first two amounts are taken in order.
    """
    out = []
    for fid, node, ok in inv.subtree():
        if not ok or not node.executed:
            continue
        call = inv.artifacts.decoded.get(fid)
        if call is None or call.function is None or not call.args or "swap" not in call.function.name.lower():
            continue
        amounts = _uint_args(call)
        if len(amounts) < 2:
            continue
        amount_in = next((v for n, v in amounts if "in" in n and "out" not in n), amounts[0][1])
        amount_out = next((v for n, v in amounts if "out" in n), amounts[1][1])
        out.append((amount_in, amount_out))
    return out


def _price_ratio(inv: Invocation) -> list:
    return [Fraction(out, amt_in) for amt_in, out in _swaps(inv) if amt_in > 0]


def _swap_size(inv: Invocation) -> list:
    return [amt_in for amt_in, _ in _swaps(inv)]


def _self_reentry(inv: Invocation) -> list:
    me = inv.target
    return [str(me)] if any(a.executed and Target.of(a) == me for a in inv.ancestors) else []


def _cross_reentry(inv: Invocation) -> list:
    me = inv.target
    return [
        Target.of(a).selector or "-"
        for a in inv.ancestors
        if a.executed and a.code_address == me.address and Target.of(a).selector != me.selector
    ][:1]


def _token_moves(inv: Invocation) -> list[tuple[str, str, int]]:
    """``(sender, recipient, amount)`` for effective ERC20 transfers in the subtree."""
    moves = []
    for fid, node, ok in inv.subtree():
        if not ok or not node.executed or node.call_kind is not CallKind.CALL:
            continue
        call = inv.artifacts.decoded_call(fid, node)
        fn = call.function
        if fn is None or not call.args:
            continue
        try:
            if fn.signature == "transfer(address,uint256)":
                moves.append((node.caller, call.args[0][2], call.args[1][2]))
            elif fn.signature == "transferFrom(address,address,uint256)":
                moves.append((call.args[0][2], call.args[1][2], call.args[2][2]))
        except IndexError:
            continue
    return moves


def _transfer_in(inv: Invocation) -> list:
    me = inv.node.storage_address
    return [sum(amount for _s, to, amount in _token_moves(inv) if to == me)]


def _transfer_out(inv: Invocation) -> list:
    me = inv.node.storage_address
    return [sum(amount for sender, _t, amount in _token_moves(inv) if sender == me)]


def _ether_in(inv: Invocation) -> list:
    node = inv.node
    return [0 if node.call_kind is CallKind.DELEGATECALL else node.value]


def _ether_out(inv: Invocation) -> list:
    me = inv.node.storage_address
    total = 0
    for _fid, node, ok in inv.subtree()[1:]:
        if ok and node.caller == me and node.call_kind in (CallKind.CALL, CallKind.CREATE, CallKind.CREATE2):
            total += node.value
    return [total]


def _stores(inv: Invocation) -> list[tuple[str, int, Any]]:
    me = inv.node.storage_address
    out = []
    for _fid, node, ok in inv.subtree():
        if not ok or node.storage_address != me:
            continue
        for ev in node.storage_events:
            if ev.kind is StorageKind.STORE and not ev.rolled_back and ev.decoded is not None:
                out.append((ev.decoded.render(), ev.value, ev.decoded))
    return out


def _slot_values(inv: Invocation) -> list:
    return [(key, value) for key, value, _ in _stores(inv)]


def _owner_writes(inv: Invocation) -> list:
    hits = []
    for key, value, path in _stores(inv):
        name = path.variable_name
        if name is not None:
            owner = "owner" in name.lower() and not path.steps
        else:
            # without a layout, slot 0 is where single-owner contracts usually keep it
            owner = path.base_slot == 0 and not path.steps
        if owner:
            hits.append({"slot": key, "value": value})
    return hits


def _root_calldata_facts(inv: Invocation):
    node = inv.node
    frames = inv.frame_nodes
    entries = inv.artifacts.trace.entries
    for fact in inv.artifacts.facts or ():
        src = fact.source
        if not (isinstance(src, CalldataRange) and src.frame == 0):
            continue
        idx = fact.sink.instruction_index
        if not node.entry_index <= idx <= node.exit_index:
            continue
        where = frames[fact.frame].code_address if fact.frame < len(frames) else "?"
        yield fact, f"{where}:{entries[idx].pc}:{fact.sink.opcode}:{fact.sink.role}"


def _tainted_sinks(inv: Invocation) -> list:
    return [(site, fact.value_at_sink) for fact, site in _root_calldata_facts(inv)]


def _delegate_target(inv: Invocation) -> list:
    return [
        {"site": site, "target": hex(fact.value_at_sink)}
        for fact, site in _root_calldata_facts(inv)
        if fact.sink.opcode in ("DELEGATECALL", "CALLCODE") and fact.sink.role == "target_address"
    ]


def _call_value(inv: Invocation) -> list:
    return [
        fact.value_at_sink
        for fact, _site in _root_calldata_facts(inv)
        if fact.sink.opcode in ("CALL", "CALLCODE") and fact.sink.role == "value"
    ]


def _pairs(inv: Invocation) -> list:
    return [(inv.node.caller, inv.artifacts.meta.origin)]


_T = InvariantTemplate
C = Category

CATALOG: tuple[InvariantTemplate, ...] = (
    _T("EOASenderOnly", C.ACCESS_CONTROL, "lock", "none",
       "the caller is always the transaction origin", _eoa_sender),
    _T("AllowedSenderSet", C.ACCESS_CONTROL, "set", "a set of addresses",
       "the caller belongs to a fixed allowlist", lambda inv: [inv.node.caller]),
    _T("AllowedOriginSet", C.ACCESS_CONTROL, "set", "a set of addresses",
       "the transaction origin belongs to a fixed allowlist", lambda inv: [inv.artifacts.meta.origin]),
    _T("OriginEqualsSender", C.ACCESS_CONTROL, "pinned", "one address",
       "caller and origin are both one fixed address", _pairs),
    _T("SameBlockReentryLock", C.TIME_LOCK, "lock", "none",
       "no two transactions in one block invoke the target", _same_block),
    _T("BlockDelayLowerBound", C.TIME_LOCK, "lower", "one unsigned lower bound (blocks)",
       "blocks since the previous invoking transaction stay above a bound", _block_delay),
    _T("GasStartUpperBound", C.GAS_CONTROL, "upper", "one unsigned upper bound",
       "gas available on entry stays below a bound", lambda inv: [inv.node.gas_at_entry]),
    _T("GasConsumedUpperBound", C.GAS_CONTROL, "upper", "one unsigned upper bound",
       "gas consumed by the frame stays below a bound", _gas_consumed),
    _T("PriceRatioRange", C.ORACLE_SLIPPAGE, "range", "a closed rational interval",
       "swap output/input ratio stays within a range", _price_ratio),
    _T("SwapSlippageBound", C.ORACLE_SLIPPAGE, "upper", "one unsigned upper bound",
       "swap input amount stays below a bound", _swap_size),
    _T("SelfReentrancyLock", C.REENTRANCY, "lock", "none",
       "the same function is never re-entered on one call path", _self_reentry),
    _T("CrossContractReentrancyLock", C.REENTRANCY, "lock", "none",
       "the contract is never re-entered through another function", _cross_reentry),
    _T("TransferInUpperBound", C.MONEY_FLOW, "upper", "one unsigned upper bound",
       "token amount received per invocation stays below a bound", _transfer_in),
    _T("TransferOutUpperBound", C.MONEY_FLOW, "upper", "one unsigned upper bound",
       "token amount sent per invocation stays below a bound", _transfer_out),
    _T("EtherInUpperBound", C.MONEY_FLOW, "upper", "one unsigned upper bound",
       "ether received per invocation stays below a bound", _ether_in),
    _T("EtherOutUpperBound", C.MONEY_FLOW, "upper", "one unsigned upper bound",
       "ether sent per invocation stays below a bound", _ether_out),
    _T("MonitoredSlotUpperBound", C.SPECIAL_STORAGE, "keyed_upper", "an upper bound per storage path",
       "values written to each decoded storage path stay below a bound", _slot_values),
    _T("MonitoredSlotLowerBound", C.SPECIAL_STORAGE, "keyed_lower", "a lower bound per storage path",
       "values written to each decoded storage path stay above a bound", _slot_values),
    _T("OwnerSlotUnchanged", C.SPECIAL_STORAGE, "lock", "none",
       "the owner variable is never written", _owner_writes),
    _T("TaintedSinkUpperBound", C.DATA_FLOW, "keyed_upper", "an upper bound per sink site",
       "calldata-derived values reaching each sink stay below a bound", _tainted_sinks),
    _T("TaintedSinkLowerBound", C.DATA_FLOW, "keyed_lower", "a lower bound per sink site",
       "calldata-derived values reaching each sink stay above a bound", _tainted_sinks),
    _T("CalldataToDelegateTargetForbidden", C.DATA_FLOW, "lock", "none",
       "calldata never chooses a delegatecall target", _delegate_target),
    _T("CalldataToCallValueBound", C.DATA_FLOW, "upper", "one unsigned upper bound",
       "calldata-derived ether amounts in calls stay below a bound", _call_value),
)

_BY_ID = {t.id: t for t in CATALOG}


def template_catalog() -> tuple[InvariantTemplate, ...]:
    return CATALOG


def get_template(template_id: str) -> InvariantTemplate:
    try:
        return _BY_ID[template_id]
    except KeyError:
        raise KeyError(f"unknown template {template_id!r}") from None


__all__ = [
    "CATALOG",
    "Category",
    "InvariantTemplate",
    "Invocation",
    "MAX_SET_SIZE",
    "Tier",
    "get_template",
    "template_catalog",
]
