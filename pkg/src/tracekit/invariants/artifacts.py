"""Per-transaction inputs to invariant templates, and cross-transaction history."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from ..dataflow.engine import FlowFact
from ..decoder.abi import AbiFunction, DecodedCall, DecodeStatus, decode_call
from ..primitives import normalize_address
from ..trace import RawTrace, TransactionMeta
from ..tree import InvocationNode, walk_with_parents

# Money-flow observations recognise these even without a supplied token ABI.
ERC20_FUNCTIONS = frozenset(
    {
        AbiFunction.build("transfer", [("to", "address"), ("amount", "uint256")], [("", "bool")]),
        AbiFunction.build(
            "transferFrom", [("from", "address"), ("to", "address"), ("amount", "uint256")], [("", "bool")]
        ),
    }
)


@dataclass(frozen=True)
class Target:
    address: str
    selector: str | None

    @classmethod
    def of(cls, node: InvocationNode) -> Target:
        return cls(node.code_address, "0x" + node.selector.hex() if node.selector is not None else None)

    def to_json(self) -> dict:
        return {"address": self.address, "selector": self.selector}

    @classmethod
    def from_json(cls, obj: dict) -> Target:
        sel = obj.get("selector")
        return cls(normalize_address(obj["address"]), sel.lower() if sel else None)

    def __str__(self) -> str:
        return f"{self.address}:{self.selector or '-'}"


@dataclass
class TxArtifacts:
    """Everything templates may look at for one transaction.

    ``decoded`` maps frame ids to decoded calls. ``storage_decoded`` says
    whether ``tree`` carries decoded storage paths; ``facts`` is None when
    shadow execution was not run.
    """

    meta: TransactionMeta
    trace: RawTrace
    tree: InvocationNode
    decoded: dict[int, DecodedCall] = field(default_factory=dict)
    storage_decoded: bool = False
    facts: list[FlowFact] | None = None

    @property
    def tx_hash(self) -> str:
        return self.meta.tx_hash

    def frames(self) -> Iterator[tuple[int, InvocationNode, tuple[InvocationNode, ...]]]:
        for fid, node, _parent, ancestors in walk_with_parents(self.tree):
            yield fid, node, ancestors

    def decoded_call(self, frame_id: int, node: InvocationNode) -> DecodedCall:
        """The frame's decoded call, falling back to the standard token ABI."""
        call = self.decoded.get(frame_id)
        if call is not None and call.decode_status in (DecodeStatus.FULL, DecodeStatus.ARGS_ONLY):
            return call
        fallback = decode_call(node, ERC20_FUNCTIONS)
        if fallback.decode_status in (DecodeStatus.FULL, DecodeStatus.ARGS_ONLY):
            return fallback
        return call if call is not None else fallback


@dataclass(frozen=True)
class _Seen:
    block_number: int
    tx_index: int
    tx_hash: str


class History:
    """Which earlier transactions invoked each target; feeds time-lock templates."""

    def __init__(self) -> None:
        self._seen: dict[Target, list[_Seen]] = {}

    def previous(self, target: Target, tx_hash: str) -> _Seen | None:
        """Latest earlier transaction (not ``tx_hash`` itself) that invoked ``target``."""
        for seen in reversed(self._seen.get(target, ())):
            if seen.tx_hash != tx_hash:
                return seen
        return None

    def same_block(self, target: Target, block_number: int, tx_hash: str) -> list[str]:
        return [
            s.tx_hash
            for s in self._seen.get(target, ())
            if s.block_number == block_number and s.tx_hash != tx_hash
        ]

    def record(self, artifacts: TxArtifacts) -> None:
        meta = artifacts.meta
        targets = {Target.of(node) for _fid, node, _anc in artifacts.frames() if node.executed}
        for target in targets:
            entries = self._seen.setdefault(target, [])
            if not entries or entries[-1].tx_hash != meta.tx_hash:
                entries.append(_Seen(meta.block_number, meta.tx_index, meta.tx_hash))


__all__ = ["ERC20_FUNCTIONS", "History", "Target", "TxArtifacts"]
