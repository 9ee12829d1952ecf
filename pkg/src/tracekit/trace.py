"""Raw trace data model and its JSON mapping.

The JSON shapes follow what an Ethereum node returns: ``structLogs`` entries
from the transaction-replay debug tracer and receipt-shaped transaction
metadata. Parsing is strict about required fields and silent about unknown
ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .errors import SchemaError
from .primitives import hex_bytes, normalize_address, parse_hex_bytes

MAX_STACK = 1024


class TxStatus(str, enum.Enum):
    SUCCESS = "success"
    REVERTED = "reverted"


@dataclass(frozen=True, slots=True)
class StructLogEntry:
    """One executed instruction. ``stack`` is bottom-to-top; ``stack[-1]`` is the top."""

    pc: int
    op: str
    gas: int
    gas_cost: int
    depth: int
    stack: tuple[int, ...]
    memory: bytes | None = None
    error: str | None = None


@dataclass(frozen=True, slots=True)
class RawTrace:
    entries: tuple[StructLogEntry, ...]
    failed: bool = False
    return_value: bytes = b""

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True, slots=True)
class TransactionMeta:
    tx_hash: str
    block_number: int
    origin: str
    to: str | None
    value: int
    input: bytes
    gas_limit: int
    gas_used: int
    status: TxStatus
    contract_address: str | None = None
    tx_index: int = 0

    def __post_init__(self) -> None:
        if self.gas_used > self.gas_limit:
            raise ValueError(f"gas_used {self.gas_used} exceeds gas_limit {self.gas_limit}")

    @property
    def is_creation(self) -> bool:
        return self.to is None

    @property
    def target(self) -> str | None:
        """Address whose code the root frame runs."""
        return self.to if self.to is not None else self.contract_address


# -- JSON decoding -----------------------------------------------------------


def _int_field(obj: Mapping[str, Any], key: str, path: str) -> int:
    try:
        value = obj[key]
    except KeyError:
        raise SchemaError(f"{path}.{key}", "missing") from None
    if isinstance(value, bool):
        raise SchemaError(f"{path}.{key}", "expected integer")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value, 0) if value[:2].lower() == "0x" else int(value)
        except ValueError:
            raise SchemaError(f"{path}.{key}", f"not an integer: {value!r}") from None
    raise SchemaError(f"{path}.{key}", "expected integer")


def entry_from_json(raw: Mapping[str, Any], index: int = 0) -> StructLogEntry:
    path = f"structLogs[{index}]"
    try:
        pc = raw["pc"]
        op = raw["op"]
        gas = raw["gas"]
        gas_cost = raw["gasCost"]
        depth = raw["depth"]
        stack_raw = raw["stack"]
    except KeyError as exc:
        raise SchemaError(f"{path}.{exc.args[0]}", "missing") from None
    except TypeError:
        raise SchemaError(path, "entry is not an object") from None
    if not (type(pc) is int and type(gas) is int and type(gas_cost) is int and type(depth) is int):
        # slow path: accept hex strings, report the offending field otherwise
        pc = _int_field(raw, "pc", path)
        gas = _int_field(raw, "gas", path)
        gas_cost = _int_field(raw, "gasCost", path)
        depth = _int_field(raw, "depth", path)
    if not isinstance(op, str):
        raise SchemaError(f"{path}.op", "expected string")
    if depth < 1:
        raise SchemaError(f"{path}.depth", "depth must be >= 1")
    if not isinstance(stack_raw, list):
        raise SchemaError(f"{path}.stack", "expected array")
    if len(stack_raw) > MAX_STACK:
        raise SchemaError(f"{path}.stack", "stack deeper than 1024")
    try:
        stack = tuple([int(word, 16) for word in stack_raw])
    except (TypeError, ValueError):
        raise SchemaError(f"{path}.stack", "expected hex words") from None
    memory = None
    mem_raw = raw.get("memory")
    if mem_raw is not None:
        try:
            memory = b"".join(parse_hex_bytes(w).rjust(32, b"\0") for w in mem_raw)
        except (TypeError, ValueError, AttributeError):
            raise SchemaError(f"{path}.memory", "expected 32-byte hex words") from None
    error = raw.get("error")
    if error is not None and not isinstance(error, str):
        error = str(error)
    return StructLogEntry(pc, op, gas, gas_cost, depth, stack, memory, error or None)


def entry_to_json(entry: StructLogEntry) -> dict[str, Any]:
    out: dict[str, Any] = {
        "pc": entry.pc,
        "op": entry.op,
        "gas": entry.gas,
        "gasCost": entry.gas_cost,
        "depth": entry.depth,
        "stack": [hex(w) for w in entry.stack],
    }
    if entry.memory is not None:
        mem = entry.memory
        out["memory"] = [mem[i : i + 32].hex() for i in range(0, len(mem), 32)]
    if entry.error is not None:
        out["error"] = entry.error
    return out


def trace_from_json(obj: Mapping[str, Any]) -> RawTrace:
    """Parse a debug-tracer result object ``{structLogs, failed, returnValue}``."""
    if not isinstance(obj, Mapping):
        raise SchemaError("trace", "expected object")
    if "structLogs" not in obj:
        raise SchemaError("structLogs", "missing")
    logs = obj["structLogs"]
    if not isinstance(logs, list):
        raise SchemaError("structLogs", "expected array")
    entries = tuple(entry_from_json(raw, i) for i, raw in enumerate(logs))
    failed = obj.get("failed", False)
    if not isinstance(failed, bool):
        raise SchemaError("failed", "expected boolean")
    ret = obj.get("returnValue") or ""
    try:
        return_value = parse_hex_bytes(ret)
    except (TypeError, ValueError):
        raise SchemaError("returnValue", "expected hex string") from None
    return RawTrace(entries, failed, return_value)


def trace_to_json(trace: RawTrace) -> dict[str, Any]:
    return {
        "structLogs": [entry_to_json(e) for e in trace.entries],
        "failed": trace.failed,
        "returnValue": trace.return_value.hex(),
    }


def _opt_address(obj: Mapping[str, Any], key: str) -> str | None:
    value = obj.get(key)
    if value in (None, "", "0x"):
        return None
    try:
        return normalize_address(value)
    except (AttributeError, ValueError):
        raise SchemaError(key, f"not an address: {value!r}") from None


def meta_from_json(obj: Mapping[str, Any]) -> TransactionMeta:
    """Build metadata from a receipt merged with its transaction object."""
    if not isinstance(obj, Mapping):
        raise SchemaError("meta", "expected object")
    for key in ("transactionHash", "blockNumber", "from", "gasUsed", "status"):
        if key not in obj:
            raise SchemaError(key, "missing")
    status_raw = obj["status"]
    status_int = _int_field(obj, "status", "meta") if not isinstance(status_raw, int) else status_raw
    if status_int not in (0, 1):
        raise SchemaError("status", f"expected 0x0 or 0x1, got {status_raw!r}")
    origin = _opt_address(obj, "from")
    if origin is None:
        raise SchemaError("from", "missing")
    gas_used = _int_field(obj, "gasUsed", "meta")
    gas_limit = _int_field(obj, "gas", "meta") if "gas" in obj else gas_used
    try:
        data = parse_hex_bytes(obj.get("input") or "")
    except (TypeError, ValueError):
        raise SchemaError("input", "expected hex string") from None
    try:
        return TransactionMeta(
            tx_hash=str(obj["transactionHash"]).lower(),
            block_number=_int_field(obj, "blockNumber", "meta"),
            origin=origin,
            to=_opt_address(obj, "to"),
            value=_int_field(obj, "value", "meta") if "value" in obj else 0,
            input=data,
            gas_limit=gas_limit,
            gas_used=gas_used,
            status=TxStatus.SUCCESS if status_int == 1 else TxStatus.REVERTED,
            contract_address=_opt_address(obj, "contractAddress"),
            tx_index=_int_field(obj, "transactionIndex", "meta") if "transactionIndex" in obj else 0,
        )
    except ValueError as exc:
        raise SchemaError("gasUsed", str(exc)) from None


def meta_to_json(meta: TransactionMeta) -> dict[str, Any]:
    return {
        "transactionHash": meta.tx_hash,
        "blockNumber": hex(meta.block_number),
        "transactionIndex": hex(meta.tx_index),
        "from": meta.origin,
        "to": meta.to,
        "contractAddress": meta.contract_address,
        "value": hex(meta.value),
        "input": hex_bytes(meta.input),
        "gas": hex(meta.gas_limit),
        "gasUsed": hex(meta.gas_used),
        "status": "0x1" if meta.status is TxStatus.SUCCESS else "0x0",
    }


def entries_from_json(logs: Sequence[Mapping[str, Any]]) -> tuple[StructLogEntry, ...]:
    return tuple(entry_from_json(raw, i) for i, raw in enumerate(logs))
