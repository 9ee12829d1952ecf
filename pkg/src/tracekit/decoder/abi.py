"""Contract ABI types, a strict head/tail codec, and call decoding.

Values map to Python as follows: integer types to ``int``, ``address`` to a
lowercase 0x string, ``bool`` to ``bool``, ``bytesN`` and ``bytes`` to
``bytes``, ``string`` to ``str``, arrays to ``list`` and tuples to ``tuple``.

Decoding is strict: padding must be zero, integers must fit their width,
and every byte of the input must be covered by some head or tail read.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..errors import AbiError
from ..primitives import keccak256
from ..tree import ExitReason, InvocationNode

_INT_RE = re.compile(r"^(u?int)(\d*)$")
_BYTES_RE = re.compile(r"^bytes(\d+)$")
_ARRAY_RE = re.compile(r"^(.*)\[(\d*)\]$")


@dataclass(frozen=True)
class AbiType:
    """Parsed ABI type. ``kind`` is one of uint, int, address, bool,
    fixed_bytes, bytes, string, array, tuple."""

    kind: str
    size: int = 0
    item: AbiType | None = None
    length: int | None = None
    components: tuple[AbiType, ...] = ()

    @property
    def canonical(self) -> str:
        if self.kind in ("uint", "int"):
            return f"{self.kind}{self.size}"
        if self.kind == "fixed_bytes":
            return f"bytes{self.size}"
        if self.kind == "array":
            return f"{self.item.canonical}[{'' if self.length is None else self.length}]"
        if self.kind == "tuple":
            return "(" + ",".join(c.canonical for c in self.components) + ")"
        return self.kind

    @property
    def is_dynamic(self) -> bool:
        if self.kind in ("bytes", "string"):
            return True
        if self.kind == "array":
            return self.length is None or self.item.is_dynamic
        if self.kind == "tuple":
            return any(c.is_dynamic for c in self.components)
        return False

    @property
    def head_size(self) -> int:
        if self.is_dynamic:
            return 32
        if self.kind == "array":
            return self.length * self.item.head_size
        if self.kind == "tuple":
            return sum(c.head_size for c in self.components)
        return 32

    def __str__(self) -> str:
        return self.canonical


def _split_top(inner: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(inner):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(inner[start:i])
            start = i + 1
    parts.append(inner[start:])
    return parts


def parse_type(text: str) -> AbiType:
    """Parse a canonical type string; raises ``AbiError`` naming unknown types."""
    t = text.strip()
    match = _ARRAY_RE.match(t)
    if match and t.endswith("]"):
        item = parse_type(match.group(1))
        length = int(match.group(2)) if match.group(2) else None
        return AbiType("array", item=item, length=length)
    if t.startswith("(") and t.endswith(")"):
        inner = t[1:-1]
        if not inner:
            return AbiType("tuple", components=())
        return AbiType("tuple", components=tuple(parse_type(p) for p in _split_top(inner)))
    if t in ("address", "bool", "string", "bytes"):
        return AbiType(t)
    match = _INT_RE.match(t)
    if match:
        bits = int(match.group(2)) if match.group(2) else 256
        if bits % 8 or not 8 <= bits <= 256:
            raise AbiError(f"unknown abi type {text!r}")
        return AbiType(match.group(1), size=bits)
    match = _BYTES_RE.match(t)
    if match:
        n = int(match.group(1))
        if not 1 <= n <= 32:
            raise AbiError(f"unknown abi type {text!r}")
        return AbiType("fixed_bytes", size=n)
    raise AbiError(f"unknown abi type {text!r}")


# -- encoding ----------------------------------------------------------------


def _encode_static_word(t: AbiType, value: Any) -> bytes:
    k = t.kind
    if k == "uint":
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < 1 << t.size:
            raise AbiError(f"{value!r} is not a {t.canonical}")
        return value.to_bytes(32, "big")
    if k == "int":
        lim = 1 << (t.size - 1)
        if not isinstance(value, int) or isinstance(value, bool) or not -lim <= value < lim:
            raise AbiError(f"{value!r} is not a {t.canonical}")
        return (value % (1 << 256)).to_bytes(32, "big")
    if k == "address":
        if isinstance(value, str):
            raw = bytes.fromhex(value[2:] if value[:2].lower() == "0x" else value)
        elif isinstance(value, int):
            raw = value.to_bytes(20, "big")
        else:
            raw = bytes(value)
        if len(raw) != 20:
            raise AbiError(f"{value!r} is not an address")
        return raw.rjust(32, b"\0")
    if k == "bool":
        if not isinstance(value, bool):
            raise AbiError(f"{value!r} is not a bool")
        return (1 if value else 0).to_bytes(32, "big")
    if k == "fixed_bytes":
        raw = bytes(value)
        if len(raw) != t.size:
            raise AbiError(f"expected {t.size} bytes, got {len(raw)}")
        return raw.ljust(32, b"\0")
    raise AbiError(f"{t.canonical} is not a single-word type")


def _pad_tail(raw: bytes) -> bytes:
    return len(raw).to_bytes(32, "big") + raw + bytes(-len(raw) % 32)


def _encode_sequence(types: Sequence[AbiType], values: Sequence[Any]) -> bytes:
    if len(types) != len(values):
        raise AbiError(f"expected {len(types)} values, got {len(values)}")
    heads: list[bytes | None] = []
    tails: list[bytes] = []
    for t, v in zip(types, values):
        if t.is_dynamic:
            heads.append(None)
            tails.append(_encode_one(t, v))
        else:
            heads.append(_encode_one(t, v))
            tails.append(b"")
    head_len = sum(t.head_size for t in types)
    out = bytearray()
    offset = head_len
    for head, tail in zip(heads, tails):
        if head is None:
            out += offset.to_bytes(32, "big")
            offset += len(tail)
        else:
            out += head
    for tail in tails:
        out += tail
    return bytes(out)


def _encode_one(t: AbiType, value: Any) -> bytes:
    k = t.kind
    if k == "bytes":
        return _pad_tail(bytes(value))
    if k == "string":
        if not isinstance(value, str):
            raise AbiError(f"{value!r} is not a string")
        return _pad_tail(value.encode("utf-8"))
    if k == "array":
        items = list(value)
        if t.length is not None and len(items) != t.length:
            raise AbiError(f"expected {t.length} items for {t.canonical}, got {len(items)}")
        body = _encode_sequence([t.item] * len(items), items)
        return body if t.length is not None else len(items).to_bytes(32, "big") + body
    if k == "tuple":
        return _encode_sequence(t.components, list(value))
    return _encode_static_word(t, value)


def encode(types: Sequence[str | AbiType], values: Sequence[Any]) -> bytes:
    parsed = [parse_type(t) if isinstance(t, str) else t for t in types]
    return _encode_sequence(parsed, values)


# -- decoding ----------------------------------------------------------------


class _Reader:
    __slots__ = ("data", "covered")

    def __init__(self, data: bytes) -> None:
        self.data = data
        self.covered: list[tuple[int, int]] = []

    def take(self, start: int, size: int) -> bytes:
        if start < 0 or start + size > len(self.data):
            raise AbiError(f"read of {size} bytes at {start} runs past end ({len(self.data)})")
        self.covered.append((start, start + size))
        return self.data[start : start + size]

    def word(self, start: int) -> int:
        return int.from_bytes(self.take(start, 32), "big")

    def fully_covered(self) -> bool:
        end = 0
        for lo, hi in sorted(self.covered):
            if lo > end:
                return False
            end = max(end, hi)
        return end == len(self.data)


def _decode_static_word(t: AbiType, raw: bytes) -> Any:
    word = int.from_bytes(raw, "big")
    k = t.kind
    if k == "uint":
        if word >> t.size:
            raise AbiError(f"value does not fit {t.canonical}")
        return word
    if k == "int":
        value = word - (1 << 256) if word >> 255 else word
        lim = 1 << (t.size - 1)
        if not -lim <= value < lim:
            raise AbiError(f"value does not fit {t.canonical}")
        return value
    if k == "address":
        if word >> 160:
            raise AbiError("dirty address padding")
        return "0x" + raw[12:].hex()
    if k == "bool":
        if word > 1:
            raise AbiError("bool word is neither 0 nor 1")
        return word == 1
    if k == "fixed_bytes":
        if any(raw[t.size :]):
            raise AbiError(f"dirty {t.canonical} padding")
        return raw[: t.size]
    raise AbiError(f"{t.canonical} is not a single-word type")


def _decode_sequence(types: Sequence[AbiType], rd: _Reader, base: int) -> list[Any]:
    out = []
    pos = base
    for t in types:
        if t.is_dynamic:
            offset = rd.word(pos)
            if offset >= len(rd.data):
                raise AbiError(f"offset {offset} points past end")
            out.append(_decode_one(t, rd, base + offset))
            pos += 32
        else:
            out.append(_decode_one(t, rd, pos))
            pos += t.head_size
    return out


def _decode_one(t: AbiType, rd: _Reader, pos: int) -> Any:
    k = t.kind
    if k in ("bytes", "string"):
        n = rd.word(pos)
        if n > len(rd.data):
            raise AbiError(f"length {n} exceeds data")
        padded = rd.take(pos + 32, n + (-n % 32))
        if any(padded[n:]):
            raise AbiError("dirty tail padding")
        raw = padded[:n]
        if k == "bytes":
            return raw
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise AbiError("string is not valid utf-8") from None
    if k == "array":
        if t.length is None:
            n = rd.word(pos)
            if n > len(rd.data):
                raise AbiError(f"array length {n} exceeds data")
            return _decode_sequence([t.item] * n, rd, pos + 32)
        return _decode_sequence([t.item] * t.length, rd, pos)
    if k == "tuple":
        return tuple(_decode_sequence(t.components, rd, pos))
    return _decode_static_word(t, rd.take(pos, 32))


def decode(types: Sequence[str | AbiType], data: bytes, *, strict: bool = True) -> list[Any]:
    """Decode ``data`` as a tuple of ``types``.

    With ``strict`` every byte must be reached by the decoder; a trailing
    remainder or unreferenced gap raises ``AbiError``.
    """
    parsed = [parse_type(t) if isinstance(t, str) else t for t in types]
    rd = _Reader(bytes(data))
    values = _decode_sequence(parsed, rd, 0)
    if strict and not rd.fully_covered():
        raise AbiError("unconsumed bytes after decoding")
    return values


# -- functions ---------------------------------------------------------------


def _json_type(entry: dict[str, Any]) -> str:
    t = entry.get("type")
    if not isinstance(t, str):
        raise AbiError(f"parameter without a type: {entry!r}")
    if t.startswith("tuple"):
        inner = ",".join(_json_type(c) for c in entry.get("components", []))
        t = f"({inner})" + t[len("tuple"):]
    return parse_type(t).canonical


@dataclass(frozen=True)
class AbiFunction:
    name: str
    selector: bytes
    inputs: tuple[tuple[str, str], ...]
    outputs: tuple[tuple[str, str], ...] = ()

    @property
    def signature(self) -> str:
        return f"{self.name}({','.join(t for _, t in self.inputs)})"

    @classmethod
    def build(cls, name: str, inputs: Iterable[tuple[str, str] | str], outputs: Iterable[tuple[str, str] | str] = ()) -> AbiFunction:
        def norm(params):
            out = []
            for i, p in enumerate(params):
                pname, ptype = (f"arg{i}", p) if isinstance(p, str) else p
                out.append((pname, parse_type(ptype).canonical))
            return tuple(out)

        ins, outs = norm(inputs), norm(outputs)
        sig = f"{name}({','.join(t for _, t in ins)})"
        return cls(name, keccak256(sig.encode())[:4], ins, outs)

    @classmethod
    def from_json(cls, entry: dict[str, Any]) -> AbiFunction:
        def params(key):
            return [(p.get("name") or f"arg{i}", _json_type(p)) for i, p in enumerate(entry.get(key, []))]

        return cls.build(entry["name"], params("inputs"), params("outputs"))

    def encode_call(self, *args: Any) -> bytes:
        return self.selector + encode([t for _, t in self.inputs], args)


def load_abi(path: str | Path) -> frozenset[AbiFunction]:
    """Read a standard contract-ABI JSON array and keep its function entries."""
    try:
        entries = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AbiError(f"{path}: malformed JSON ({exc.msg})") from None
    if isinstance(entries, dict) and "abi" in entries:
        entries = entries["abi"]
    if not isinstance(entries, list):
        raise AbiError(f"{path}: expected a JSON array")
    return frozenset(AbiFunction.from_json(e) for e in entries if isinstance(e, dict) and e.get("type", "function") == "function")


class DecodeStatus(str, enum.Enum):
    FULL = "full"
    ARGS_ONLY = "args_only"
    SELECTOR_ONLY = "selector_only"
    UNDECODED = "undecoded"


@dataclass(frozen=True)
class DecodedCall:
    function: AbiFunction | None
    args: tuple[tuple[str, str, Any], ...] = ()
    returns: tuple[tuple[str, str, Any], ...] = ()
    decode_status: DecodeStatus = DecodeStatus.UNDECODED

    def arg(self, name: str) -> Any:
        for pname, _, value in self.args:
            if pname == name:
                return value
        raise KeyError(name)


def decode_call(node: InvocationNode, abis: Iterable[AbiFunction]) -> DecodedCall:
    """Decode a frame's calldata and return data; never raises on bad input."""
    if node.selector is None:
        return DecodedCall(None)
    fn = next((f for f in abis if f.selector == node.selector), None)
    if fn is None:
        return DecodedCall(None, decode_status=DecodeStatus.SELECTOR_ONLY)
    try:
        values = decode([t for _, t in fn.inputs], node.calldata[4:])
    except (AbiError, RecursionError):
        return DecodedCall(fn, decode_status=DecodeStatus.SELECTOR_ONLY)
    args = tuple((n, t, v) for (n, t), v in zip(fn.inputs, values))
    if node.exit_reason.failed or node.return_data is None:
        return DecodedCall(fn, args, decode_status=DecodeStatus.ARGS_ONLY)
    if node.exit_reason not in (ExitReason.RETURN, ExitReason.STOP):
        return DecodedCall(fn, args, decode_status=DecodeStatus.ARGS_ONLY)
    try:
        rvalues = decode([t for _, t in fn.outputs], node.return_data)
    except (AbiError, RecursionError):
        return DecodedCall(fn, args, decode_status=DecodeStatus.ARGS_ONLY)
    returns = tuple((n, t, v) for (n, t), v in zip(fn.outputs, rvalues))
    return DecodedCall(fn, args, returns, DecodeStatus.FULL)


__all__ = [
    "AbiFunction",
    "AbiType",
    "DecodeStatus",
    "DecodedCall",
    "decode",
    "decode_call",
    "encode",
    "load_abi",
    "parse_type",
]
