"""Word, address and hashing helpers shared across the package."""

from __future__ import annotations

from Crypto.Hash import keccak as _keccak

WORD_MASK = (1 << 256) - 1
ADDRESS_MASK = (1 << 160) - 1
ZERO_ADDRESS = "0x" + "00" * 20


def keccak256(data: bytes) -> bytes:
    return _keccak.new(digest_bits=256, data=bytes(data)).digest()


def keccak_word(data: bytes) -> int:
    return int.from_bytes(keccak256(data), "big")


def selector_of(signature: str) -> bytes:
    """First four bytes of keccak-256 over a canonical function signature."""
    return keccak256(signature.encode())[:4]


def word_to_address(word: int) -> str:
    return "0x%040x" % (word & ADDRESS_MASK)


def address_to_int(address: str) -> int:
    return int(address, 16)


def normalize_address(address: str) -> str:
    """Lower-case, 0x-prefixed, 20-byte hex form."""
    raw = address.lower()
    if raw.startswith("0x"):
        raw = raw[2:]
    if len(raw) > 40:
        raise ValueError(f"not a 20-byte address: {address!r}")
    return "0x" + raw.rjust(40, "0")


def pad32(word: int) -> bytes:
    return (word & WORD_MASK).to_bytes(32, "big")


def hex_bytes(data: bytes) -> str:
    return "0x" + data.hex()


def parse_hex_bytes(text: str) -> bytes:
    raw = text[2:] if text[:2] in ("0x", "0X") else text
    if len(raw) % 2:
        raw = "0" + raw
    return bytes.fromhex(raw)


def min_hex(word: int) -> str:
    """Minimal 0x-prefixed hex, e.g. 0 -> 0x0."""
    return hex(word)
