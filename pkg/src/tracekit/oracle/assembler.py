"""Line-based assembler for test programs.

One instruction per line::

    ; comments start with ';', '#' or '//'
    PUSH1 0x05
    PUSH 300          ; PUSH without a width picks the smallest one
    start:            ; label definition (emits nothing)
    JUMPDEST
    PUSH2 @start      ; label reference
    DATA 0xdeadbeef   ; raw bytes
"""

from __future__ import annotations

import re

from ..opcodes import OPCODES, canonical

_COMMENT = re.compile(r"(;|#|//).*$")
_LABEL = re.compile(r"^([A-Za-z_][\w.]*):$")


class AssemblyError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _parse_int(text: str, line_no: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise AssemblyError(line_no, f"bad number {text!r}") from None


def _tokens(source: str):
    for line_no, line in enumerate(source.splitlines(), 1):
        line = _COMMENT.sub("", line).strip()
        if line:
            yield line_no, line


def assemble(source: str) -> bytes:
    items: list[tuple[int, str, str | None]] = []
    for line_no, line in _tokens(source):
        parts = line.split()
        items.append((line_no, parts[0], parts[1] if len(parts) > 1 else None))
        if len(parts) > 2:
            raise AssemblyError(line_no, f"too many operands in {line!r}")

    labels: dict[str, int] = {}
    sizes: list[int] = []
    offset = 0
    for line_no, word, operand in items:
        match = _LABEL.match(word)
        if match and operand is None:
            if match.group(1) in labels:
                raise AssemblyError(line_no, f"duplicate label {match.group(1)!r}")
            labels[match.group(1)] = offset
            sizes.append(0)
            continue
        size = _size(line_no, word, operand)
        sizes.append(size)
        offset += size

    out = bytearray()
    for (line_no, word, operand), size in zip(items, sizes):
        if size == 0:
            continue
        upper = word.upper()
        if upper == "DATA":
            out += bytes.fromhex(operand[2:] if operand.lower().startswith("0x") else operand)
            continue
        if upper.startswith("PUSH"):
            width = size - 1
            if operand.startswith("@"):
                name = operand[1:]
                if name not in labels:
                    raise AssemblyError(line_no, f"unknown label {name!r}")
                value = labels[name]
            else:
                value = _parse_int(operand, line_no)
            if value < 0 or value >= 1 << (8 * width):
                raise AssemblyError(line_no, f"value {operand} does not fit in PUSH{width}")
            out.append(0x5F + width)
            out += value.to_bytes(width, "big")
            continue
        out.append(OPCODES[canonical(upper)].code)
    return bytes(out)


def _size(line_no: int, word: str, operand: str | None) -> int:
    upper = word.upper()
    if upper == "DATA":
        if operand is None:
            raise AssemblyError(line_no, "DATA needs a hex operand")
        raw = operand[2:] if operand.lower().startswith("0x") else operand
        if len(raw) % 2:
            raise AssemblyError(line_no, "DATA needs whole bytes")
        return len(raw) // 2
    if upper == "PUSH":
        if operand is None:
            raise AssemblyError(line_no, "PUSH needs an operand")
        if operand.startswith("@"):
            return 3
        value = _parse_int(operand, line_no)
        return 1 + max(1, (value.bit_length() + 7) // 8)
    info = OPCODES.get(canonical(upper))
    if info is None:
        raise AssemblyError(line_no, f"unknown mnemonic {word!r}")
    if info.immediate:
        if operand is None:
            raise AssemblyError(line_no, f"{upper} needs an operand")
        return 1 + info.immediate
    if operand is not None:
        raise AssemblyError(line_no, f"{upper} takes no operand")
    return 1


def initcode_for(runtime: bytes) -> bytes:
    """Init code that stores ``runtime`` in memory with PUSH32/MSTORE and returns it."""
    lines = []
    for off in range(0, len(runtime), 32):
        chunk = runtime[off : off + 32].ljust(32, b"\0")
        lines += [f"PUSH32 0x{chunk.hex()}", f"PUSH2 {off}", "MSTORE"]
    lines += [f"PUSH2 {len(runtime)}", "PUSH1 0", "RETURN"]
    return assemble("\n".join(lines))
