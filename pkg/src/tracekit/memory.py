"""Concrete memory reconstruction from stack-only traces.

Traces fetched without memory capture still carry every stack operand, so
memory contents can be replayed from the writing instructions. Bytes whose
origin is not visible in the trace (e.g. CODECOPY) are tracked as unknown,
and any read overlapping them yields None.
"""

from __future__ import annotations

# Offsets past this are treated as unknowable rather than allocated.
MAX_TRACKED = 1 << 26


class FrameMemory:
    __slots__ = ("data", "unknown")

    def __init__(self) -> None:
        self.data = bytearray()
        self.unknown: list[tuple[int, int]] = []

    def reset(self, content: bytes) -> None:
        self.data = bytearray(content)
        self.unknown = []

    def _ensure(self, end: int) -> None:
        if end > len(self.data):
            self.data.extend(bytes(end - len(self.data)))

    def _mark(self, start: int, end: int, unknown: bool) -> None:
        kept = []
        for a, b in self.unknown:
            if b <= start or a >= end:
                kept.append((a, b))
                continue
            if a < start:
                kept.append((a, start))
            if b > end:
                kept.append((end, b))
        if unknown:
            kept.append((start, end))
            kept.sort()
        self.unknown = kept

    def write(self, offset: int, data: bytes | None, size: int | None = None) -> None:
        """Write ``data`` at ``offset``; ``data=None`` marks ``size`` bytes unknown."""
        n = len(data) if data is not None else (size or 0)
        if n == 0:
            return
        end = offset + n
        if end > MAX_TRACKED:
            self.unknown.append((min(offset, MAX_TRACKED), end))
            return
        self._ensure(end)
        if data is None:
            self._mark(offset, end, True)
        else:
            self.data[offset:end] = data
            if self.unknown:
                self._mark(offset, end, False)

    def write_unknown(self, offset: int, size: int) -> None:
        self.write(offset, None, size)

    def read(self, offset: int, size: int) -> bytes | None:
        if size == 0:
            return b""
        end = offset + size
        for a, b in self.unknown:
            if a < end and b > offset:
                return None
        if end > MAX_TRACKED:
            return None
        chunk = bytes(self.data[offset:end])
        if len(chunk) < size:
            chunk += bytes(size - len(chunk))
        return chunk


def slice_padded(data: bytes | None, offset: int, size: int) -> bytes | None:
    """``data[offset:offset+size]`` zero-extended, as CALLDATACOPY reads calldata."""
    if data is None:
        return None
    if size == 0:
        return b""
    chunk = data[offset : offset + size] if offset < len(data) else b""
    if len(chunk) < size:
        chunk += bytes(size - len(chunk))
    return chunk
