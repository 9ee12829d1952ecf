"""Reference implementations of the hot kernels.

Semantics here are normative; ``_fast.pyx`` must agree with them exactly.
Integer arrays are ``array.array`` objects: depths ``'i'``, op classes
``'B'``, tag ids ``'I'``.
"""

from __future__ import annotations

from array import array


def depth_scan(depths: array) -> int:
    """Index of the first entry breaking depth discipline, or -1.

    The first entry must be at depth 1 and depth may rise by at most one per step.
    """
    n = len(depths)
    if n == 0:
        return -1
    if depths[0] != 1:
        return 0
    prev = depths[0]
    for i in range(1, n):
        d = depths[i]
        if d > prev + 1 or d < 1:
            return i
        prev = d
    return -1


def select_indices(classes: array, depths: array) -> list[int]:
    """Indices whose op class is non-zero or whose depth differs from the predecessor."""
    out = [i for i, c in enumerate(classes) if c]
    changed = [i for i in range(1, len(depths)) if depths[i] != depths[i - 1] and not classes[i]]
    if changed:
        out = sorted(out + changed)
    return out


def tags_fill(tags: array, start: int, n: int, tag: int) -> None:
    if n > 0:
        tags[start : start + n] = array("I", [tag]) * n


def tags_copy(dst: array, dst_off: int, src: array, src_off: int, n: int) -> None:
    if n <= 0:
        return
    chunk = src[src_off : src_off + n]
    if len(chunk) < n:
        chunk.extend(array("I", bytes(4 * (n - len(chunk)))))
    dst[dst_off : dst_off + n] = chunk


def tags_distinct(tags: array, start: int, n: int) -> list[int]:
    if n <= 0:
        return []
    seen = set(tags[start : start + n])
    seen.discard(0)
    return sorted(seen)
