# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pure.py`` for the reference semantics."""


def depth_scan(int[::1] depths):
    cdef Py_ssize_t i, n = depths.shape[0]
    cdef int prev, d
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


def select_indices(const unsigned char[::1] classes, int[::1] depths):
    cdef Py_ssize_t i, n = classes.shape[0]
    out = []
    if n == 0:
        return out
    if classes[0]:
        out.append(0)
    for i in range(1, n):
        if classes[i] or depths[i] != depths[i - 1]:
            out.append(i)
    return out


def tags_fill(unsigned int[::1] tags, Py_ssize_t start, Py_ssize_t n, unsigned int tag):
    cdef Py_ssize_t i
    for i in range(start, start + n):
        tags[i] = tag


def tags_copy(unsigned int[::1] dst, Py_ssize_t dst_off, unsigned int[::1] src, Py_ssize_t src_off, Py_ssize_t n):
    cdef Py_ssize_t i, j, m = src.shape[0]
    if n <= 0:
        return
    if m > 0 and src_off < dst_off and &src[0] == &dst[0]:
        # overlapping move within one buffer: walk backwards
        for i in range(n - 1, -1, -1):
            j = src_off + i
            dst[dst_off + i] = src[j] if j < m else 0
    else:
        for i in range(n):
            j = src_off + i
            dst[dst_off + i] = src[j] if j < m else 0


def tags_distinct(unsigned int[::1] tags, Py_ssize_t start, Py_ssize_t n):
    cdef Py_ssize_t i
    cdef unsigned int t, last = 0
    if n <= 0:
        return []
    seen = set()
    for i in range(start, start + n):
        t = tags[i]
        if t != 0 and t != last:
            seen.add(t)
            last = t
    return sorted(seen)
