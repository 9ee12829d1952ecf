"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it was built and ``TRACEKIT_PURE`` is
unset; otherwise the reference implementations in ``_pure`` are used.
``BACKEND`` names the active one.
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("TRACEKIT_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

depth_scan = _impl.depth_scan
select_indices = _impl.select_indices
tags_fill = _impl.tags_fill
tags_copy = _impl.tags_copy
tags_distinct = _impl.tags_distinct

__all__ = ["BACKEND", "depth_scan", "select_indices", "tags_copy", "tags_distinct", "tags_fill"]
