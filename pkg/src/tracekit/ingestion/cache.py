"""Content-addressed, write-once JSON cache for fetched artifacts."""

from __future__ import annotations

import enum
import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

CACHE_ENV = "TRACEKIT_CACHE_DIR"
_SAFE = re.compile(r"[^0-9A-Za-z_.-]")


class CacheKind(str, enum.Enum):
    TRACE = "trace"
    RECEIPT = "receipt"
    ABI = "abi"
    STORAGE_LAYOUT = "storage_layout"


@dataclass(frozen=True, slots=True)
class CacheKey:
    kind: CacheKind
    identifier: str


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "tracekit"


class JsonCache:
    """One JSON file per key under ``<root>/<kind>/<identifier>.json``.

    Writes go to a temporary file first and are then hard-linked into place,
    so readers never observe a partial file and the first writer for a key
    wins. Existing entries are never rewritten.
    """

    def __init__(self, root: str | os.PathLike[str] | None = None) -> None:
        self.root = Path(root) if root is not None else default_cache_dir()

    def path_for(self, key: CacheKey) -> Path:
        name = _SAFE.sub("_", key.identifier.lower())
        return self.root / key.kind.value / f"{name}.json"

    def __contains__(self, key: CacheKey) -> bool:
        return self.path_for(key).is_file()

    def read_text(self, key: CacheKey) -> str | None:
        try:
            return self.path_for(key).read_text(encoding="utf-8")
        except FileNotFoundError:
            return None

    def get(self, key: CacheKey) -> Any | None:
        text = self.read_text(key)
        return None if text is None else json.loads(text)

    def put(self, key: CacheKey, value: Any) -> bool:
        """Store ``value`` unless the key exists. Returns True if this call wrote it."""
        path = self.path_for(key)
        if path.exists():
            return False
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = json.dumps(value, sort_keys=True, separators=(",", ":"))
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            try:
                os.link(tmp, path)
            except FileExistsError:
                return False
            return True
        finally:
            os.unlink(tmp)
