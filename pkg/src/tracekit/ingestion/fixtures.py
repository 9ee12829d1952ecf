"""Offline fixture files: ``{"meta": <receipt>, "trace": {"structLogs": ...}}``."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from ..errors import SchemaError
from ..trace import RawTrace, TransactionMeta, meta_from_json, meta_to_json, trace_from_json, trace_to_json


def fixture_to_json(meta: TransactionMeta, trace: RawTrace) -> dict[str, Any]:
    return {"meta": meta_to_json(meta), "trace": trace_to_json(trace)}


def fixture_from_json(obj: Any) -> tuple[TransactionMeta, RawTrace]:
    if not isinstance(obj, dict):
        raise SchemaError("fixture", "expected object")
    if "meta" not in obj:
        raise SchemaError("meta", "missing")
    if "trace" not in obj:
        raise SchemaError("trace", "missing")
    return meta_from_json(obj["meta"]), trace_from_json(obj["trace"])


def load_fixture(path: str | os.PathLike[str]) -> tuple[TransactionMeta, RawTrace]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("fixture", f"{path}: invalid JSON ({exc})") from None
    return fixture_from_json(obj)


def store_fixture(path: str | os.PathLike[str], meta: TransactionMeta, trace: RawTrace) -> None:
    Path(path).write_text(json.dumps(fixture_to_json(meta, trace), indent=1) + "\n", encoding="utf-8")
