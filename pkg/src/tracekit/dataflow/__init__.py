"""Taint tracking by shadow execution over recorded traces."""

from .engine import FlowFact, FrameShadow, ShadowBuffer, ShadowState, Sink, shadow_execute
from .query import SinkPattern, fact_to_json, parse_sink_filter, query_flows, write_jsonl
from .sources import (
    UNKNOWN,
    CalldataRange,
    CallReturn,
    EnvOpcode,
    StorageSlot,
    TagLattice,
    TaintSource,
    Unknown,
    parse_source,
)

__all__ = [
    "CallReturn",
    "CalldataRange",
    "EnvOpcode",
    "FlowFact",
    "FrameShadow",
    "ShadowBuffer",
    "ShadowState",
    "Sink",
    "SinkPattern",
    "StorageSlot",
    "TagLattice",
    "TaintSource",
    "UNKNOWN",
    "Unknown",
    "fact_to_json",
    "parse_sink_filter",
    "parse_source",
    "query_flows",
    "shadow_execute",
    "write_jsonl",
]
