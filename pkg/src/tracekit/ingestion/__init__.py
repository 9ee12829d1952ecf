"""Trace and receipt acquisition: RPC, cache, offline fixtures."""

from .cache import CacheKey, CacheKind, JsonCache
from .fixtures import fixture_from_json, fixture_to_json, load_fixture, store_fixture
from .rpc import RpcClient, fetch_receipt, fetch_trace, tracer_config

__all__ = [
    "CacheKey",
    "CacheKind",
    "JsonCache",
    "RpcClient",
    "fetch_receipt",
    "fetch_trace",
    "fixture_from_json",
    "fixture_to_json",
    "load_fixture",
    "store_fixture",
    "tracer_config",
]
