"""JSON-RPC transport and the two fetch operations."""

from __future__ import annotations

import itertools
import logging
import os
import time
from typing import Any, Callable

import requests

from ..errors import ConfigurationError, NotFoundError, SchemaError, TraceError, TransportError
from ..trace import RawTrace, TransactionMeta, meta_from_json, trace_from_json
from .cache import CacheKey, CacheKind, JsonCache

log = logging.getLogger(__name__)

ENDPOINT_ENV = "TRACEKIT_RPC_URL"
TOKEN_ENV = "TRACEKIT_RPC_TOKEN"

TRACE_METHOD = "debug_traceTransaction"
RECEIPT_METHOD = "eth_getTransactionReceipt"
TX_METHOD = "eth_getTransactionByHash"


def tracer_config(memory: bool = False) -> dict[str, Any]:
    # storage maps are never requested: storage accesses are rebuilt from SLOAD/SSTORE
    return {
        "disableStack": False,
        "disableStorage": True,
        "enableMemory": memory,
        "enableReturnData": True,
        "timeout": "120s",
    }


class RpcClient:
    def __init__(
        self,
        endpoint: str | None = None,
        *,
        token: str | None = None,
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 1.0,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ConfigurationError(f"no RPC endpoint configured (pass one or set {ENDPOINT_ENV})")
        self.endpoint = endpoint
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()
        self._sleep = sleep
        self._ids = itertools.count(1)

    def call(self, method: str, params: list[Any]) -> Any:
        body = {"jsonrpc": "2.0", "id": next(self._ids), "method": method, "params": params}
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        delay = self.backoff
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise TransportError(f"{method}: HTTP {resp.status_code}")
                resp.raise_for_status()
                payload = resp.json()
                break
            except (requests.ConnectionError, requests.Timeout, TransportError) as exc:
                if attempt == self.retries:
                    raise TransportError(f"{method} failed after {attempt + 1} attempts: {exc}") from exc
                log.warning("%s attempt %d failed (%s); retrying in %.1fs", method, attempt + 1, exc, delay)
                self._sleep(delay)
                delay *= 2
            except requests.HTTPError as exc:
                raise TransportError(f"{method}: {exc}") from exc
            except ValueError as exc:
                raise SchemaError("response", f"not JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise SchemaError("response", "expected a JSON-RPC object")
        if payload.get("error"):
            err = payload["error"]
            message = err.get("message", str(err)) if isinstance(err, dict) else str(err)
            if "not found" in message.lower():
                raise NotFoundError(f"{method}: {message}")
            raise TraceError(f"{method}: {message}")
        if "result" not in payload:
            raise SchemaError("result", "missing")
        return payload["result"]


def _client(endpoint: str | None, client: RpcClient | None) -> RpcClient:
    return client if client is not None else RpcClient(endpoint)


def fetch_trace(
    tx_hash: str,
    endpoint: str | None = None,
    *,
    cache: JsonCache | None = None,
    memory: bool = False,
    client: RpcClient | None = None,
) -> RawTrace:
    key = CacheKey(CacheKind.TRACE, tx_hash)
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            return trace_from_json(cached)
    result = _client(endpoint, client).call(TRACE_METHOD, [tx_hash, tracer_config(memory)])
    if result is None:
        raise NotFoundError(f"unknown transaction {tx_hash}")
    trace = trace_from_json(result)
    if cache is not None:
        cache.put(key, result)
    return trace


_TX_FIELDS = ("value", "input", "gas", "transactionIndex")


def fetch_receipt(
    tx_hash: str,
    endpoint: str | None = None,
    *,
    cache: JsonCache | None = None,
    client: RpcClient | None = None,
) -> TransactionMeta:
    """Receipt merged with value/input/gas from the transaction object."""
    key = CacheKey(CacheKind.RECEIPT, tx_hash)
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            return meta_from_json(cached)
    rpc = _client(endpoint, client)
    receipt = rpc.call(RECEIPT_METHOD, [tx_hash])
    if receipt is None:
        raise NotFoundError(f"unknown transaction {tx_hash}")
    if not isinstance(receipt, dict):
        raise SchemaError("receipt", "expected object")
    merged = dict(receipt)
    if any(field not in merged for field in _TX_FIELDS):
        tx = rpc.call(TX_METHOD, [tx_hash])
        if tx is None:
            raise NotFoundError(f"unknown transaction {tx_hash}")
        for field in _TX_FIELDS:
            if field in tx and field not in merged:
                merged[field] = tx[field]
    meta = meta_from_json(merged)
    if cache is not None:
        cache.put(key, merged)
    return meta
