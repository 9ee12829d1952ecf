"""End-to-end plumbing shared by the command-line front end.

Resolves transaction references (fixture paths or hashes), loads per-contract
ABIs and storage layouts from a config directory, and builds the artifacts
the invariant templates consume.
"""

from __future__ import annotations

import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import repeat
from pathlib import Path
from typing import Iterable, Sequence

from .dataflow import CalldataRange, shadow_execute
from .decoder import AbiFunction, StorageLayout, decode_call, decode_tree_storage, load_abi, load_storage_layout
from .errors import NotFoundError, TraceError, UsageError
from .ingestion import JsonCache, fetch_receipt, fetch_trace, load_fixture
from .invariants import CATALOG, InvariantTemplate, Tier, TxArtifacts, get_template
from .parser import build_invocation_tree
from .primitives import normalize_address
from .trace import RawTrace, TransactionMeta
from .tree import walk_with_parents

log = logging.getLogger(__name__)

_HASH = re.compile(r"^0x[0-9a-fA-F]{64}$")


@dataclass(frozen=True)
class RunConfig:
    endpoint: str | None = None
    cache_dir: Path | None = None
    config_dir: Path | None = None
    train_fraction: float = 0.7
    memory: bool = False
    templates: frozenset[str] | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        frac = Fraction(repr(self.train_fraction))
        if not 0 < frac < 1:
            raise UsageError(f"train fraction must lie strictly between 0 and 1, got {self.train_fraction}")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        for tid in self.templates or ():
            try:
                get_template(tid)
            except KeyError:
                raise UsageError(f"unknown template {tid!r}") from None

    def selected_templates(self) -> list[InvariantTemplate]:
        if self.templates is None:
            return list(CATALOG)
        return [t for t in CATALOG if t.id in self.templates]


def read_tx_list(path: str | Path) -> list[str]:
    """One hash or fixture path per line; ``#`` starts a comment.

    Relative fixture paths are taken relative to the list file.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise NotFoundError(f"no such transaction list: {path}") from None
    refs = []
    for line in text.splitlines():
        ref = line.split("#", 1)[0].strip()
        if not ref:
            continue
        if not _HASH.match(ref) and not Path(ref).is_absolute():
            ref = str(path.parent / ref)
        refs.append(ref)
    return refs


def load_tx(ref: str, config: RunConfig) -> tuple[TransactionMeta, RawTrace]:
    """Fixture path or transaction hash to (receipt, trace)."""
    if _HASH.match(ref) and not Path(ref).exists():
        cache = JsonCache(config.cache_dir)
        meta = fetch_receipt(ref, config.endpoint, cache=cache)
        trace = fetch_trace(ref, config.endpoint, cache=cache, memory=config.memory)
        return meta, trace
    if not Path(ref).is_file():
        raise NotFoundError(f"no such fixture: {ref}")
    return load_fixture(ref)


class ContractConfig:
    """ABIs and storage layouts under ``<dir>/abi/<address>.json`` and ``<dir>/layout/<address>.json``."""

    def __init__(self, root: Path | None) -> None:
        self.root = root
        self._abis: dict[str, frozenset[AbiFunction] | None] = {}
        self._layouts: dict[str, StorageLayout | None] = {}

    def _file(self, kind: str, address: str) -> Path | None:
        if self.root is None:
            return None
        path = self.root / kind / f"{address}.json"
        return path if path.is_file() else None

    def abi(self, address: str) -> frozenset[AbiFunction] | None:
        if address not in self._abis:
            path = self._file("abi", address)
            self._abis[address] = load_abi(path) if path else None
        return self._abis[address]

    def layout(self, address: str) -> StorageLayout | None:
        if address not in self._layouts:
            path = self._file("layout", address)
            self._layouts[address] = load_storage_layout(path) if path else None
        return self._layouts[address]


def build_artifacts(
    meta: TransactionMeta,
    trace: RawTrace,
    contracts: ContractConfig,
    *,
    storage: bool = True,
    dataflow: bool = True,
) -> TxArtifacts:
    tree = build_invocation_tree(meta, trace)
    decoded = {}
    for fid, node, _parent, _anc in walk_with_parents(tree):
        abis = contracts.abi(node.code_address)
        if abis:
            decoded[fid] = decode_call(node, abis)
    if storage:
        addresses = {node.storage_address for _fid, node, _p, _a in walk_with_parents(tree)}
        layouts = {a: lay for a in addresses if (lay := contracts.layout(a)) is not None}
        tree = decode_tree_storage(tree, layouts)
    facts = None
    if dataflow:
        _state, facts = shadow_execute(meta, trace, tree, [CalldataRange(0, 0, len(meta.input))])
    return TxArtifacts(meta, trace, tree, decoded, storage, facts)


def _tiers(templates: Iterable[InvariantTemplate]) -> tuple[bool, bool]:
    tiers = {t.tier for t in templates}
    return Tier.STORAGE in tiers, Tier.DATAFLOW in tiers


def _load_one(ref: str, config: RunConfig, storage: bool, dataflow: bool) -> TxArtifacts:
    meta, trace = load_tx(ref, config)
    return build_artifacts(meta, trace, ContractConfig(config.config_dir), storage=storage, dataflow=dataflow)


def _safe_load(ref: str, config: RunConfig, storage: bool, dataflow: bool) -> TxArtifacts | str:
    try:
        return _load_one(ref, config, storage, dataflow)
    except (TraceError, OSError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"


@dataclass
class Corpus:
    artifacts: list[TxArtifacts]
    failures: list[tuple[str, str]]

    @property
    def failure_rate(self) -> float:
        total = len(self.artifacts) + len(self.failures)
        return len(self.failures) / total if total else 0.0


def load_corpus(refs: Sequence[str], config: RunConfig, templates: Iterable[InvariantTemplate]) -> Corpus:
    """Load and analyze every transaction, skipping failures.

    Results come back in chronological order (block number, then position in
    the block); ties keep list order.
    """
    storage, dataflow = _tiers(templates)
    if config.jobs > 1 and len(refs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(refs))) as pool:
            results = list(pool.map(_safe_load, refs, repeat(config), repeat(storage), repeat(dataflow)))
    else:
        results = [_safe_load(ref, config, storage, dataflow) for ref in refs]
    loaded, failures = [], []
    for ref, res in zip(refs, results):
        if isinstance(res, str):
            log.error("skipping %s: %s", ref, res)
            failures.append((ref, res))
        else:
            loaded.append(res)
    loaded.sort(key=lambda a: (a.meta.block_number, a.meta.tx_index))
    return Corpus(loaded, failures)


def default_jobs() -> int:
    return os.cpu_count() or 1


def contract_address(text: str) -> str:
    try:
        address = normalize_address(text)
        int(address, 16)
        return address
    except ValueError as exc:
        raise UsageError(str(exc)) from None


__all__ = [
    "ContractConfig",
    "Corpus",
    "RunConfig",
    "build_artifacts",
    "contract_address",
    "default_jobs",
    "load_corpus",
    "load_tx",
    "read_tx_list",
]
