"""Collect observations, concretize templates and check transactions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

from ..errors import ConfigurationError, UsageError
from ..tree import walk
from .artifacts import History, Target, TxArtifacts
from .templates import MAX_SET_SIZE, InvariantTemplate, Invocation, Tier, get_template


@dataclass(frozen=True)
class Observation:
    tx_hash: str
    target: Target
    template_id: str
    values: tuple
    frame: int


@dataclass(frozen=True)
class ConcreteInvariant:
    template_id: str
    target: Target
    parameters: dict
    training_support: int

    def to_json(self) -> dict:
        return {
            "template_id": self.template_id,
            "target": self.target.to_json(),
            "parameters": self.parameters,
            "training_support": self.training_support,
        }

    @classmethod
    def from_json(cls, obj: dict) -> ConcreteInvariant:
        return cls(obj["template_id"], Target.from_json(obj["target"]), dict(obj["parameters"]), int(obj["training_support"]))


class Outcome(str, enum.Enum):
    PASS = "pass"
    VIOLATE = "violate"


@dataclass(frozen=True)
class GuardVerdict:
    invariant: ConcreteInvariant
    tx_hash: str
    outcome: Outcome
    witness: Any = None

    def __post_init__(self) -> None:
        if self.outcome is Outcome.VIOLATE and self.witness is None:
            raise ValueError("a violation needs a witness")


def _require_tier(template: InvariantTemplate, artifacts: TxArtifacts) -> None:
    if template.tier is Tier.STORAGE and not artifacts.storage_decoded:
        raise ConfigurationError(f"{template.id} needs decoded storage events, which were not produced")
    if template.tier is Tier.DATAFLOW and artifacts.facts is None:
        raise ConfigurationError(f"{template.id} needs flow facts; run shadow execution first")


def collect_observations(
    template: InvariantTemplate,
    artifacts: TxArtifacts,
    target: Target | None = None,
    history: History | None = None,
) -> list[Observation]:
    """One observation per executed invocation of ``target`` (of every target when None)."""
    _require_tier(template, artifacts)
    frame_nodes = tuple(walk(artifacts.tree))
    out = []
    for fid, node, ancestors in artifacts.frames():
        if not node.executed:
            continue
        here = Target.of(node)
        if target is not None and here != target:
            continue
        inv = Invocation(artifacts, fid, node, ancestors, history, frame_nodes)
        out.append(Observation(artifacts.tx_hash, here, template.id, tuple(template.extract(inv)), fid))
    return out


def _frac(value: Fraction) -> list[int]:
    return [value.numerator, value.denominator]


def infer(
    template: InvariantTemplate,
    observations: Sequence[Observation],
    *,
    max_set_size: int = MAX_SET_SIZE,
) -> ConcreteInvariant | None:
    """Concretize ``template`` as the tightest predicate all observations satisfy."""
    if not observations:
        return None
    targets = {o.target for o in observations}
    if len(targets) > 1:
        raise UsageError(f"observations span {len(targets)} targets; infer one target at a time")
    if any(o.template_id != template.id for o in observations):
        raise UsageError(f"observations do not all belong to {template.id}")
    items = [item for o in observations for item in o.values]
    kind = template.kind
    params: dict | None
    if kind == "lock":
        params = None if items else {}
    elif not items:
        params = None
    elif kind == "upper":
        params = {"bound": max(items)}
    elif kind == "lower":
        params = {"bound": min(items)}
    elif kind == "range":
        params = {"min": _frac(min(items)), "max": _frac(max(items))}
    elif kind == "set":
        members = sorted(set(items))
        params = {"members": members} if len(members) <= max_set_size else None
    elif kind in ("keyed_upper", "keyed_lower"):
        pick = max if kind == "keyed_upper" else min
        bounds: dict[str, int] = {}
        for key, value in items:
            bounds[key] = pick(bounds[key], value) if key in bounds else value
        params = {"bounds": dict(sorted(bounds.items()))}
    elif kind == "pinned":
        addrs = {a for pair in items for a in pair}
        params = {"address": addrs.pop()} if len(addrs) == 1 else None
    else:
        raise ValueError(f"unknown template kind {kind}")
    if params is None:
        return None
    return ConcreteInvariant(template.id, observations[0].target, params, len(observations))


def violation(template: InvariantTemplate, params: dict, item: Any) -> Any:
    """The witness if ``item`` breaks the concretized predicate, else None."""
    kind = template.kind
    if kind == "lock":
        return item
    if kind == "upper":
        return item if item > params["bound"] else None
    if kind == "lower":
        return item if item < params["bound"] else None
    if kind == "range":
        lo, hi = Fraction(*params["min"]), Fraction(*params["max"])
        return _frac(item) if not lo <= item <= hi else None
    if kind == "set":
        return item if item not in params["members"] else None
    if kind in ("keyed_upper", "keyed_lower"):
        key, value = item
        bound = params["bounds"].get(key)
        # a key never seen in training has no bound to check
        if bound is None:
            return None
        bad = value > bound if kind == "keyed_upper" else value < bound
        return {"key": key, "value": value} if bad else None
    if kind == "pinned":
        caller, origin = item
        addr = params["address"]
        if caller != addr:
            return caller
        return origin if origin != addr else None
    raise ValueError(f"unknown template kind {kind}")


def check(invariant: ConcreteInvariant, artifacts: TxArtifacts, history: History | None = None) -> GuardVerdict:
    template = get_template(invariant.template_id)
    for obs in collect_observations(template, artifacts, invariant.target, history):
        for item in obs.values:
            witness = violation(template, invariant.parameters, item)
            if witness is not None:
                return GuardVerdict(invariant, artifacts.tx_hash, Outcome.VIOLATE, witness)
    return GuardVerdict(invariant, artifacts.tx_hash, Outcome.PASS)


def _exact_fraction(value: float | Fraction) -> Fraction:
    # go through the decimal text so 0.7 means 7/10 rather than its binary approximation
    return value if isinstance(value, Fraction) else Fraction(repr(value))


def split_corpus(tx_hashes: Sequence[str], train_fraction: float) -> tuple[list[str], list[str]]:
    if not tx_hashes:
        raise UsageError("empty transaction corpus")
    frac = _exact_fraction(train_fraction)
    if not 0 < frac < 1:
        raise UsageError(f"train fraction must lie strictly between 0 and 1, got {train_fraction}")
    n_train = math.ceil(len(tx_hashes) * frac)
    return list(tx_hashes[:n_train]), list(tx_hashes[n_train:])


def targets_of(artifacts: Iterable[TxArtifacts], contract: str) -> list[Target]:
    """Every (contract, selector) pair executed in the corpus, in first-seen order."""
    seen: dict[Target, None] = {}
    for art in artifacts:
        for _fid, node, _anc in art.frames():
            if node.executed and node.code_address == contract:
                seen.setdefault(Target.of(node))
    return list(seen)


__all__ = [
    "ConcreteInvariant",
    "GuardVerdict",
    "Observation",
    "Outcome",
    "check",
    "collect_observations",
    "infer",
    "split_corpus",
    "targets_of",
    "violation",
]
