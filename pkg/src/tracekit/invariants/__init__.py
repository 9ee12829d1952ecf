"""Template-based invariant inference and checking."""

from .artifacts import ERC20_FUNCTIONS, History, Target, TxArtifacts
from .core import (
    ConcreteInvariant,
    GuardVerdict,
    Observation,
    Outcome,
    check,
    collect_observations,
    infer,
    split_corpus,
    targets_of,
    violation,
)
from .store import Inference, build_report, infer_contract, load_invariants, replay, save_invariants
from .templates import CATALOG, MAX_SET_SIZE, Category, InvariantTemplate, Invocation, Tier, get_template, template_catalog

__all__ = [
    "CATALOG",
    "Category",
    "ConcreteInvariant",
    "ERC20_FUNCTIONS",
    "GuardVerdict",
    "History",
    "Inference",
    "InvariantTemplate",
    "Invocation",
    "MAX_SET_SIZE",
    "Observation",
    "Outcome",
    "Target",
    "Tier",
    "TxArtifacts",
    "build_report",
    "check",
    "collect_observations",
    "get_template",
    "infer",
    "infer_contract",
    "load_invariants",
    "replay",
    "save_invariants",
    "split_corpus",
    "targets_of",
    "template_catalog",
    "violation",
]
