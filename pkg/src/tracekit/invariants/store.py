"""Corpus-level inference and checking, the invariant store and the report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import SchemaError
from ..primitives import normalize_address
from .artifacts import History, Target, TxArtifacts
from .core import ConcreteInvariant, GuardVerdict, Observation, Outcome, check, collect_observations, infer
from .templates import InvariantTemplate, get_template


@dataclass
class Inference:
    contract: str
    invariants: list[ConcreteInvariant]
    not_applicable: list[str] = field(default_factory=list)


def infer_contract(
    training: Sequence[TxArtifacts],
    contract: str,
    templates: Iterable[InvariantTemplate],
) -> Inference:
    """Concretize every template for every target of ``contract`` seen in training.

    ``training`` must be in chronological order; time-lock templates read
    the history of earlier transactions.
    """
    templates = list(templates)
    grouped: dict[tuple[str, Target], list[Observation]] = {}
    history = History()
    for art in training:
        for tmpl in templates:
            for obs in collect_observations(tmpl, art, None, history):
                if obs.target.address == contract:
                    grouped.setdefault((tmpl.id, obs.target), []).append(obs)
        history.record(art)
    invariants = []
    applicable = set()
    for tmpl in templates:
        targets = sorted((t for tid, t in grouped if tid == tmpl.id), key=lambda t: t.selector or "")
        for target in targets:
            observations = grouped[(tmpl.id, target)]
            if tmpl.kind == "lock" or any(o.values for o in observations):
                applicable.add(tmpl.id)
            inv = infer(tmpl, observations)
            if inv is not None:
                invariants.append(inv)
    not_applicable = [t.id for t in templates if t.id not in applicable]
    return Inference(contract, invariants, not_applicable)


def replay(
    invariants: Sequence[ConcreteInvariant],
    corpus: Sequence[TxArtifacts],
    history: History | None = None,
) -> list[list[GuardVerdict]]:
    """Check each transaction in order, feeding the shared history as it goes."""
    history = history if history is not None else History()
    out = []
    for art in corpus:
        out.append([check(inv, art, history) for inv in invariants])
        history.record(art)
    return out


def save_invariants(path: str | Path, contract: str, invariants: Sequence[ConcreteInvariant]) -> None:
    doc = {"contract": contract, "invariants": [inv.to_json() for inv in invariants]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_invariants(path: str | Path) -> tuple[str | None, list[ConcreteInvariant]]:
    """Read an invariant store: an object with ``invariants`` or a bare array."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"malformed JSON ({exc.msg})") from None
    items = doc.get("invariants") if isinstance(doc, dict) else doc
    contract = doc.get("contract") if isinstance(doc, dict) else None
    if not isinstance(items, list):
        raise SchemaError("invariants", "expected an array")
    out = []
    for i, item in enumerate(items):
        try:
            inv = ConcreteInvariant.from_json(item)
            get_template(inv.template_id)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invariants[{i}]", str(exc)) from None
        out.append(inv)
    return (normalize_address(contract) if contract else None), out


def _rate(verdicts: list[GuardVerdict]) -> float | None:
    if not verdicts:
        return None
    return sum(v.outcome is Outcome.PASS for v in verdicts) / len(verdicts)


def build_report(
    inference: Inference,
    train_verdicts: Sequence[Sequence[GuardVerdict]],
    test_verdicts: Sequence[Sequence[GuardVerdict]],
) -> dict:
    """Summarize pass rates and violations per invariant.

    Verdict lists are per transaction, aligned with ``inference.invariants``.
    """
    per = []
    for i, inv in enumerate(inference.invariants):
        train = [row[i] for row in train_verdicts]
        test = [row[i] for row in test_verdicts]
        per.append(
            {
                **inv.to_json(),
                "train_pass_rate": _rate(train),
                "test_pass_rate": _rate(test),
                "violations": [
                    {"tx": v.tx_hash, "witness": v.witness, "split": split}
                    for split, rows in (("train", train), ("test", test))
                    for v in rows
                    if v.outcome is Outcome.VIOLATE
                ],
            }
        )
    flagged = sorted({v.tx_hash for row in test_verdicts for v in row if v.outcome is Outcome.VIOLATE})
    return {
        "contract": inference.contract,
        "invariants_inferred": len(inference.invariants),
        "not_applicable": inference.not_applicable,
        "per_invariant": per,
        "summary": {
            "train_transactions": len(train_verdicts),
            "test_transactions": len(test_verdicts),
            "flagged_transactions": flagged,
        },
    }


__all__ = ["Inference", "build_report", "infer_contract", "load_invariants", "replay", "save_invariants"]
