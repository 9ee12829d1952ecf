"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .dataflow import parse_sink_filter, parse_source, query_flows, shadow_execute, write_jsonl
from .decoder import decode_call, decode_tree_storage
from .errors import TraceError, UsageError
from .invariants import History, Inference, build_report, infer_contract, load_invariants, replay, save_invariants, split_corpus
from .parser import build_invocation_tree
from .pipeline import ContractConfig, RunConfig, contract_address, default_jobs, load_corpus, load_tx, read_tx_list
from .primitives import min_hex
from .translator import to_fact_file
from .tree import render_tree, walk

log = logging.getLogger("tracekit")

MAX_FAILURE_RATE = 0.10


def _config(args: argparse.Namespace) -> RunConfig:
    templates = None
    if getattr(args, "templates", None):
        templates = frozenset(t.strip() for t in args.templates.split(",") if t.strip())
    return RunConfig(
        endpoint=args.endpoint,
        cache_dir=args.cache_dir,
        config_dir=args.config_dir,
        train_fraction=getattr(args, "train_fraction", 0.7),
        memory=args.memory,
        templates=templates,
        jobs=args.jobs,
    )


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_parse(args: argparse.Namespace) -> int:
    config = _config(args)
    meta, trace = load_tx(args.tx, config)
    tree = build_invocation_tree(meta, trace)
    label = storage = None
    if args.decode:
        contracts = ContractConfig(config.config_dir)
        layouts = {}
        for node in walk(tree):
            layout = contracts.layout(node.storage_address)
            if layout is not None:
                layouts[node.storage_address] = layout
        tree = decode_tree_storage(tree, layouts)

        def label(node):
            abis = contracts.abi(node.code_address)
            if not abis:
                return None
            call = decode_call(node, abis)
            return call.function.signature if call.function is not None else None

        def storage(node, ev):
            where = ev.decoded.render() if ev.decoded is not None else min_hex(ev.raw_slot)
            mark = " (rolled back)" if ev.rolled_back else ""
            return f"{ev.kind.value} {where} = {min_hex(ev.value)}{mark}"

    _emit(render_tree(tree, label, storage) + "\n", args.out)
    return 0


def _load_list(path: Path, config: RunConfig, templates):
    refs = read_tx_list(path)
    if not refs:
        raise UsageError(f"{path} lists no transactions")
    corpus = load_corpus(refs, config, templates)
    if corpus.failure_rate > MAX_FAILURE_RATE:
        raise TraceError(
            f"{len(corpus.failures)} of {len(refs)} transactions failed to load "
            f"(limit {MAX_FAILURE_RATE:.0%})"
        )
    return corpus


def cmd_infer(args: argparse.Namespace) -> int:
    config = _config(args)
    contract = contract_address(args.contract)
    templates = config.selected_templates()
    corpus = _load_list(args.txlist, config, templates)
    hashes = [a.tx_hash for a in corpus.artifacts]
    if not hashes:
        raise UsageError("no transactions could be loaded")
    train_hashes, test_hashes = split_corpus(hashes, config.train_fraction)
    train = corpus.artifacts[: len(train_hashes)]
    inference = infer_contract(train, contract, templates)
    out = args.out or Path(f"{contract}.invariants.json")
    save_invariants(out, contract, inference.invariants)
    counts: dict[str, int] = {}
    for inv in inference.invariants:
        counts[inv.template_id] = counts.get(inv.template_id, 0) + 1
    print(f"contract {contract}: {len(train_hashes)} training / {len(test_hashes)} held-out transactions")
    for tmpl in templates:
        if tmpl.id in inference.not_applicable:
            status = "not applicable"
        else:
            status = f"{counts.get(tmpl.id, 0)} invariant(s)"
        print(f"  {tmpl.category.value:16} {tmpl.id:34} {status}")
    print(f"{len(inference.invariants)} invariants written to {out}")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    config = _config(args)
    contract, invariants = load_invariants(args.store)
    templates = {inv.template_id for inv in invariants}
    config = RunConfig(**{**config.__dict__, "templates": frozenset(templates)})
    selected = config.selected_templates()
    history = History()
    train_verdicts = []
    if args.train_list:
        train = _load_list(args.train_list, config, selected)
        train_verdicts = replay(invariants, train.artifacts, history)
    test = _load_list(args.txlist, config, selected)
    test_verdicts = replay(invariants, test.artifacts, history)
    report = build_report(Inference(contract or "", list(invariants)), train_verdicts, test_verdicts)
    report["verdicts"] = [
        {"template_id": v.invariant.template_id, "target": v.invariant.target.to_json(), "tx": v.tx_hash,
         "outcome": v.outcome.value, "witness": v.witness}
        for row in test_verdicts
        for v in row
    ]
    outcomes = [v["outcome"] for v in report["verdicts"]]
    report["summary"]["pass"] = outcomes.count("pass")
    report["summary"]["violate"] = outcomes.count("violate")
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def cmd_translate(args: argparse.Namespace) -> int:
    meta, trace = load_tx(args.tx, _config(args))
    tree = build_invocation_tree(meta, trace)
    _emit(to_fact_file(meta, trace, tree), args.out)
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    sources = [parse_source(s) for s in args.source or ()]
    pattern = parse_sink_filter(args.sink)
    meta, trace = load_tx(args.tx, _config(args))
    tree = build_invocation_tree(meta, trace)
    _state, facts = shadow_execute(meta, trace, tree, sources)
    facts = query_flows(facts, pattern, tree)
    if args.out is None:
        write_jsonl(facts, sys.stdout)
    else:
        with args.out.open("w", encoding="utf-8") as fh:
            write_jsonl(facts, fh)
    return 0


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--endpoint", help="JSON-RPC URL of an archive node (default: $TRACEKIT_RPC_URL)")
    common.add_argument("--cache-dir", type=Path, help="trace/receipt cache directory")
    common.add_argument("--config-dir", type=Path, help="directory with abi/<addr>.json and layout/<addr>.json")
    common.add_argument("--memory", action="store_true", help="request memory snapshots from the tracer")
    common.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes for batch commands")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tracekit", description="EVM transaction trace analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="print a transaction's invocation tree")
    p.add_argument("tx", help="transaction hash or fixture path")
    p.add_argument("--decode", action="store_true", help="show function signatures and storage paths")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("infer", parents=[common], help="infer invariants for a contract")
    p.add_argument("contract", help="contract address")
    p.add_argument("txlist", type=Path, help="file with one tx hash or fixture path per line")
    p.add_argument("--train-fraction", type=_fraction, default=0.7)
    p.add_argument("--templates", help="comma-separated template ids (default: all)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("check", parents=[common], help="check transactions against an invariant store")
    p.add_argument("store", type=Path, help="invariant store written by infer")
    p.add_argument("txlist", type=Path, help="transactions to check")
    p.add_argument("--train-list", type=Path, help="training transactions, replayed first for history and pass rates")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("translate", parents=[common], help="write a per-instruction fact file")
    p.add_argument("tx", help="transaction hash or fixture path")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("extract", parents=[common], help="emit flow facts as JSON lines")
    p.add_argument("tx", help="transaction hash or fixture path")
    p.add_argument("--source", action="append",
                   help="calldata:FRAME:OFF:LEN, storage:ADDR:SLOT, env:OP or return:FRAME (repeatable)")
    p.add_argument("--sink", help="OPCODE[:ROLE][@FRAME] filter")
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tracekit: usage error: {exc}", file=sys.stderr)
        return 2
    except (TraceError, OSError) as exc:
        print(f"tracekit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
