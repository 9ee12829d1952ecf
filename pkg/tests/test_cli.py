from __future__ import annotations

import json

import pytest

from tracekit.cli import main
from tracekit.dataflow import CalldataRange
from tracekit.ingestion import store_fixture
from tracekit.oracle.corpus import A, VAULT, protocol_corpus, scenario
from tracekit.trace import RawTrace

from taint_corpus import EXAMPLES

OFFLINE = ["--jobs", "1"]


@pytest.fixture(autouse=True)
def _no_endpoint(monkeypatch, tmp_path):
    monkeypatch.delenv("TRACEKIT_RPC_URL", raising=False)
    monkeypatch.setenv("TRACEKIT_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture(scope="module")
def protocol(tmp_path_factory):
    """The ten-transaction vault corpus as fixtures plus list files."""
    root = tmp_path_factory.mktemp("protocol")
    gts = protocol_corpus()
    names = []
    for i, gt in enumerate(gts):
        store_fixture(root / f"tx{i}.json", gt.meta, gt.trace)
        names.append(f"tx{i}.json")
    (root / "all.txt").write_text("# vault deposits, oldest first\n" + "\n".join(names) + "\n")
    (root / "train.txt").write_text("\n".join(names[:7]) + "\n")
    (root / "exploit.txt").write_text(names[-1] + "\n")
    return root, gts


def _fixture(tmp_path, name, gt=None, trace=None):
    gt = gt or scenario(name).run()
    path = tmp_path / f"{name}.json"
    store_fixture(path, gt.meta, trace if trace is not None else gt.trace)
    return path


def test_parse_three_frames(tmp_path, capsys):
    assert main(["parse", str(_fixture(tmp_path, "call_staticcall_chain")), *OFFLINE]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert [len(l) - len(l.lstrip()) for l in lines] == [0, 2, 4]


def test_parse_empty_trace(tmp_path, capsys):
    path = _fixture(tmp_path, "value_transfer_only", trace=RawTrace(()))
    assert main(["parse", str(path), *OFFLINE]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 1


def test_parse_decode_with_abi(tmp_path, capsys):
    path = _fixture(tmp_path, "token_transfers")
    gt = scenario("token_transfers").run()
    token = gt.tree.children[0].code_address
    abi_dir = tmp_path / "cfg" / "abi"
    abi_dir.mkdir(parents=True)
    abi = [{"type": "function", "name": "transfer",
            "inputs": [{"name": "to", "type": "address"}, {"name": "amount", "type": "uint256"}],
            "outputs": [{"name": "", "type": "bool"}]}]
    (abi_dir / f"{token}.json").write_text(json.dumps(abi))
    assert main(["parse", str(path), "--decode", "--config-dir", str(tmp_path / "cfg"), *OFFLINE]) == 0
    out = capsys.readouterr().out
    assert "transfer(address,uint256)" in out and "0xa9059cbb" not in out


def test_infer_writes_the_store(protocol, tmp_path, capsys):
    root, gts = protocol
    store = tmp_path / "vault.json"
    assert main(["infer", VAULT, str(root / "all.txt"), "--out", str(store), *OFFLINE]) == 0
    doc = json.loads(store.read_text())
    gas = [i for i in doc["invariants"] if i["template_id"] == "GasStartUpperBound"]
    assert len(gas) == 1
    assert gas[0]["parameters"]["bound"] == max(gt.tree.gas_at_entry for gt in gts[:7])
    out = capsys.readouterr().out
    for tid in ("PriceRatioRange", "SwapSlippageBound"):
        (line,) = [l for l in out.splitlines() if tid in l]
        assert line.endswith("not applicable")


def test_infer_template_filter(protocol, tmp_path):
    root, _ = protocol
    store = tmp_path / "gas.json"
    argv = ["infer", VAULT, str(root / "all.txt"), "--templates", "GasStartUpperBound", "--out", str(store)]
    assert main(argv + OFFLINE) == 0
    assert [i["template_id"] for i in json.loads(store.read_text())["invariants"]] == ["GasStartUpperBound"]
    assert main(["infer", VAULT, str(root / "all.txt"), "--templates", "Nope", *OFFLINE]) == 2


def test_infer_empty_list(tmp_path, capsys):
    (tmp_path / "empty.txt").write_text("# nothing here\n")
    assert main(["infer", A, str(tmp_path / "empty.txt"), *OFFLINE]) == 2
    assert "usage error" in capsys.readouterr().err


def _infer(root, tmp_path):
    store = tmp_path / "vault.json"
    assert main(["infer", VAULT, str(root / "all.txt"), "--out", str(store), *OFFLINE]) == 0
    return store


def test_check_training_set_passes(protocol, tmp_path):
    root, _ = protocol
    store = _infer(root, tmp_path)
    report_path = tmp_path / "report.json"
    assert main(["check", str(store), str(root / "train.txt"), "--out", str(report_path), *OFFLINE]) == 0
    report = json.loads(report_path.read_text())
    assert report["summary"]["violate"] == 0 and report["summary"]["pass"] == len(report["verdicts"]) > 0


def test_check_flags_the_exploit(protocol, tmp_path):
    root, _ = protocol
    store = _infer(root, tmp_path)
    report_path = tmp_path / "report.json"
    argv = ["check", str(store), str(root / "exploit.txt"), "--train-list", str(root / "train.txt"),
            "--out", str(report_path)]
    assert main(argv + OFFLINE) == 0
    report = json.loads(report_path.read_text())
    gas = [v for v in report["verdicts"] if v["template_id"] == "GasStartUpperBound"]
    assert gas == [{**gas[0], "outcome": "violate", "witness": 5_000_000}]
    entry = next(e for e in report["per_invariant"] if e["template_id"] == "GasStartUpperBound")
    assert entry["train_pass_rate"] == 1.0 and entry["test_pass_rate"] == 0.0


def test_check_empty_store(protocol, tmp_path, capsys):
    root, _ = protocol
    store = tmp_path / "empty.json"
    store.write_text(json.dumps({"contract": VAULT, "invariants": []}))
    assert main(["check", str(store), str(root / "exploit.txt"), *OFFLINE]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["verdicts"] == [] and report["invariants_inferred"] == 0


def test_translate_counts_and_idempotence(tmp_path):
    path = _fixture(tmp_path, "return_empty")
    out1, out2 = tmp_path / "a.facts", tmp_path / "b.facts"
    assert main(["translate", str(path), "--out", str(out1), *OFFLINE]) == 0
    assert main(["translate", str(path), "--out", str(out2), *OFFLINE]) == 0
    lines = out1.read_text().splitlines()
    assert len(lines) == 7 and sum(l.startswith("#") for l in lines) == 4
    assert out1.read_bytes() == out2.read_bytes()


def test_missing_fixture(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["translate", str(missing), *OFFLINE]) == 1
    assert str(missing) in capsys.readouterr().err


def test_hash_without_endpoint_is_a_runtime_error(capsys):
    assert main(["parse", "0x" + "ab" * 32, *OFFLINE]) == 1
    assert "endpoint" in capsys.readouterr().err


def _taint_fixture(tmp_path):
    gt = EXAMPLES[0].run()
    path = tmp_path / "taint.json"
    store_fixture(path, gt.meta, gt.trace)
    return path


def test_extract_one_fact(tmp_path, capsys):
    src = CalldataRange(0, 4, 32).label()
    assert main(["extract", str(_taint_fixture(tmp_path)), "--source", src, *OFFLINE]) == 0
    (line,) = capsys.readouterr().out.splitlines()
    assert json.loads(line)["sink_opcode"] == "SSTORE"


def test_extract_without_sources(tmp_path, capsys):
    assert main(["extract", str(_taint_fixture(tmp_path)), *OFFLINE]) == 0
    assert capsys.readouterr().out == ""


def test_extract_filter_matching_nothing(tmp_path, capsys):
    argv = ["extract", str(_taint_fixture(tmp_path)), "--source", "calldata:0:4:32", "--sink", "CALL:value"]
    assert main(argv + OFFLINE) == 0
    assert capsys.readouterr().out == ""


def test_extract_bad_source(tmp_path):
    assert main(["extract", str(_taint_fixture(tmp_path)), "--source", "bogus", *OFFLINE]) == 2


def test_parallel_jobs_match_serial(protocol, tmp_path):
    root, _ = protocol
    serial, parallel = tmp_path / "s.json", tmp_path / "p.json"
    assert main(["infer", VAULT, str(root / "all.txt"), "--out", str(serial), "--jobs", "1"]) == 0
    assert main(["infer", VAULT, str(root / "all.txt"), "--out", str(parallel), "--jobs", "2"]) == 0
    assert serial.read_text() == parallel.read_text()
