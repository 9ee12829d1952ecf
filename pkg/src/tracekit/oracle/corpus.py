"""Named synthetic programs exercising every call shape the parser must handle.

Each scenario is a fresh ``MockWorld`` plus a transaction. Tests run them
through :func:`tracekit.oracle.execute` and compare the parser's tree with
the ground truth; the CLI and benchmarks reuse them as fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..primitives import keccak256
from ..trace import TransactionMeta
from .assembler import assemble, initcode_for
from .machine import MockWorld, execute, make_tx, GroundTruth

ORIGIN = "0x" + "aa" * 20
A = "0x" + "11" * 20
B = "0x" + "22" * 20
C = "0x" + "33" * 20
D = "0x" + "44" * 20
EMPTY = "0x" + "55" * 20
TOKEN = "0x" + "66" * 20

TRANSFER_SELECTOR = keccak256(b"transfer(address,uint256)")[:4]


def call_asm(op: str, target: str, *, gas: int | None = None, value: int = 0,
             args: tuple[int, int] = (0, 0), ret: tuple[int, int] = (0, 0)) -> str:
    """Push call operands in stack order and emit ``op``; ``gas=None`` forwards all."""
    lines = [f"PUSH {ret[1]}", f"PUSH {ret[0]}", f"PUSH {args[1]}", f"PUSH {args[0]}"]
    if op in ("CALL", "CALLCODE"):
        lines.append(f"PUSH {value}")
    lines.append(f"PUSH20 {target}")
    lines.append("GAS" if gas is None else f"PUSH {gas}")
    lines.append(op)
    return "\n".join(lines)


def mstore_bytes(data: bytes, offset: int = 0) -> str:
    """Write ``data`` to memory at ``offset`` using 32-byte MSTOREs (zero padded)."""
    lines = []
    for off in range(0, len(data), 32):
        chunk = data[off : off + 32].ljust(32, b"\0")
        lines += [f"PUSH32 0x{chunk.hex()}", f"PUSH {offset + off}", "MSTORE"]
    return "\n".join(lines)


RETURN_WORD = """
PUSH1 0x2a
PUSH1 0
MSTORE
PUSH1 32
PUSH1 0
RETURN
"""

REVERT_WORD = """
PUSH1 0x0b
PUSH1 0
MSTORE
PUSH1 32
PUSH1 0
REVERT
"""

STORE_THEN_RETURN = """
PUSH1 1
PUSH1 9
SSTORE
PUSH1 0
PUSH1 0
RETURN
"""

STORE_RESULT = """
PUSH1 0
SSTORE
STOP
"""


@dataclass(frozen=True)
class Scenario:
    name: str
    build: Callable[[], tuple[MockWorld, TransactionMeta]]
    error_strings: bool = True
    capture_memory: bool = False

    def run(self) -> GroundTruth:
        world, tx = self.build()
        return execute(world, tx, capture_memory=self.capture_memory, error_strings=self.error_strings)


def _world(**codes: str) -> MockWorld:
    world = MockWorld()
    world.account(ORIGIN).balance = 10**21
    for name, source in codes.items():
        world.deploy(globals()[name], assemble(source))
    return world


def _simple(name: str, source: str, data: bytes = b"", gas: int = 1_000_000) -> Scenario:
    def build():
        return _world(A=source), make_tx(ORIGIN, A, data, gas=gas)

    return Scenario(name, build)


def _two(name: str, root: str, callee: str, data: bytes = b"", **kw) -> Scenario:
    def build():
        return _world(A=root, B=callee), make_tx(ORIGIN, A, data)

    return Scenario(name, build, **kw)


def _calldata(selector_sig: str, *words: int) -> bytes:
    return keccak256(selector_sig.encode())[:4] + b"".join(w.to_bytes(32, "big") for w in words)


def _depth_chain() -> tuple[MockWorld, TransactionMeta]:
    # A -> B -> C -> D, each forwarding its own calldata; D returns a word
    forward = "\n".join([
        "CALLDATASIZE", "PUSH1 0", "PUSH1 0", "CALLDATACOPY",
        call_asm("CALL", "{next}", args=(0, 36), ret=(0, 32)).replace("PUSH 36", "CALLDATASIZE"),
        "POP", "PUSH1 32", "PUSH1 0", "RETURN",
    ])
    world = _world(
        A=forward.replace("{next}", B),
        B=forward.replace("{next}", C),
        C=forward.replace("{next}", D),
        D="PUSH1 0\nCALLDATALOAD\nPUSH1 0\nMSTORE\n" + "PUSH1 32\nPUSH1 0\nRETURN",
    )
    return world, make_tx(ORIGIN, A, _calldata("relay(uint256)", 77))


def _create_then_call(op: str, revert: bool = False) -> Callable[[], tuple[MockWorld, TransactionMeta]]:
    def build():
        runtime = assemble(RETURN_WORD)
        init = initcode_for(runtime) if not revert else assemble(REVERT_WORD)
        salt = ["PUSH1 0x99"] if op == "CREATE2" else []
        source = "\n".join([
            mstore_bytes(init),
            *salt,
            f"PUSH {len(init)}",
            "PUSH1 0",
            "PUSH1 0",
            op,
            # call whatever was created (zero address when creation failed)
            "DUP1",
            "PUSH1 32", "PUSH1 0x40", "PUSH1 0", "PUSH1 0", "PUSH1 0",
            "DUP6", "GAS", "CALL",
            "POP",
            "PUSH1 0",
            "SSTORE",
            "STOP",
        ])
        return _world(A=source), make_tx(ORIGIN, A)

    return build


def _creation_tx() -> tuple[MockWorld, TransactionMeta]:
    runtime = assemble(RETURN_WORD)
    init = assemble("PUSH1 5\nPUSH1 1\nSSTORE\n") + initcode_for(runtime)
    return _world(), make_tx(ORIGIN, None, init)


def _failed_create_value() -> tuple[MockWorld, TransactionMeta]:
    # A has no balance, so a CREATE with value fails before running initcode
    source = mstore_bytes(assemble("STOP")) + "\nPUSH1 1\nPUSH1 0\nPUSH1 5\nCREATE\nPUSH1 0\nSSTORE\nSTOP"
    return _world(A=source), make_tx(ORIGIN, A)


def _oog(error_strings: bool) -> Scenario:
    looping = """
    PUSH1 1
    PUSH1 3
    SSTORE
    spin:
    JUMPDEST
    PUSH2 @spin
    JUMP
    """
    root = call_asm("CALL", B, gas=400) + "\n" + STORE_RESULT

    def build():
        return _world(A=root, B=looping), make_tx(ORIGIN, A)

    suffix = "" if error_strings else "_silent"
    return Scenario(f"callee_out_of_gas{suffix}", build, error_strings=error_strings)


def _nested_revert() -> tuple[MockWorld, TransactionMeta]:
    a = call_asm("CALL", B) + "\nPOP\n" + REVERT_WORD
    root = call_asm("CALL", A) + "\n" + STORE_RESULT
    world = _world(A=root, B=STORE_THEN_RETURN)
    # root lives at C so that A can revert underneath it
    world.deploy(C, assemble(root))
    world.deploy(A, assemble(a))
    return world, make_tx(ORIGIN, C)


def _reentry() -> tuple[MockWorld, TransactionMeta]:
    # A calls B with selector f(); B calls A back with selector g(); A's g() path stores and returns
    sel_f = keccak256(b"f()")[:4]
    sel_g = keccak256(b"g()")[:4]
    a = "\n".join([
        "PUSH29 0x01" + "00" * 28, "PUSH1 0", "CALLDATALOAD", "DIV",
        f"PUSH4 0x{sel_g.hex()}", "EQ", "PUSH2 @reentered", "JUMPI",
        mstore_bytes(sel_f),
        call_asm("CALL", B, args=(0, 4)),
        "PUSH1 0", "SSTORE", "STOP",
        "reentered:", "JUMPDEST",
        "PUSH1 2", "PUSH1 4", "SSTORE", "STOP",
    ])
    b = "\n".join([mstore_bytes(sel_g), call_asm("CALL", A, args=(0, 4)), "POP", "STOP"])
    return _world(A=a, B=b), make_tx(ORIGIN, A, b"")


def _token_transfers(pull: bool = False) -> Callable[[], tuple[MockWorld, TransactionMeta]]:
    """A moves 5 then 7 units through TOKEN, which credits a balances mapping.

    Pushes are transfer(B, n); pulls are transferFrom(ORIGIN, A, n).
    """
    key_at, amount_at = (36, 68) if pull else (4, 36)
    token = f"""
    PUSH1 {key_at}
    CALLDATALOAD
    PUSH1 0
    MSTORE
    PUSH1 0
    PUSH1 32
    MSTORE
    PUSH1 64
    PUSH1 0
    SHA3
    DUP1
    SLOAD
    PUSH1 {amount_at}
    CALLDATALOAD
    ADD
    SWAP1
    SSTORE
    PUSH1 1
    PUSH1 0
    MSTORE
    PUSH1 32
    PUSH1 0
    RETURN
    """

    def build():
        lines = []
        for amount in (5, 7):
            if pull:
                data = _calldata("transferFrom(address,address,uint256)", int(ORIGIN, 16), int(A, 16), amount)
            else:
                data = _calldata("transfer(address,uint256)", int(B, 16), amount)
            lines += [mstore_bytes(data, 0x80), call_asm("CALL", TOKEN, args=(0x80, len(data)), ret=(0, 32)), "POP"]
        lines.append("STOP")
        world = _world(A="\n".join(lines))
        world.deploy(TOKEN, assemble(token))
        return world, make_tx(ORIGIN, A)

    return build


def _loop() -> Scenario:
    source = """
    PUSH1 5
    top:
    JUMPDEST
    DUP1
    DUP1
    SSTORE
    PUSH1 1
    SWAP1
    SUB
    DUP1
    PUSH2 @top
    JUMPI
    STOP
    """
    return _simple("counted_loop", source)


def _returndata() -> Scenario:
    root = "\n".join([
        call_asm("STATICCALL", B),
        "POP", "RETURNDATASIZE", "PUSH1 0", "PUSH1 0x20", "RETURNDATACOPY",
        "PUSH1 0x20", "MLOAD", "PUSH1 3", "SSTORE",
        "RETURNDATASIZE", "PUSH1 0x20", "RETURN",
    ])
    return _two("returndata_copy", root, RETURN_WORD)


def _mapping_write() -> Scenario:
    # balances[CALLER] = CALLVALUE-ish, written through the standard slot derivation
    source = """
    CALLER
    PUSH1 0
    MSTORE
    PUSH1 2
    PUSH1 32
    MSTORE
    PUSH1 64
    PUSH1 0
    SHA3
    PUSH1 4
    CALLDATALOAD
    SWAP1
    SSTORE
    STOP
    """
    return _simple("mapping_write", source, _calldata("set(uint256)", 1234))


def _codeless() -> Scenario:
    root = "\n".join([
        call_asm("CALL", EMPTY, value=3, gas=0),
        "PUSH1 0", "SSTORE",
        call_asm("STATICCALL", EMPTY),
        "PUSH1 1", "SSTORE",
        "STOP",
    ])

    def build():
        world = _world(A=root)
        world.account(A).balance = 10
        return world, make_tx(ORIGIN, A)

    return Scenario("codeless_callee", build)


def _value_transfer() -> tuple[MockWorld, TransactionMeta]:
    return _world(), make_tx(ORIGIN, EMPTY, value=1000)


def _static_violation() -> Scenario:
    root = call_asm("STATICCALL", B) + "\n" + STORE_RESULT
    return _two("static_write_protection", root, STORE_THEN_RETURN)


def _selfdestruct() -> Scenario:
    root = call_asm("CALL", B, value=1) + "\n" + STORE_RESULT

    def build():
        world = _world(A=root, B=f"PUSH20 {C}\nSELFDESTRUCT")
        world.account(A).balance = 5
        return world, make_tx(ORIGIN, A)

    return Scenario("callee_selfdestruct", build)


def _delegate(op: str) -> Scenario:
    root = "\n".join([
        mstore_bytes(_calldata("poke(uint256)", 3)),
        call_asm(op, B, args=(0, 36), ret=(0, 32)),
        "PUSH1 0", "SSTORE", "STOP",
    ])
    lib = "PUSH1 4\nCALLDATALOAD\nCALLER\nSSTORE\n" + RETURN_WORD
    return _two(f"{op.lower()}_library", root, lib)


def _root_revert() -> Scenario:
    return _simple("root_revert_rolls_back", "PUSH1 7\nPUSH1 5\nSSTORE\n" + REVERT_WORD)


def _root_oog() -> Scenario:
    source = """
    PUSH1 7
    PUSH1 5
    SSTORE
    spin:
    JUMPDEST
    PUSH2 @spin
    JUMP
    """
    return _simple("root_out_of_gas", source, gas=300)


def _static_chain() -> Scenario:
    # root CALLs A; A STATICCALLs B; B RETURNs; A RETURNs; root STOPs
    def build():
        root = call_asm("CALL", A) + "\nPOP\nSTOP"
        a = call_asm("STATICCALL", B, ret=(0, 32)) + "\nPOP\nPUSH1 32\nPUSH1 0\nRETURN"
        world = _world(A=a, B=RETURN_WORD)
        world.deploy(C, assemble(root))
        return world, make_tx(ORIGIN, C)

    return Scenario("call_staticcall_chain", build)


SCENARIOS: tuple[Scenario, ...] = (
    _simple("return_empty", "PUSH1 0\nPUSH1 0\nRETURN"),
    _simple("single_sstore", "PUSH1 7\nPUSH1 5\nSSTORE\nSTOP"),
    _two("callee_revert", call_asm("CALL", B, ret=(0, 32)) + "\n" + STORE_RESULT, REVERT_WORD),
    _static_chain(),
    _delegate("DELEGATECALL"),
    _delegate("CALLCODE"),
    Scenario("create_then_call", _create_then_call("CREATE")),
    Scenario("create2_then_call", _create_then_call("CREATE2")),
    Scenario("create_reverts", _create_then_call("CREATE", revert=True)),
    Scenario("create_without_funds", _failed_create_value),
    Scenario("creation_transaction", _creation_tx),
    _selfdestruct(),
    _two("callee_invalid", call_asm("CALL", B) + "\n" + STORE_RESULT, "PUSH1 1\nPUSH1 1\nSSTORE\nINVALID"),
    _oog(True),
    _oog(False),
    _codeless(),
    Scenario("value_transfer_only", _value_transfer),
    Scenario("depth_four_relay", _depth_chain),
    Scenario("revert_rolls_back_descendants", _nested_revert),
    Scenario("reentrant_callback", _reentry),
    Scenario("token_transfers", _token_transfers()),
    Scenario("token_pulls", _token_transfers(pull=True)),
    _loop(),
    _returndata(),
    _mapping_write(),
    _static_violation(),
    _simple("invalid_jump", "PUSH1 3\nJUMP\nSTOP"),
    _root_revert(),
    _root_oog(),
)


# -- a small chronological corpus for the invariant protocol ------------------

VAULT = A
DEPOSITORS = ("0x" + "a1" * 20, "0x" + "a2" * 20)
ATTACKER = "0x" + "ee" * 20
DEPOSIT_SIG = "deposit(uint256)"

_PULL_TOKEN = """
PUSH1 36
CALLDATALOAD
PUSH1 0
MSTORE
PUSH1 0
PUSH1 32
MSTORE
PUSH1 64
PUSH1 0
SHA3
DUP1
SLOAD
PUSH1 68
CALLDATALOAD
ADD
SWAP1
SSTORE
PUSH1 1
PUSH1 0
MSTORE
PUSH1 32
PUSH1 0
RETURN
"""


def _vault_code() -> str:
    # deposit(amount): TOKEN.transferFrom(msg.sender, this, amount); balances[msg.sender] += amount
    selector = keccak256(b"transferFrom(address,address,uint256)")[:4]
    return "\n".join([
        f"PUSH32 0x{selector.hex()}{'00' * 28}",
        "PUSH1 0x80",
        "MSTORE",
        "CALLER",
        "PUSH1 0x84",
        "MSTORE",
        "ADDRESS",
        "PUSH1 0xa4",
        "MSTORE",
        "PUSH1 4",
        "CALLDATALOAD",
        "PUSH1 0xc4",
        "MSTORE",
        call_asm("CALL", TOKEN, args=(0x80, 100), ret=(0, 32)),
        "POP",
        "CALLER",
        "PUSH1 0",
        "MSTORE",
        "PUSH1 1",
        "PUSH1 32",
        "MSTORE",
        "PUSH1 64",
        "PUSH1 0",
        "SHA3",
        "DUP1",
        "SLOAD",
        "PUSH1 4",
        "CALLDATALOAD",
        "ADD",
        "SWAP1",
        "SSTORE",
        "STOP",
    ])


def vault_world() -> MockWorld:
    world = MockWorld()
    world.deploy(VAULT, assemble(_vault_code()), storage={0: int(DEPOSITORS[0], 16)})
    world.deploy(TOKEN, assemble(_PULL_TOKEN))
    return world


def protocol_corpus(n: int = 10, exploit_gas: int = 5_000_000) -> list[GroundTruth]:
    """``n`` chronological deposits into VAULT; the last one is exploit-shaped.

    Honest deposits alternate between two senders with gas budgets of
    100000 + 10000 * (i % 5) and amounts of 10 * (i % 4 + 1). The final transaction
    comes from ATTACKER with ``exploit_gas`` and an outsized amount.
    """
    world = vault_world()
    out = []
    for i in range(n):
        if i == n - 1:
            origin, amount, gas = ATTACKER, 10**24, exploit_gas
        else:
            origin, amount, gas = DEPOSITORS[i % 2], 10 * (i % 4 + 1), 100_000 + 10_000 * (i % 5)
        tx = make_tx(origin, VAULT, _calldata(DEPOSIT_SIG, amount), gas=gas, block=100 + i)
        gt = execute(world, tx)
        world = gt.world
        out.append(gt)
    return out


# -- a long single-frame loop for timing budgets ------------------------------

_LOOP_WORKLOAD = """
PUSH2 {iterations}
top:
JUMPDEST
PUSH1 4
CALLDATALOAD
DUP2
ADD
PUSH1 0
MSTORE
DUP1
PUSH1 32
MSTORE
PUSH1 64
PUSH1 0
SHA3
DUP1
SLOAD
PUSH1 36
CALLDATALOAD
ADD
SWAP1
SSTORE
PUSH1 1
SWAP1
SUB
DUP1
PUSH2 @top
JUMPI
STOP
"""

LOOP_ENTRIES_PER_ITERATION = 26


def loop_workload(iterations: int = 4000) -> GroundTruth:
    """A mapping-update loop; 26 entries per iteration plus 2.

    Each pass writes ``m[calldata[4:36] + i] += calldata[36:68]``, so the
    run exercises SHA3, storage and calldata taint on every iteration.
    """
    world = MockWorld()
    world.deploy(A, assemble(_LOOP_WORKLOAD.format(iterations=iterations)))
    data = bytes(4) + (5).to_bytes(32, "big") + (9).to_bytes(32, "big")
    return execute(world, make_tx(ORIGIN, A, data, gas=10**9))


def scenario(name: str) -> Scenario:
    for sc in SCENARIOS:
        if sc.name == name:
            return sc
    raise KeyError(name)


__all__ = [
    "ATTACKER",
    "DEPOSITORS",
    "SCENARIOS",
    "Scenario",
    "VAULT",
    "call_asm",
    "loop_workload",
    "mstore_bytes",
    "protocol_corpus",
    "scenario",
    "vault_world",
]
