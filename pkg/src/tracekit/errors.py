"""Exception hierarchy.

Every error raised on purpose by this package derives from ``TraceError``
so callers (the CLI in particular) can separate our diagnostics from bugs.
"""

from __future__ import annotations


class TraceError(Exception):
    """Base class for all package errors."""


class TransportError(TraceError):
    """Network failure talking to an RPC endpoint; safe to retry."""


class NotFoundError(TraceError):
    """The endpoint does not know the requested transaction."""


class SchemaError(TraceError):
    """A JSON document does not match the expected schema."""

    def __init__(self, field: str, message: str = "") -> None:
        self.field = field
        text = f"schema error at {field!r}"
        if message:
            text += f": {message}"
        super().__init__(text)


class MalformedTraceError(TraceError):
    def __init__(self, index: int, message: str) -> None:
        self.index = index
        super().__init__(f"malformed trace at entry {index}: {message}")


class UnsupportedInstructionError(TraceError):
    def __init__(self, op: str, pc: int) -> None:
        self.op = op
        self.pc = pc
        super().__init__(f"unsupported instruction {op} at pc {pc}")


class ShadowDivergenceError(TraceError):
    """Shadow stack depth disagrees with the concrete stack (internal bug trap)."""

    def __init__(self, index: int, shadow: int, concrete: int) -> None:
        self.index = index
        super().__init__(
            f"shadow stack diverged at entry {index}: shadow depth {shadow}, concrete depth {concrete}"
        )


class AbiError(TraceError):
    pass


class ConfigurationError(TraceError):
    pass


class UsageError(TraceError):
    pass
