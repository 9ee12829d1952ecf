"""Reference interpreter and assembler used as an independent oracle for the parser."""

from .assembler import AssemblyError, assemble, initcode_for
from .machine import Account, GroundTruth, MockWorld, create2_address, create_address, execute, make_tx

__all__ = [
    "Account",
    "AssemblyError",
    "GroundTruth",
    "MockWorld",
    "assemble",
    "create2_address",
    "create_address",
    "execute",
    "initcode_for",
    "make_tx",
]
