"""ABI decoding of call frames and structural decoding of storage slots."""

from .abi import (
    AbiFunction,
    AbiType,
    DecodeStatus,
    DecodedCall,
    decode,
    decode_call,
    encode,
    load_abi,
    parse_type,
)
from .storage import (
    ArrayIndex,
    DecodedSlotPath,
    MappingKey,
    SlotDecoder,
    StorageLayout,
    StructOffset,
    decode_storage_access,
    decode_tree_storage,
    evaluate_path,
    load_storage_layout,
)

__all__ = [
    "AbiFunction",
    "AbiType",
    "ArrayIndex",
    "DecodeStatus",
    "DecodedCall",
    "DecodedSlotPath",
    "MappingKey",
    "SlotDecoder",
    "StorageLayout",
    "StructOffset",
    "decode",
    "decode_call",
    "decode_storage_access",
    "decode_tree_storage",
    "encode",
    "evaluate_path",
    "load_abi",
    "load_storage_layout",
    "parse_type",
]
