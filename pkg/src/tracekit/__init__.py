"""EVM transaction trace analysis."""

__version__ = "0.1.0"
