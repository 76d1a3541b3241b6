"""Blockchain-backed UAV authentication: protocol, ledger emulation and attack harness."""

__version__ = "0.1.0"
