"""Governed data-product gateway.

A marketplace of data products and data contracts, a deterministic
governance engine for purpose-based access control, a SQL gateway that
validates queries against contracts before execution, an embedded
CSV-backed executor, a tamper-evident audit chain, and an MCP stdio
server exposing the whole thing to AI agents.
"""

__version__ = "0.1.0"
