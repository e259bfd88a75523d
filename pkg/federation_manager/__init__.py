"""Federated learning manager: strategy-pluggable server, binary protocol and hardware simulator."""

__version__ = "0.1.0"
