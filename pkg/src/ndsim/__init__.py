"""Neighbor-discovery simulation toolkit for BLE-style contact tracing."""

__version__ = "0.1.0"
