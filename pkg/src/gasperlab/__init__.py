"""Gasper consensus: chain store, fork choice, finality, slashing, simulation and analytics."""

__version__ = "0.1.0"
