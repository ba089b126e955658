"""Deterministic discrete-event simulation of Gasper validators."""

from .engine import NetworkParams, SimConfig, SimTrace, Simulation, run
from .strategies import make_strategy

__all__ = ["NetworkParams", "SimConfig", "SimTrace", "Simulation", "run", "make_strategy"]
