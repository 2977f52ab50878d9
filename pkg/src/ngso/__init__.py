"""Deterministic NGSO constellation analysis: orbits, coverage, link budgets,
ISL matching and routing."""

__version__ = "0.1.0"
