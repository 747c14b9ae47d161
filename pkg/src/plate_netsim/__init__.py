"""Deterministic networked ball-on-plate simulator with KS-based run comparison."""

__version__ = "0.1.0"
