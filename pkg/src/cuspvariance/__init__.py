"""Hecke eigenforms of level 1 and quantum-variance experiments."""

__version__ = "0.1.0"
