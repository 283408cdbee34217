"""Density-matrix simulation of timed LOCC protocols and a volatility auditor."""

__version__ = "0.1.0"
