"""Simulation and analysis of programmable 2D Rydberg atom arrays."""

__version__ = "0.1.0"
