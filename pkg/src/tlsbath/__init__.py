"""Simulation and analysis of two-level-system defect baths coupled to transmon qubits."""

__version__ = "0.1.0"
