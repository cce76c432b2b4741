"""Density-matrix simulation of logical-ancilla phase estimation with five-qubit-code post-selection."""

__version__ = "0.1.0"
