"""Quantum-dot spin-photon cluster-state simulator."""

__version__ = "1.0.0"
