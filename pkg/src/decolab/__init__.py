"""Numerical laboratory for decoherence, einselection and the quantum-to-classical transition."""

__version__ = "0.1.0"
