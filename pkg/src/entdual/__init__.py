"""Simulator of entanglement dualism in a two-photon Bell-measurement interferometer."""

__version__ = "0.1.0"
