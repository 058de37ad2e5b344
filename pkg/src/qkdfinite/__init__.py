"""Finite-key BB84 simulation, security bounds and amplitude-damping capacity."""

__version__ = "0.1.0"
