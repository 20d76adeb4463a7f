"""Finite-volume Hamiltonian lattice gauge theory laboratory."""

__version__ = "0.1.0"
