"""Stochastic-computing neural accelerator model for ligand-based virtual screening."""

__version__ = "0.1.0"
