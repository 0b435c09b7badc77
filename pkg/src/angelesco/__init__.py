"""Angelesco systems: Hermite-Pade approximants, vector equilibrium and strong asymptotics."""

__version__ = "0.1.0"
