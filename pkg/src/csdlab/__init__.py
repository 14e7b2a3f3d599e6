"""Pseudospectral simulator and estimate laboratory for the Chern-Simons-Dirac system in Coulomb gauge."""

__version__ = "0.1.0"
