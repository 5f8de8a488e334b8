"""Coupling, transport and mixing diagnostics for random dynamical systems
driven by bounded noise, with a boundary-forced Navier-Stokes plug-in."""

__version__ = "0.1.0"
